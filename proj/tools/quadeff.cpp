// quadeff: run efficiency-estimation scenarios and write CSV traces.
//
//   quadeff run|compare|convergence <spec> --out <dir> [--seed N] [--quiet]
//
// Exit status: 0 ok, 2 configuration error, 3 numerical abort, 4 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quadeff/convergence.hpp"
#include "quadeff/csv.hpp"
#include "quadeff/scenario.hpp"
#include "quadeff/spec_io.hpp"

namespace fs = std::filesystem;
using namespace quadeff;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Options {
  std::string spec_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

ScenarioSpec load(const Options& o) {
  ScenarioSpec spec = load_scenario(o.spec_path);
  if (o.seed) {
    spec.seed = *o.seed;
  }
  return spec;
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

void print_metrics(const MethodMetrics& m) {
  for (std::size_t i = 0; i < 4; ++i) {
    std::printf("%-5s motor %zu  rmse %.4f  std %.4f  spike %.4f\n", m.method.c_str(), i + 1, m.motors[i].rmse,
                m.motors[i].std, m.motors[i].max_spike);
  }
}

void write_trace(const fs::path& out, const RunTrace& trace, const MethodMetrics& irls, const MethodMetrics& ekf) {
  write_estimates(out / "estimates.csv", trace.irls);
  write_truth(out / "truth.csv", trace.steps);
  write_ekf(out / "ekf.csv", trace.ekf);
  write_weights(out / "weights.csv", trace.weights);
  write_kkt(out / "kkt_trace.csv", trace.kkt);
  write_metrics(out / "metrics.csv", {irls, ekf});
}

int cmd_run(const Options& o, bool compare) {
  const ScenarioSpec spec = load(o);
  const fs::path out(o.out_dir);
  prepare_out(out);
  const RunTrace trace = run_scenario(spec);
  const MethodMetrics irls = irls_metrics(trace, spec.metrics);
  const MethodMetrics ekf = ekf_metrics(trace, spec.metrics);
  write_trace(out, trace, irls, ekf);
  if (compare) {
    write_compare(out / "metrics_compare.csv", irls, ekf);
  }
  if (!o.quiet) {
    std::printf("%s: %zu steps, %zu estimates\n", spec.name.c_str(), trace.steps.size(), trace.irls.size());
    print_metrics(irls);
    print_metrics(ekf);
  }
  return kOk;
}

int cmd_convergence(const Options& o) {
  const ScenarioSpec spec = load(o);
  const fs::path out(o.out_dir);
  prepare_out(out);
  const ConvergenceResult res = run_convergence(spec);
  write_convergence(out / "convergence.csv", res.rows);
  write_kkt(out / "kkt_trace.csv", res.kkt);
  if (!o.quiet) {
    const Vec4 err = res.estimate.s_hat.eta - res.truth.eta;
    std::printf("%s: %zu newton iterates, final gap %.3g, max error %.3g\n", spec.name.c_str(), res.rows.size() - 1,
                res.estimate.gap, err.cwiseAbs().maxCoeff());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motor efficiency estimation: scenario runner"};
  app.require_subcommand(1);
  Options opts;
  std::string which;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> seed_opts;

  for (const char* name : {"run", "compare", "convergence"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("spec", opts.spec_path, "scenario spec file")->required();
    sub->add_option("--out", opts.out_dir, "output directory")->required();
    seed_opts.push_back(sub->add_option("--seed", seed, "override the spec seed"));
    sub->add_flag("--quiet", opts.quiet, "suppress the summary");
    sub->callback([&which, name] { which = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  for (const CLI::Option* so : seed_opts) {
    if (so->count() > 0) {
      opts.seed = seed;
    }
  }

  try {
    if (which == "convergence") {
      return cmd_convergence(opts);
    }
    return cmd_run(opts, which == "compare");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort at step " << e.step() << ": " << e.what() << '\n';
    return kNumerical;
  } catch (const SolverError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const EkfError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const MetricsError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  }
}
