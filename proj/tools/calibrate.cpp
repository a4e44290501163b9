// Finds the EKF efficiency random-walk density whose pooled RMSE matches the
// window estimator on a given scenario. The result is meant to be frozen
// into the spec files by hand.
//
//   quadeff_calibrate <spec> [--lo Q] [--hi Q] [--refine N]

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "quadeff/scenario.hpp"
#include "quadeff/spec_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Calibrate the EKF efficiency process noise"};
  std::string path;
  double lo = 1e-8;
  double hi = 1.0;
  int refine = 12;
  app.add_option("spec", path, "scenario spec file")->required();
  app.add_option("--lo", lo, "lower end of the log grid");
  app.add_option("--hi", hi, "upper end of the log grid");
  app.add_option("--refine", refine, "bisection steps");
  CLI11_PARSE(app, argc, argv);

  try {
    const quadeff::ScenarioSpec spec = quadeff::load_scenario(path);
    const quadeff::Calibration c = quadeff::calibrate_ekf(spec, lo, hi, refine);
    std::printf("q_eta %.6g  irls_rmse %.6g  ekf_rmse %.6g  ratio %.4f\n", c.q_eta, c.irls_rmse, c.ekf_rmse, c.ratio());
  } catch (const quadeff::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
