#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "quadeff/convergence.hpp"
#include "quadeff/scenario.hpp"
#include "quadeff/spec_io.hpp"

namespace quadeff {

// CSV output. Numbers are printed with %.17g so a read-back reproduces the
// double exactly; booleans are 0/1.

namespace csv_header {
inline constexpr const char* estimates = "t,eta1,eta2,eta3,eta4,irls_iters,rejected,gap,converged";
inline constexpr const char* truth = "t,eta1,eta2,eta3,eta4";
inline constexpr const char* ekf = "t,eta1,eta2,eta3,eta4";
inline constexpr const char* weights = "window,t,segment,weight,zscore,rejected";
inline constexpr const char* kkt = "window,irls_iter,newton_iter,r_dual_norm,r_cent_norm,gap,alpha,beta";
inline constexpr const char* metrics = "method,motor,rmse,std,max_spike";
inline constexpr const char* compare =
    "motor,irls_rmse,irls_std,irls_max_spike,ekf_rmse,ekf_std,ekf_max_spike";
inline constexpr const char* convergence =
    "irls_iter,newton_iter,eta1,eta2,eta3,eta4,r_dual_norm,r_cent_norm,gap";
}  // namespace csv_header

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const char* header) : path_(path), out_(path) {
    if (!out_) {
      throw IoError("cannot open " + path.string() + " for writing");
    }
    out_ << header << '\n';
  }

  CsvWriter& operator<<(double x) { return cell(fmt_double(x)); }
  CsvWriter& operator<<(const std::string& s) { return cell(s); }
  CsvWriter& operator<<(const char* s) { return cell(s); }
  CsvWriter& operator<<(bool b) { return cell(b ? "1" : "0"); }
  CsvWriter& operator<<(int v) { return cell(std::to_string(v)); }
  CsvWriter& operator<<(std::size_t v) { return cell(std::to_string(v)); }
  CsvWriter& operator<<(const Vec4& v) {
    for (int i = 0; i < 4; ++i) {
      *this << v(i);
    }
    return *this;
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

  void close() {
    out_.close();
    if (!out_) {
      throw IoError("failed writing " + path_.string());
    }
  }

  ~CsvWriter() = default;

 private:
  CsvWriter& cell(const std::string& s) {
    if (!first_) {
      out_ << ',';
    }
    out_ << s;
    first_ = false;
    return *this;
  }

  std::filesystem::path path_;
  std::ofstream out_;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) {
        return i;
      }
    }
    throw IoError("csv: no column '" + name + "'");
  }
  double number(std::size_t row, const std::string& name) const { return std::stod(rows.at(row).at(column(name))); }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError(path.string() + ": empty file");
  }
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) {
      throw IoError(path.string() + ": ragged row");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_estimates(const std::filesystem::path& path, const std::vector<EstimateRecord>& recs) {
  CsvWriter w(path, csv_header::estimates);
  for (const auto& r : recs) {
    w << r.t << r.s_hat.eta << r.irls_iters << r.rejected << r.gap << r.converged;
    w.end_row();
  }
  w.close();
}

/// Truth at every simulation step (time of the step start).
inline void write_truth(const std::filesystem::path& path, const std::vector<StepRecord>& steps) {
  CsvWriter w(path, csv_header::truth);
  for (const auto& s : steps) {
    w << s.t << s.truth.eta;
    w.end_row();
  }
  w.close();
}

inline void write_ekf(const std::filesystem::path& path, const std::vector<EkfRecord>& recs) {
  CsvWriter w(path, csv_header::ekf);
  for (const auto& r : recs) {
    w << r.t << r.eta.eta;
    w.end_row();
  }
  w.close();
}

inline void write_weights(const std::filesystem::path& path, const std::vector<WeightRow>& rows) {
  CsvWriter w(path, csv_header::weights);
  for (const auto& r : rows) {
    w << r.window << r.t << r.segment << r.weight << r.zscore << r.rejected;
    w.end_row();
  }
  w.close();
}

inline void write_kkt(const std::filesystem::path& path, const std::vector<KktRow>& rows) {
  CsvWriter w(path, csv_header::kkt);
  for (const auto& r : rows) {
    w << r.window << r.irls_iter << r.record.iteration << r.record.r_dual_norm << r.record.r_cent_norm
      << r.record.gap << r.record.alpha << r.record.beta;
    w.end_row();
  }
  w.close();
}

inline void write_metrics(const std::filesystem::path& path, const std::vector<MethodMetrics>& methods) {
  CsvWriter w(path, csv_header::metrics);
  for (const auto& m : methods) {
    for (std::size_t i = 0; i < 4; ++i) {
      w << m.method << (i + 1) << m.motors[i].rmse << m.motors[i].std << m.motors[i].max_spike;
      w.end_row();
    }
  }
  w.close();
}

inline void write_compare(const std::filesystem::path& path, const MethodMetrics& irls, const MethodMetrics& ekf) {
  CsvWriter w(path, csv_header::compare);
  for (std::size_t i = 0; i < 4; ++i) {
    w << (i + 1) << irls.motors[i].rmse << irls.motors[i].std << irls.motors[i].max_spike << ekf.motors[i].rmse
      << ekf.motors[i].std << ekf.motors[i].max_spike;
    w.end_row();
  }
  w.close();
}

inline void write_convergence(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows) {
  CsvWriter w(path, csv_header::convergence);
  for (const auto& r : rows) {
    w << r.irls_iter << r.newton_iter << r.s << r.r_dual_norm << r.r_cent_norm << r.gap;
    w.end_row();
  }
  w.close();
}

}  // namespace quadeff
