#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ccfel/errors.hpp"
#include "ccfel/model.hpp"

namespace ccfel {

/// Observations X_1..X_n sampled every `delta` years.
struct SamplePath {
  int dim = 1;
  double delta = 1.0 / 12.0;
  std::uint64_t seed = 0;
  std::vector<State> obs;

  std::size_t size() const { return obs.size(); }
  const State& operator[](std::size_t t) const { return obs[t]; }

  /// First coordinate as a flat vector (univariate models).
  std::vector<double> first_coordinate() const {
    std::vector<double> v(obs.size());
    for (std::size_t t = 0; t < obs.size(); ++t) v[t] = obs[t][0];
    return v;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != ' ' && c != '\t') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Writes `t,x` (or `t,x1,x2`) with 1-based integer t and 17 significant digits.
inline void write_csv(const SamplePath& path, std::ostream& os) {
  os << (path.dim == 2 ? "t,x1,x2\n" : "t,x\n");
  for (std::size_t t = 0; t < path.size(); ++t) {
    os << (t + 1) << ',' << detail::format_double(path.obs[t][0]);
    if (path.dim == 2) os << ',' << detail::format_double(path.obs[t][1]);
    os << '\n';
  }
}

inline void write_csv(const SamplePath& path, const std::string& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot open '" + file + "' for writing");
  write_csv(path, os);
}

inline SamplePath read_csv(std::istream& is, double delta = 1.0 / 12.0) {
  SamplePath path;
  path.delta = delta;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  long long prev_t = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cols = detail::split_csv_line(line);
    if (!have_header) {
      if (cols.size() == 2 && cols[0] == "t" && cols[1] == "x") {
        path.dim = 1;
      } else if (cols.size() == 3 && cols[0] == "t" && cols[1] == "x1" && cols[2] == "x2") {
        path.dim = 2;
      } else {
        throw ParseError("expected header 't,x' or 't,x1,x2'", lineno);
      }
      have_header = true;
      continue;
    }
    if (cols.size() != static_cast<std::size_t>(path.dim + 1)) {
      throw ParseError("expected " + std::to_string(path.dim + 1) + " columns", lineno);
    }
    char* end = nullptr;
    const long long t = std::strtoll(cols[0].c_str(), &end, 10);
    if (cols[0].empty() || *end != '\0') throw ParseError("t is not an integer: '" + cols[0] + "'", lineno);
    if (!path.obs.empty()) {
      if (t <= prev_t) throw ParseError("t must be strictly increasing", lineno);
      if (t != prev_t + 1) {
        throw GapError("missing t=" + std::to_string(prev_t + 1) + " before t=" + std::to_string(t), lineno);
      }
    }
    prev_t = t;
    State x{0.0, 0.0};
    for (int k = 0; k < path.dim; ++k) {
      const std::string& cell = cols[static_cast<std::size_t>(k) + 1];
      x[static_cast<std::size_t>(k)] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0' || !std::isfinite(x[static_cast<std::size_t>(k)])) {
        throw ParseError("bad value '" + cell + "'", lineno);
      }
    }
    path.obs.push_back(x);
  }
  if (!have_header) throw ParseError("empty file", lineno);
  if (path.obs.size() < 2) throw DataError("need at least 2 observations");
  return path;
}

/// Loads a sample path from CSV; delta comes from the caller (default monthly).
inline SamplePath ingest_csv(const std::string& file, double delta = 1.0 / 12.0) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open '" + file + "'");
  return read_csv(is, delta);
}

struct PathSummary {
  double mean = 0.0;
  double sd = 0.0;
  double diff_mean = 0.0;
  double diff_sd = 0.0;
};

inline PathSummary summarize(const SamplePath& path, int coord = 0) {
  const std::size_t n = path.size();
  PathSummary s;
  auto k = static_cast<std::size_t>(coord);
  for (const auto& x : path.obs) s.mean += x[k];
  s.mean /= static_cast<double>(n);
  for (const auto& x : path.obs) s.sd += (x[k] - s.mean) * (x[k] - s.mean);
  s.sd = std::sqrt(s.sd / static_cast<double>(n - 1));
  if (n >= 3) {
    for (std::size_t t = 1; t < n; ++t) s.diff_mean += path.obs[t][k] - path.obs[t - 1][k];
    s.diff_mean /= static_cast<double>(n - 1);
    for (std::size_t t = 1; t < n; ++t) {
      const double d = path.obs[t][k] - path.obs[t - 1][k] - s.diff_mean;
      s.diff_sd += d * d;
    }
    s.diff_sd = std::sqrt(s.diff_sd / static_cast<double>(n - 2));
  }
  return s;
}

}  // namespace ccfel
