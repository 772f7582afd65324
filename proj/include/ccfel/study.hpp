#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccfel/el_estimator.hpp"
#include "ccfel/errors.hpp"
#include "ccfel/likelihood.hpp"
#include "ccfel/model.hpp"
#include "ccfel/parallel.hpp"
#include "ccfel/path.hpp"
#include "ccfel/rng.hpp"
#include "ccfel/simulate.hpp"
#include "ccfel/spec_test.hpp"

namespace ccfel {

using json = nlohmann::json;

/// Parameter values of the simulation designs.
inline std::vector<double> reference_theta(ModelKind kind) {
  switch (kind) {
    case ModelKind::VSK: return {0.858, 0.089, 0.047};
    case ModelKind::CIR: return {0.892, 0.091, 0.181};
    case ModelKind::VSK_MJ: return {0.858, 0.089, 0.047, 2.0, 0.067};
    case ModelKind::IG_OU: return {10.0, 1.0, 20.0};
    case ModelKind::BI_OU: return {0.22, 0.2, 0.5, 0.08, 0.09, 0.09, 0.17};
  }
  return {};
}

/// Parses "k=v,k=v" against the model's parameter names; unnamed
/// parameters keep their value in `base`.
inline std::vector<double> parse_theta(ModelKind kind, const std::string& text, std::vector<double> base) {
  const auto& names = parameter_names(kind);
  if (base.size() != names.size()) base = reference_theta(kind);
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--theta expects k=v pairs, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) throw ConfigError("unknown parameter '" + key + "' for " + std::string(to_string(kind)));
    try {
      std::size_t used = 0;
      const std::string val = item.substr(eq + 1);
      base[static_cast<std::size_t>(it - names.begin())] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ConfigError("bad value in '" + item + "'");
    }
  }
  return base;
}

enum class Command { Simulate, Estimate, Test, McStudy, CaseStudy };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Estimate: return "estimate";
    case Command::Test: return "test";
    case Command::McStudy: return "mc-study";
    case Command::CaseStudy: return "case-study";
  }
  return "?";
}

struct StudyConfig {
  Command command = Command::McStudy;
  ModelKind model = ModelKind::VSK;
  std::optional<ModelKind> null_model;
  std::vector<double> theta;
  std::size_t n = 500;
  double delta = 1.0 / 12.0;
  std::size_t reps = 100;
  std::size_t bootstrap = 0;  // B; 0 disables testing in mc-study
  double alpha = 0.05;
  std::vector<double> bandwidths;  // empty: CV reference times the default multipliers
  std::optional<std::uint64_t> seed;
  std::string in;
  std::string out;
  std::vector<Estimator> estimators;
  bool force = false;
  unsigned workers = 0;  // 0: CCF_EL_THREADS or hardware
};

/// Everything that determines the outputs (paths and force excluded).
inline json config_json(const StudyConfig& c) {
  json j;
  j["command"] = std::string(to_string(c.command));
  j["model"] = std::string(to_string(c.model));
  j["null_model"] = c.null_model ? json(std::string(to_string(*c.null_model))) : json(nullptr);
  j["theta"] = c.theta;
  j["n"] = c.n;
  j["delta"] = c.delta;
  j["reps"] = c.reps;
  j["bootstrap"] = c.bootstrap;
  j["alpha"] = c.alpha;
  j["bandwidths"] = c.bandwidths;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  std::vector<std::string> est;
  for (auto e : c.estimators) est.emplace_back(to_string(e));
  j["estimators"] = est;
  if (!c.in.empty()) j["input"] = std::filesystem::path(c.in).filename().string();
  return j;
}

/// FNV-1a 64 of the canonical config dump, as 16 hex digits.
inline std::string config_hash(const StudyConfig& c) {
  const std::string s = config_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

/// Refuses to replace an artifact produced by a different config unless
/// forced.
inline void guard_overwrite(const StudyConfig& c) {
  if (c.out.empty() || c.force) return;
  const std::string mp = manifest_path(c.out);
  if (!std::filesystem::exists(c.out) && !std::filesystem::exists(mp)) return;
  std::ifstream is(mp);
  if (!is) throw ConfigError("'" + c.out + "' exists without a manifest; pass --force to overwrite");
  json old;
  try {
    is >> old;
  } catch (const std::exception&) {
    throw ConfigError("unreadable manifest '" + mp + "'; pass --force to overwrite");
  }
  if (old.value("config_hash", std::string()) != config_hash(c)) {
    throw ConfigError("'" + c.out + "' was produced by a different config; pass --force to overwrite");
  }
}

inline void write_text(const std::string& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot open '" + file + "' for writing");
  os << text;
}

inline void write_manifest(const StudyConfig& c, const std::vector<std::string>& outputs, double wall_seconds) {
  json m;
  m["config"] = config_json(c);
  m["config_hash"] = config_hash(c);
  m["outputs"] = outputs;
  m["wall_time_seconds"] = wall_seconds;
  write_text(manifest_path(c.out), m.dump(2) + "\n");
}

inline std::string fmt(double v) { return detail::format_double(v); }

inline json grid_summary(const FrequencyGrid& g) {
  return {{"nodes", g.size()},
          {"mode", g.mode == GridMode::Estimate ? "estimate" : "test"},
          {"u_max", std::vector<double>(g.u_max.begin(), g.u_max.begin() + g.dim)},
          {"r_max", std::vector<double>(g.r_max.begin(), g.r_max.begin() + g.dim)}};
}

inline json theta_json(ModelKind kind, const std::vector<double>& v) {
  json j = json::object();
  const auto& names = parameter_names(kind);
  for (std::size_t i = 0; i < v.size() && i < names.size(); ++i) j[names[i]] = v[i];
  return j;
}

inline json to_json(const EstimateResult& r, const FrequencyGrid* grid = nullptr) {
  json j;
  j["method"] = "el";
  j["model"] = std::string(to_string(r.kind));
  j["theta_hat"] = theta_json(r.kind, r.theta_hat);
  j["standard_errors"] = theta_json(r.kind, r.standard_errors());
  j["el_value"] = r.el_value;
  j["q2n_norm"] = r.q2n_norm;
  j["infeasible_nodes"] = r.infeasible;
  j["evaluations"] = r.evaluations;
  if (grid) j["grid"] = grid_summary(*grid);
  return j;
}

inline json to_json(const LogLikResult& r) {
  json j;
  j["method"] = std::string(to_string(r.method));
  j["model"] = std::string(to_string(r.kind));
  j["theta_hat"] = theta_json(r.kind, r.theta_hat);
  j["standard_errors"] = theta_json(r.kind, r.hessian_se);
  j["loglik"] = r.loglik;
  j["evaluations"] = r.evaluations;
  return j;
}

inline json to_json(const TestResult& r) {
  json j;
  j["null_model"] = std::string(to_string(r.null_kind));
  j["theta_hat"] = theta_json(r.null_kind, r.theta_hat);
  j["bandwidths"] = r.observed.bandwidths;
  j["statistics"] = r.observed.raw;
  j["standardized"] = r.observed.standardized;
  j["t_n"] = r.observed.t_n;
  j["p_value"] = r.p_value;
  j["p_values"] = r.p_values;
  j["critical"] = r.critical;
  j["criticals"] = r.criticals;
  j["reject"] = r.reject;
  j["reject_by_p"] = r.reject_by_p;
  j["alpha"] = r.alpha;
  j["bootstrap"] = r.replicates;
  j["failures"] = r.failures;
  j["seed"] = r.seed;
  j["stream_base"] = r.stream_base;
  json stars = json::array();
  for (double v : r.t_star) stars.push_back(std::isnan(v) ? json(nullptr) : json(v));
  j["t_star"] = stars;
  j["skipped_cells"] = r.observed.skipped;
  j["cells"] = r.observed.cells;
  return j;
}

/// Plot data: one row per bandwidth plus an overall row.
inline std::string test_plot_csv(const TestResult& r) {
  std::ostringstream os;
  os << "bandwidth,statistic,bootstrap_q95\n";
  for (std::size_t i = 0; i < r.observed.bandwidths.size(); ++i)
    os << fmt(r.observed.bandwidths[i]) << ',' << fmt(r.observed.standardized[i]) << ',' << fmt(r.criticals[i]) << '\n';
  os << "overall," << fmt(r.observed.t_n) << ',' << fmt(r.critical) << '\n';
  return os.str();
}

/// Stream layout: replicate r draws its data from stream r << 24 and its
/// bootstrap resamples from the streams right after it.
inline std::uint64_t replicate_stream(std::size_t rep) { return static_cast<std::uint64_t>(rep) << 24; }

inline std::vector<Estimator> default_estimators(ModelKind kind) {
  std::vector<Estimator> e{Estimator::EL};
  if (kind == ModelKind::VSK_MJ) e.push_back(Estimator::AMLE);
  else if (kind != ModelKind::IG_OU) e.push_back(Estimator::MLE);
  return e;
}

/// Throws ConfigError when the estimator is not defined for the model.
inline void check_estimator(ModelKind kind, Estimator e) {
  if (e == Estimator::EL) return;
  if (kind == ModelKind::IG_OU) throw ConfigError("no likelihood baseline for igou");
  if (e == Estimator::AMLE && kind != ModelKind::VSK_MJ) throw ConfigError("amle applies to vskmj only");
  if (e == Estimator::MLE && kind == ModelKind::VSK_MJ) throw ConfigError("vskmj has no exact mle; use amle");
}

struct ReplicateOutcome {
  std::map<Estimator, std::vector<double>> theta;  // missing key: that fit failed
  std::map<Estimator, std::vector<double>> se;
  std::map<Estimator, std::string> failure;
  std::optional<TestResult> test;
  std::string test_failure;
};

struct EstimatorSummary {
  Estimator method = Estimator::EL;
  std::size_t successes = 0;
  std::vector<double> mean, sd, mean_se;
};

struct McReport {
  StudyConfig config;
  std::vector<ReplicateOutcome> replicates;
  std::vector<EstimatorSummary> summaries;
  std::map<std::string, std::size_t> failures;  // exception taxonomy
  std::size_t tests = 0;
  std::size_t rejections = 0;             // order-statistic rule
  std::size_t rejections_by_p = 0;
  std::vector<std::size_t> bandwidth_rejections;  // per-bandwidth p <= alpha

  double rejection_rate() const { return tests ? static_cast<double>(rejections) / static_cast<double>(tests) : 0.0; }
};

namespace detail {

inline std::string failure_kind(const std::exception& e) {
  if (dynamic_cast<const ConvexHullError*>(&e)) return "ConvexHullError";
  if (dynamic_cast<const MaxIterError*>(&e)) return "MaxIterError";
  if (dynamic_cast<const DegenerateError*>(&e)) return "DegenerateError";
  if (dynamic_cast<const OptimizerError*>(&e)) return "OptimizerError";
  if (dynamic_cast<const SingularError*>(&e)) return "SingularError";
  if (dynamic_cast<const BootstrapError*>(&e)) return "BootstrapError";
  if (dynamic_cast<const DataError*>(&e)) return "DataError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  return "Error";
}

inline std::vector<double> fit_initial(ModelKind kind, const SamplePath& path) {
  auto init = initial_guess(kind, path);
  if (!is_admissible(ModelSpec{kind, init, path.delta})) init = reference_theta(kind);
  return init;
}

}  // namespace detail

/// One replicate: simulate, fit with each estimator and optionally run the
/// bootstrap test. Fit failures are recorded, not thrown.
inline ReplicateOutcome run_replicate(const StudyConfig& c, std::size_t rep, bool standard_errors = true) {
  ReplicateOutcome out;
  const ModelSpec truth{c.model, c.theta, c.delta};
  Philox rng(*c.seed, replicate_stream(rep));
  const auto path = simulate_path(truth, c.n, rng);
  const auto init = detail::fit_initial(c.model, path);
  for (auto est : c.estimators) {
    try {
      if (est == Estimator::EL) {
        EstimateOptions opt;
        opt.covariance = standard_errors;
        opt.diagnostics = false;
        const auto grid = build_grid(path, c.model, GridMode::Estimate);
        const auto r = minimize_el(c.model, path, grid, init, opt);
        out.theta[est] = r.theta_hat;
        if (standard_errors) out.se[est] = r.standard_errors();
      } else {
        const auto r = mle_fit(c.model, path, init, standard_errors);
        out.theta[est] = r.theta_hat;
        if (standard_errors) out.se[est] = r.hessian_se;
      }
    } catch (const NumericalError& e) {
      out.failure[est] = detail::failure_kind(e);
    }
  }
  if (c.bootstrap > 0 && c.null_model) {
    BootstrapOptions o;
    o.replicates = c.bootstrap;
    o.alpha = c.alpha;
    o.bandwidths = c.bandwidths;
    o.seed = *c.seed;
    o.stream_base = replicate_stream(rep);
    o.workers = 1;
    try {
      out.test = bootstrap_test(*c.null_model, path, o);
    } catch (const NumericalError& e) {
      out.test_failure = detail::failure_kind(e);
    } catch (const DataError& e) {
      out.test_failure = detail::failure_kind(e);
    }
  }
  return out;
}

/// R replicates of simulate -> estimate (-> test), aggregated per
/// estimator. Deterministic given the seed whatever the worker count.
/// Throws NumericalError when more than 5% of replicates fail.
inline McReport run_mc_study(StudyConfig c, bool standard_errors = true) {
  if (!c.seed) throw ConfigError("mc-study requires --seed");
  if (c.theta.empty()) c.theta = reference_theta(c.model);
  validate(ModelSpec{c.model, c.theta, c.delta});
  if (c.estimators.empty()) c.estimators = default_estimators(c.model);
  for (auto e : c.estimators) check_estimator(c.model, e);
  if (c.reps == 0) throw ConfigError("--reps must be positive");
  McReport rep;
  rep.config = c;
  rep.replicates.resize(c.reps);
  const unsigned workers = c.workers ? c.workers : worker_count();
  parallel_for(
      c.reps, [&](std::size_t r) { rep.replicates[r] = run_replicate(c, r, standard_errors); }, workers);

  std::size_t failed_reps = 0;
  for (const auto& o : rep.replicates) {
    bool failed = !o.failure.empty() || !o.test_failure.empty();
    for (const auto& [est, kind] : o.failure) rep.failures[kind] += 1;
    if (!o.test_failure.empty()) rep.failures[o.test_failure] += 1;
    failed_reps += failed ? 1 : 0;
  }
  if (20 * failed_reps > c.reps) {
    std::string tax;
    for (const auto& [k, v] : rep.failures) tax += " " + k + "=" + std::to_string(v);
    throw NumericalError("mc-study: " + std::to_string(failed_reps) + " of " + std::to_string(c.reps) +
                         " replicates failed:" + tax);
  }

  const std::size_t p = c.theta.size();
  for (auto est : c.estimators) {
    EstimatorSummary s;
    s.method = est;
    s.mean.assign(p, 0.0);
    s.sd.assign(p, 0.0);
    s.mean_se.assign(p, 0.0);
    std::size_t se_count = 0;
    for (const auto& o : rep.replicates) {
      auto it = o.theta.find(est);
      if (it == o.theta.end()) continue;
      ++s.successes;
      for (std::size_t i = 0; i < p; ++i) s.mean[i] += it->second[i];
      if (auto se = o.se.find(est); se != o.se.end()) {
        ++se_count;
        for (std::size_t i = 0; i < p; ++i) s.mean_se[i] += se->second[i];
      }
    }
    for (std::size_t i = 0; i < p; ++i) {
      s.mean[i] /= static_cast<double>(std::max<std::size_t>(s.successes, 1));
      s.mean_se[i] = se_count ? s.mean_se[i] / static_cast<double>(se_count) : std::nan("");
    }
    for (const auto& o : rep.replicates) {
      auto it = o.theta.find(est);
      if (it == o.theta.end()) continue;
      for (std::size_t i = 0; i < p; ++i) s.sd[i] += (it->second[i] - s.mean[i]) * (it->second[i] - s.mean[i]);
    }
    for (std::size_t i = 0; i < p; ++i)
      s.sd[i] = s.successes > 1 ? std::sqrt(s.sd[i] / static_cast<double>(s.successes - 1)) : 0.0;
    rep.summaries.push_back(s);
  }
  for (const auto& o : rep.replicates) {
    if (!o.test) continue;
    ++rep.tests;
    rep.rejections += o.test->reject ? 1 : 0;
    rep.rejections_by_p += o.test->reject_by_p ? 1 : 0;
    if (rep.bandwidth_rejections.empty()) rep.bandwidth_rejections.assign(o.test->p_values.size(), 0);
    for (std::size_t i = 0; i < o.test->p_values.size() && i < rep.bandwidth_rejections.size(); ++i)
      rep.bandwidth_rejections[i] += o.test->p_values[i] <= c.alpha ? 1 : 0;
  }
  return rep;
}

/// Table-shaped CSV: one row per estimator, mean and Monte Carlo SD per
/// parameter.
inline std::string mc_table_csv(const McReport& r) {
  const auto& names = parameter_names(r.config.model);
  std::ostringstream os;
  os << "model,n,estimator,successes";
  for (const auto& nm : names) os << ',' << nm << ',' << nm << "_sd," << nm << "_se";
  os << '\n';
  for (const auto& s : r.summaries) {
    os << to_string(r.config.model) << ',' << r.config.n << ',' << to_string(s.method) << ',' << s.successes;
    for (std::size_t i = 0; i < names.size(); ++i) os << ',' << fmt(s.mean[i]) << ',' << fmt(s.sd[i]) << ',' << fmt(s.mean_se[i]);
    os << '\n';
  }
  return os.str();
}

inline std::string mc_replicates_csv(const McReport& r) {
  const auto& names = parameter_names(r.config.model);
  std::ostringstream os;
  os << "replicate,estimator,status";
  for (const auto& nm : names) os << ',' << nm;
  os << '\n';
  for (std::size_t k = 0; k < r.replicates.size(); ++k) {
    const auto& o = r.replicates[k];
    for (auto est : r.config.estimators) {
      os << (k + 1) << ',' << to_string(est) << ',';
      if (auto it = o.theta.find(est); it != o.theta.end()) {
        os << "ok";
        for (double v : it->second) os << ',' << fmt(v);
      } else {
        os << o.failure.at(est);
        for (std::size_t i = 0; i < names.size(); ++i) os << ',';
      }
      os << '\n';
    }
  }
  return os.str();
}

inline json to_json(const McReport& r) {
  json j;
  j["config"] = config_json(r.config);
  j["config_hash"] = config_hash(r.config);
  json sums = json::array();
  for (const auto& s : r.summaries) {
    sums.push_back({{"estimator", std::string(to_string(s.method))},
                    {"successes", s.successes},
                    {"mean", theta_json(r.config.model, s.mean)},
                    {"sd", theta_json(r.config.model, s.sd)},
                    {"mean_se", theta_json(r.config.model, s.mean_se)}});
  }
  j["summaries"] = sums;
  j["failures"] = r.failures;
  if (r.tests) {
    j["test"] = {{"null_model", std::string(to_string(*r.config.null_model))},
                 {"tests", r.tests},
                 {"rejections", r.rejections},
                 {"rejections_by_p", r.rejections_by_p},
                 {"rejection_rate", r.rejection_rate()},
                 {"bandwidth_rejections", r.bandwidth_rejections}};
  }
  return j;
}

/// Fits of one model to the case-study data.
struct CaseModelReport {
  ModelKind kind = ModelKind::VSK;
  std::optional<EstimateResult> el;
  std::optional<LogLikResult> likelihood;
  std::optional<TestResult> test;
  std::string failure;
};

struct CaseReport {
  StudyConfig config;
  PathSummary summary;
  double cv_bandwidth = 0.0;
  std::vector<double> bandwidths;
  std::vector<CaseModelReport> models;
};

/// Fits the four univariate models by EL (and MLE/AMLE where defined) and
/// runs the bootstrap test for each over one bandwidth set.
inline CaseReport run_case_study(const StudyConfig& c, const SamplePath& data,
                                 const std::vector<ModelKind>& kinds = {ModelKind::VSK, ModelKind::CIR,
                                                                        ModelKind::VSK_MJ, ModelKind::IG_OU}) {
  if (!c.seed) throw ConfigError("case-study requires --seed");
  if (c.bootstrap < 99) throw ConfigError("case-study needs --bootstrap >= 99");
  CaseReport rep;
  rep.config = c;
  rep.summary = summarize(data);
  rep.cv_bandwidth = cv_bandwidth(data);
  rep.bandwidths = c.bandwidths.empty() ? BandwidthSet{rep.cv_bandwidth, default_bandwidth_multipliers()}.values()
                                        : c.bandwidths;
  rep.models.resize(kinds.size());
  const unsigned workers = c.workers ? c.workers : worker_count();
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    auto& m = rep.models[k];
    m.kind = kinds[k];
    try {
      const auto init = detail::fit_initial(m.kind, data);
      const auto grid = build_grid(data, m.kind, GridMode::Estimate);
      EstimateOptions eo;
      try {
        m.el = minimize_el(m.kind, data, grid, init, eo);
      } catch (const SingularError&) {
        eo.covariance = false;
        m.el = minimize_el(m.kind, data, grid, init, eo);
      }
      if (m.kind != ModelKind::IG_OU) {
        try {
          m.likelihood = mle_fit(m.kind, data, init, true);
        } catch (const SingularError&) {
          m.likelihood = mle_fit(m.kind, data, init, false);
        }
      }
      BootstrapOptions o;
      o.replicates = c.bootstrap;
      o.alpha = c.alpha;
      o.bandwidths = rep.bandwidths;
      o.seed = *c.seed;
      o.stream_base = replicate_stream(k);
      o.workers = workers;
      o.theta_hat = m.el->theta_hat;
      m.test = bootstrap_test(m.kind, data, o);
    } catch (const NumericalError& e) {
      m.failure = std::string(detail::failure_kind(e)) + ": " + e.what();
    }
  }
  return rep;
}

inline std::string case_estimates_csv(const CaseReport& r) {
  std::ostringstream os;
  os << "model,estimator,parameter,estimate,se\n";
  for (const auto& m : r.models) {
    const auto& names = parameter_names(m.kind);
    if (m.likelihood) {
      for (std::size_t i = 0; i < names.size(); ++i)
        os << to_string(m.kind) << ',' << to_string(m.likelihood->method) << ',' << names[i] << ','
           << fmt(m.likelihood->theta_hat[i]) << ','
           << (m.likelihood->hessian_se.empty() ? std::string() : fmt(m.likelihood->hessian_se[i])) << '\n';
    }
    if (m.el) {
      const auto se = m.el->standard_errors();
      for (std::size_t i = 0; i < names.size(); ++i)
        os << to_string(m.kind) << ",el," << names[i] << ',' << fmt(m.el->theta_hat[i]) << ','
           << (se.empty() ? std::string() : fmt(se[i])) << '\n';
    }
  }
  return os.str();
}

inline std::string case_tests_csv(const CaseReport& r) {
  std::ostringstream os;
  os << "model,bandwidth,statistic,standardized,critical,p_value\n";
  for (const auto& m : r.models) {
    if (!m.test) continue;
    const auto& t = *m.test;
    for (std::size_t i = 0; i < t.observed.bandwidths.size(); ++i)
      os << to_string(m.kind) << ',' << fmt(t.observed.bandwidths[i]) << ',' << fmt(t.observed.raw[i]) << ','
         << fmt(t.observed.standardized[i]) << ',' << fmt(t.criticals[i]) << ',' << fmt(t.p_values[i]) << '\n';
    os << to_string(m.kind) << ",overall,," << fmt(t.observed.t_n) << ',' << fmt(t.critical) << ','
       << fmt(t.p_value) << '\n';
  }
  return os.str();
}

inline json to_json(const CaseReport& r) {
  json j;
  j["config"] = config_json(r.config);
  j["config_hash"] = config_hash(r.config);
  j["summary"] = {{"mean", r.summary.mean},
                  {"sd", r.summary.sd},
                  {"diff_mean", r.summary.diff_mean},
                  {"diff_sd", r.summary.diff_sd}};
  j["cv_bandwidth"] = r.cv_bandwidth;
  j["bandwidths"] = r.bandwidths;
  json models = json::array();
  for (const auto& m : r.models) {
    json mj;
    mj["model"] = std::string(to_string(m.kind));
    if (m.el) mj["el"] = to_json(*m.el);
    if (m.likelihood) mj["likelihood"] = to_json(*m.likelihood);
    if (m.test) mj["test"] = to_json(*m.test);
    if (!m.failure.empty()) mj["failure"] = m.failure;
    models.push_back(mj);
  }
  j["models"] = models;
  return j;
}

}  // namespace ccfel
