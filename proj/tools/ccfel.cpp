// Command-line front end.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccfel/ccfel.hpp"

namespace {

using namespace ccfel;

struct Flags {
  std::string model, null_model, theta, bandwidths = "auto", estimator, in, out;
  std::size_t n = 500, reps = 100, bootstrap = 0;
  double delta = 1.0 / 12.0, alpha = 0.05;
  std::uint64_t seed = 0;
  bool force = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_bandwidths(const std::string& s) {
  if (s.empty() || s == "auto") return {};
  std::vector<double> out;
  for (const auto& item : split(s, ',')) {
    try {
      std::size_t used = 0;
      const double h = std::stod(item, &used);
      if (used != item.size() || !(h > 0.0)) throw std::invalid_argument(item);
      out.push_back(h);
    } catch (const std::exception&) {
      throw ConfigError("--bandwidths: bad value '" + item + "'");
    }
  }
  return out;
}

/// `dir/name.ext` -> `dir/name<suffix>`.
std::string sibling(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  p.replace_extension();
  return p.string() + suffix;
}

StudyConfig make_config(Command cmd, const Flags& f, const CLI::App& sub) {
  StudyConfig c;
  c.command = cmd;
  if (!f.model.empty()) c.model = parse_model_kind(f.model);
  if (!f.null_model.empty()) c.null_model = parse_model_kind(f.null_model);
  c.n = f.n;
  c.delta = f.delta;
  c.reps = f.reps;
  c.bootstrap = f.bootstrap;
  c.alpha = f.alpha;
  c.bandwidths = parse_bandwidths(f.bandwidths);
  if (sub.count("--seed")) c.seed = f.seed;
  c.in = f.in;
  c.out = f.out;
  c.force = f.force;
  for (const auto& e : split(f.estimator, ',')) c.estimators.push_back(parse_estimator(e));
  if (!c.in.empty() && !std::filesystem::is_regular_file(c.in))
    throw ConfigError("input file '" + c.in + "' does not exist");
  if (!c.out.empty()) {
    const auto parent = std::filesystem::path(c.out).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
      throw ConfigError("output directory '" + parent.string() + "' does not exist");
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("--alpha must be in (0, 1)");
  if (!(c.delta > 0.0)) throw ConfigError("--delta must be positive");
  return c;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

/// Writes the artifacts (or the primary one to stdout) and the manifest.
class Emitter {
 public:
  explicit Emitter(const StudyConfig& c) : c_(c), start_(std::chrono::steady_clock::now()) { guard_overwrite(c_); }

  void primary(const std::string& text) {
    if (c_.out.empty()) {
      std::cout << text;
      return;
    }
    write_text(c_.out, text);
    files_.push_back(c_.out);
  }
  void secondary(const std::string& suffix, const std::string& text) {
    if (c_.out.empty()) return;
    const auto file = sibling(c_.out, suffix);
    write_text(file, text);
    files_.push_back(file);
  }
  void finish() {
    if (c_.out.empty()) return;
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start_;
    write_manifest(c_, files_, wall.count());
  }

 private:
  StudyConfig c_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> files_;
};

std::string dump(json j, const StudyConfig& c) {
  j["config_hash"] = config_hash(c);
  if (c.seed) j["seed"] = *c.seed;
  return j.dump(2) + "\n";
}

int cmd_simulate(StudyConfig c, const Flags& f) {
  require(!f.model.empty(), "simulate: --model is required");
  require(c.n >= 2, "simulate: --n must be >= 2");
  if (!c.seed) c.seed = 0;
  c.theta = parse_theta(c.model, f.theta, reference_theta(c.model));
  Emitter out(c);
  Philox rng(*c.seed, 0);
  const auto path = simulate_path(ModelSpec{c.model, c.theta, c.delta}, c.n, rng);
  std::ostringstream os;
  write_csv(path, os);
  out.primary(os.str());
  out.finish();
  return 0;
}

int cmd_estimate(StudyConfig c, const Flags& f) {
  require(!c.in.empty(), "estimate: --in is required");
  require(!f.model.empty(), "estimate: --model is required");
  if (c.estimators.empty()) c.estimators = {Estimator::EL};
  for (auto e : c.estimators) check_estimator(c.model, e);
  const auto data = ingest_csv(c.in, c.delta);
  Emitter out(c);
  json results = json::array();
  for (auto e : c.estimators) {
    if (e == Estimator::EL) {
      const auto grid = build_grid(data, c.model, GridMode::Estimate);
      const auto r = minimize_el(c.model, data, grid, initial_guess(c.model, data), EstimateOptions{});
      results.push_back(to_json(r, &grid));
    } else {
      results.push_back(to_json(mle_fit(c.model, data, initial_guess(c.model, data))));
    }
  }
  json j;
  j["config"] = config_json(c);
  j["n"] = data.size();
  j["results"] = results;
  out.primary(dump(j, c));
  out.finish();
  return 0;
}

int cmd_test(StudyConfig c, const Flags& f) {
  require(!c.in.empty(), "test: --in is required");
  require(!f.null_model.empty(), "test: --null-model is required");
  if (c.bootstrap == 0) c.bootstrap = 99;
  if (!c.seed) c.seed = 0;
  const auto data = ingest_csv(c.in, c.delta);
  Emitter out(c);
  BootstrapOptions o;
  o.replicates = c.bootstrap;
  o.alpha = c.alpha;
  o.bandwidths = c.bandwidths;
  o.seed = *c.seed;
  o.workers = worker_count();
  const auto r = bootstrap_test(*c.null_model, data, o);
  json j = to_json(r);
  j["config"] = config_json(c);
  out.primary(dump(j, c));
  out.secondary(".plot.csv", test_plot_csv(r));
  out.finish();
  return 0;
}

int cmd_mc_study(StudyConfig c, const Flags& f) {
  require(!f.model.empty(), "mc-study: --model is required");
  require(c.seed.has_value(), "mc-study: --seed is required");
  require(c.bootstrap == 0 || c.null_model.has_value(), "mc-study: --bootstrap needs --null-model");
  require(!c.null_model || c.bootstrap >= 99, "mc-study: --null-model needs --bootstrap >= 99");
  c.theta = parse_theta(c.model, f.theta, reference_theta(c.model));
  if (c.estimators.empty()) c.estimators = default_estimators(c.model);
  Emitter out(c);
  const auto rep = run_mc_study(c);
  out.primary(mc_table_csv(rep));
  out.secondary(".replicates.csv", mc_replicates_csv(rep));
  out.secondary(".json", dump(to_json(rep), rep.config));
  out.finish();
  return 0;
}

int cmd_case_study(StudyConfig c, const Flags&) {
  require(!c.in.empty(), "case-study: --in is required");
  require(c.seed.has_value(), "case-study: --seed is required");
  if (c.bootstrap == 0) c.bootstrap = 99;
  const auto data = ingest_csv(c.in, c.delta);
  Emitter out(c);
  const auto rep = run_case_study(c, data);
  out.primary(case_estimates_csv(rep));
  out.secondary(".tests.csv", case_tests_csv(rep));
  out.secondary(".json", dump(to_json(rep), c));
  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical likelihood estimation and specification testing with conditional characteristic functions"};
  app.require_subcommand(1);
  Flags f;

  struct Sub {
    Command cmd;
    CLI::App* app;
  };
  std::vector<Sub> subs;
  auto add = [&](Command cmd, const std::string& help) {
    auto* s = app.add_subcommand(std::string(to_string(cmd)), help);
    s->add_option("--model", f.model, "vsk, cir, vskmj, igou or biou");
    s->add_option("--null-model", f.null_model, "null model for the specification test");
    s->add_option("--theta", f.theta, "parameters as k=v,...; unnamed ones keep the reference values");
    s->add_option("--n", f.n, "path length");
    s->add_option("--delta", f.delta, "sampling interval in years");
    s->add_option("--reps", f.reps, "Monte Carlo replicates");
    s->add_option("--bootstrap", f.bootstrap, "bootstrap replicates B");
    s->add_option("--alpha", f.alpha, "test level");
    s->add_option("--bandwidths", f.bandwidths, "comma-separated bandwidths or 'auto'");
    s->add_option("--seed", f.seed, "RNG seed");
    s->add_option("--in", f.in, "input CSV (t,x or t,x1,x2)");
    s->add_option("--out", f.out, "output file; stdout when omitted");
    s->add_option("--estimator", f.estimator, "el, mle or amle (comma-separated for mc-study)");
    s->add_flag("--force", f.force, "overwrite outputs from a different config");
    subs.push_back({cmd, s});
  };
  add(Command::Simulate, "simulate a sample path to CSV");
  add(Command::Estimate, "fit a model to a CSV path");
  add(Command::Test, "bootstrap specification test of a null model");
  add(Command::McStudy, "Monte Carlo study of the estimators (and optionally the test)");
  add(Command::CaseStudy, "fit and test the four univariate models on one data set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (const auto& s : subs) {
      if (!s.app->parsed()) continue;
      const auto c = make_config(s.cmd, f, *s.app);
      switch (s.cmd) {
        case Command::Simulate: return cmd_simulate(c, f);
        case Command::Estimate: return cmd_estimate(c, f);
        case Command::Test: return cmd_test(c, f);
        case Command::McStudy: return cmd_mc_study(c, f);
        case Command::CaseStudy: return cmd_case_study(c, f);
      }
    }
  } catch (const ccfel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
