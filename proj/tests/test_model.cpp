#include <catch2/catch.hpp>

#include <random>

#include "ccfel/ccfel.hpp"
#include "support/oracles.hpp"

using namespace ccfel;
using Catch::Matchers::WithinAbs;

namespace {

const std::vector<double> kVsk{0.858, 0.089, 0.047};
const std::vector<double> kCir{0.892, 0.091, 0.181};
const std::vector<double> kVskMj{0.858, 0.089, 0.047, 2.0, 0.067};
const std::vector<double> kIgOu{10.0, 1.0, 20.0};
const std::vector<double> kBiOu{0.22, 0.2, 0.5, 0.08, 0.09, 0.09, 0.17};
constexpr double kMonth = 1.0 / 12.0;

}  // namespace

TEST_CASE("philox block matches the published known-answer vectors", "[rng]") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(Philox::block({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("philox streams are reproducible and distinct", "[rng]") {
  Philox a(42, 7), b(42, 7), c(42, 8);
  std::vector<std::uint64_t> va, vb, vc;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  Philox d = a.substream(7);
  CHECK(d() == va[0]);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform_open(a);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("ccf axioms hold on random models, frequencies and states", "[model][property]") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&](std::vector<double> t) {
    for (auto& v : t) v *= 0.7 + 0.6 * unit(gen);
    return t;
  };
  for (int i = 0; i < 1000; ++i) {
    const auto kind = static_cast<ModelKind>(i % 5);
    std::vector<double> theta;
    switch (kind) {
      case ModelKind::VSK: theta = jitter(kVsk); break;
      case ModelKind::CIR: theta = jitter(kCir); break;
      case ModelKind::VSK_MJ: theta = jitter(kVskMj); break;
      case ModelKind::IG_OU: theta = jitter(kIgOu); break;
      case ModelKind::BI_OU: theta = jitter(kBiOu); break;
    }
    const ModelSpec m{kind, theta, kMonth};
    if (!is_admissible(m)) continue;
    const State x{0.01 + 0.2 * unit(gen), 0.01 + 0.2 * unit(gen)};
    const State u{-300.0 + 600.0 * unit(gen), kind == ModelKind::BI_OU ? -100.0 + 200.0 * unit(gen) : 0.0};
    const State neg{-u[0], -u[1]};
    const cplx v = ccf(m, u, x);
    CHECK(std::abs(v) <= 1.0 + 1e-10);
    CHECK(ccf(m, State{0.0, 0.0}, x) == cplx{1.0, 0.0});
    const cplx w = ccf(m, neg, x);
    CHECK_THAT(w.real(), WithinAbs(v.real(), 1e-12));
    CHECK_THAT(w.imag(), WithinAbs(-v.imag(), 1e-12));
  }
}

TEST_CASE("vsk ccf agrees with Fourier quadrature of the normal transition", "[model]") {
  const ModelSpec m{ModelKind::VSK, kVsk, kMonth};
  const double decay = std::exp(-kVsk[0] * kMonth);
  const double var = kVsk[2] * kVsk[2] * (1.0 - decay * decay) / (2.0 * kVsk[0]);
  for (double x : {0.03, 0.089, 0.2}) {
    const double mean = kVsk[1] + (x - kVsk[1]) * decay;
    for (double u : {1.0, 20.0, 75.0, 150.0}) {
      const auto ref = oracle::normal_cf_by_quadrature(u, mean, var);
      const cplx v = ccf(m, State{u, 0.0}, State{x, 0.0});
      CHECK_THAT(v.real(), WithinAbs(ref.real(), 1e-9));
      CHECK_THAT(v.imag(), WithinAbs(ref.imag(), 1e-9));
    }
  }
}

TEST_CASE("cir ccf matches a Monte Carlo mean over exact noncentral chi-square draws", "[model]") {
  const ModelSpec m{ModelKind::CIR, kCir, kMonth};
  const double k = kCir[0], a = kCir[1], s = kCir[2], x = 0.09, u = 5.0;
  const double c = 4.0 * k / (s * s * (1.0 - std::exp(-k * kMonth)));
  const double dof = 4.0 * k * a / (s * s);
  const double nc = c * x * std::exp(-k * kMonth);
  std::mt19937_64 gen(99);
  const int draws = 1000000;
  std::vector<double> re(draws), im(draws);
  for (int i = 0; i < draws; ++i) {
    const double y = oracle::noncentral_chi2(gen, dof, nc) / c;
    re[i] = std::cos(u * y);
    im[i] = std::sin(u * y);
  }
  const auto mr = oracle::mean_se(re), mi = oracle::mean_se(im);
  const cplx v = ccf(m, State{u, 0.0}, State{x, 0.0});
  CHECK(std::abs(v.real() - mr.mean) < 3.0 * mr.se);
  CHECK(std::abs(v.imag() - mi.mean) < 3.0 * mi.se);
}

TEST_CASE("vskmj gamma integral", "[model]") {
  const double k = 0.858, lam = 2.0, eta = 0.067;
  SECTION("u = 0 and eta = 0 give lambda delta") {
    CHECK_THAT(vskmj_gamma(k, lam, eta, kMonth, 0.0), WithinAbs(lam * kMonth, 1e-14));
    CHECK_THAT(vskmj_gamma(k, lam, 0.0, kMonth, 37.0), WithinAbs(lam * kMonth, 1e-14));
  }
  SECTION("matches a dense Simpson oracle") {
    for (double u : {10.0, 40.0}) {
      const double lo = std::exp(-2.0 * k * kMonth);
      const double ref = lam / (2.0 * k) *
                         oracle::simpson([&](double y) { return std::exp(-eta * eta * u * u * y / 2.0) / y; }, lo, 1.0,
                                         1000000);
      CHECK_THAT(vskmj_gamma(k, lam, eta, kMonth, u), WithinAbs(ref, 1e-8));
    }
  }
  SECTION("invalid parameters") {
    CHECK_THROWS_AS(vskmj_gamma(-1.0, lam, eta, kMonth, 1.0), ParameterError);
  }
}

TEST_CASE("vskmj with lambda = 0 reduces to vsk", "[model][property]") {
  const ModelSpec mj{ModelKind::VSK_MJ, {0.858, 0.089, 0.047, 0.0, 0.067}, kMonth};
  const ModelSpec vsk{ModelKind::VSK, kVsk, kMonth};
  for (double u : {-80.0, -3.0, 0.5, 12.0, 150.0})
    for (double x : {0.0, 0.05, 0.12}) {
      const cplx a = ccf(mj, State{u, 0.0}, State{x, 0.0});
      const cplx b = ccf(vsk, State{u, 0.0}, State{x, 0.0});
      CHECK(std::abs(a - b) <= 1e-12);
    }
}

TEST_CASE("bivariate ccf factorises for independent coordinates", "[model]") {
  const ModelSpec m{ModelKind::BI_OU, {0.22, 0.0, 0.5, 0.08, 0.09, 0.09, 0.17}, kMonth};
  const State x{0.07, 0.1};
  for (double u1 : {-30.0, 4.0, 25.0})
    for (double u2 : {-12.0, 9.0}) {
      const cplx joint = ccf(m, State{u1, u2}, x);
      const cplx prod = ccf(m, State{u1, 0.0}, x) * ccf(m, State{0.0, u2}, x);
      CHECK(std::abs(joint - prod) <= 1e-10);
    }
}

TEST_CASE("ccf rejects bad states and parameters", "[model]") {
  CHECK_THROWS_AS(ccf(ModelSpec{ModelKind::CIR, kCir, kMonth}, State{1.0, 0.0}, State{-0.1, 0.0}), DomainError);
  CHECK_THROWS_AS(ccf(ModelSpec{ModelKind::IG_OU, kIgOu, kMonth}, State{1.0, 0.0}, State{0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(ccf(ModelSpec{ModelKind::VSK, {-1.0, 0.1, 0.1}, kMonth}, State{1.0, 0.0}, State{0.1, 0.0}),
                  ParameterError);
  CHECK_THROWS_AS(ccf(ModelSpec{ModelKind::CIR, {0.5, 0.01, 0.5}, kMonth}, State{1.0, 0.0}, State{0.1, 0.0}),
                  ParameterError);
}

TEST_CASE("instrument weight", "[model]") {
  const FrequencyPoint zero{{1.0, 0.0}, {0.0, 0.0}};
  CHECK(instrument_weight(zero, State{3.0, 0.0}, InstrumentMode::Estimate) == cplx{1.0, 0.0});
  const FrequencyPoint two{{0.0, 0.0}, {2.0, 0.0}};
  const FrequencyPoint minus_two{{0.0, 0.0}, {-2.0, 0.0}};
  const cplx w = instrument_weight(two, State{0.5, 0.0}, InstrumentMode::Estimate);
  CHECK_THAT(w.real(), WithinAbs(std::cos(1.0), 1e-15));
  CHECK_THAT(w.imag(), WithinAbs(std::sin(1.0), 1e-15));
  CHECK(instrument_weight(minus_two, State{0.5, 0.0}, InstrumentMode::Estimate) == std::conj(w));
  CHECK(instrument_weight(two, State{0.5, 0.0}, InstrumentMode::Test) == cplx{1.0, 0.0});
  CHECK(std::abs(std::abs(w) - 1.0) < 1e-15);
}

TEST_CASE("residual basics", "[model]") {
  const ModelSpec m{ModelKind::VSK, kVsk, kMonth};
  const FrequencyPoint origin{{0.0, 0.0}, {3.0, 0.0}};
  CHECK(residual(m, origin, State{0.05, 0.0}, State{0.2, 0.0}) == cplx{0.0, 0.0});
  const FrequencyPoint tau{{17.0, 0.0}, {4.0, 0.0}};
  const FrequencyPoint neg{{-17.0, 0.0}, {-4.0, 0.0}};
  const cplx a = residual(m, tau, State{0.05, 0.0}, State{0.07, 0.0});
  const cplx b = residual(m, neg, State{0.05, 0.0}, State{0.07, 0.0});
  CHECK_THAT(b.real(), WithinAbs(a.real(), 1e-15));
  CHECK_THAT(b.imag(), WithinAbs(-a.imag(), 1e-15));
  CHECK(std::abs(a) <= 2.0);
}

TEST_CASE("residuals are martingale differences at the true parameter only", "[model]") {
  const ModelSpec m{ModelKind::VSK, kVsk, kMonth};
  const ModelSpec wrong{ModelKind::VSK, {2.0 * kVsk[0], kVsk[1], kVsk[2]}, kMonth};
  const State x{0.03, 0.0};
  Philox rng(5, 0);
  const int draws = 100000;
  std::vector<State> next(draws);
  for (auto& y : next) y = transition_draw(m, x, rng);
  double worst_wrong = 0.0;
  for (double u : {10.0, 40.0, 80.0}) {
    const FrequencyPoint tau{{u, 0.0}, {5.0, 0.0}};
    std::vector<double> re(draws), im(draws), re_w(draws), im_w(draws);
    for (int i = 0; i < draws; ++i) {
      const cplx e = residual(m, tau, x, next[i]);
      const cplx f = residual(wrong, tau, x, next[i]);
      re[i] = e.real();
      im[i] = e.imag();
      re_w[i] = f.real();
      im_w[i] = f.imag();
    }
    const auto a = oracle::mean_se(re), b = oracle::mean_se(im);
    CHECK(std::abs(a.mean) < 3.0 * a.se);
    CHECK(std::abs(b.mean) < 3.0 * b.se);
    const auto c = oracle::mean_se(re_w), d = oracle::mean_se(im_w);
    worst_wrong = std::max({worst_wrong, std::abs(c.mean) / c.se, std::abs(d.mean) / d.se});
  }
  CHECK(worst_wrong > 5.0);
}
