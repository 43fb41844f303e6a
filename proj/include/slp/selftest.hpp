#pragma once

// Invariant suites run by `slp_cli selftest`. Each suite draws its own seeded
// instances, so a given seed always yields the same report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "slp/channel_sim.hpp"
#include "slp/nnls.hpp"
#include "slp/precoder.hpp"

namespace slp {

struct SelftestOptions {
  std::uint64_t seed = 1;
  /// Negative control: the solver caches use the other rho convention than the
  /// objective the suites check against.
  bool inject_rho_mismatch = false;
};

struct SuiteResult {
  std::string name;
  bool passed = true;
  int checks = 0;
  int failures = 0;
  /// Worst normalized violation seen (1.0 is the pass threshold).
  double worst = 0.0;
  std::string first_failure;
};

struct SelftestReport {
  std::vector<SuiteResult> suites;
  bool passed() const {
    return std::all_of(suites.begin(), suites.end(), [](const auto& s) { return s.passed; });
  }
};

namespace selftest_detail {

/// `value / limit` is recorded; values above 1 fail.
inline void check(SuiteResult& r, double value, double limit, const std::string& what) {
  ++r.checks;
  const double ratio = limit > 0.0 ? value / limit : (value > 0.0 ? INFINITY : 0.0);
  const double shown = std::isfinite(ratio) ? ratio : 1e300;
  r.worst = std::max(r.worst, shown);
  if (!(ratio <= 1.0)) {
    ++r.failures;
    r.passed = false;
    if (r.first_failure.empty()) {
      std::ostringstream os;
      os << what << ": " << value << " > " << limit;
      r.first_failure = os.str();
    }
  }
}

inline double rel(const CVector& a, const CVector& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

inline PrecoderInput random_instance(const ModulationScheme& scheme, int K, int N, double sigma2, Rng& rng) {
  const Constellation con(scheme);
  std::uniform_int_distribution<int> pick(0, con.order() - 1);
  CVector s(K);
  for (int k = 0; k < K; ++k) s(k) = con.value(pick(rng));
  return make_input(std::move(s), generate_rayleigh(N, K, rng), sigma2, 1.0, scheme);
}

inline RhoConvention other(RhoConvention c) {
  return c == RhoConvention::Complex ? RhoConvention::RealLiteral : RhoConvention::Complex;
}

/// Input the solver sees; its rho convention differs from the objective's under injection.
inline PrecoderInput solver_input(const PrecoderInput& in, const SelftestOptions& opt) {
  PrecoderInput s = in;
  if (opt.inject_rho_mismatch) s.rho_convention = other(in.rho_convention);
  return s;
}

/// Inner points only, so that Lambda is empty.
inline CVector inner_qam16(int K, Rng& rng) {
  const double r10 = std::sqrt(10.0);
  std::uniform_int_distribution<int> sign(0, 1);
  CVector s(K);
  for (int k = 0; k < K; ++k) s(k) = cplx(sign(rng) ? 1.0 : -1.0, sign(rng) ? 1.0 : -1.0) / r10;
  return s;
}

inline SuiteResult degeneracy_chain(const SelftestOptions& opt) {
  SuiteResult r{.name = "degeneracy_chain"};
  Rng rng = make_stream(opt.seed, 0x6465, 0);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  for (int t = 0; t < 20; ++t) {
    const int K = 2 + t % 4;
    const int N = K + t % 2;
    // delta = 0: WMMSE against the complex-domain closed form.
    PrecoderInput in = random_instance(ModulationScheme::qam(16), K, N, 0.1, rng);
    in.s = inner_qam16(K, rng);
    for (int k = 0; k < K; ++k) in.omega(k) = w(rng);
    const auto ci = ci_wmmse(in, build_factor_cache(in));
    const CMatrix W = in.omega.cast<cplx>().asDiagonal();
    const CMatrix gram = in.H * in.H.adjoint() + regularization(in) * CMatrix(W.inverse());
    const CVector closed = in.H.adjoint() * gram.partialPivLu().solve(in.s);
    check(r, rel(ci.x, closed), 1e-10, "ci_wmmse with delta = 0 vs WMMSE closed form");

    // Omega = I: WMMSE equals MMSE.
    in.omega.setOnes();
    const auto cache1 = build_factor_cache(in);
    check(r, rel(wmmse(in, cache1).x, mmse(in, cache1).x), 1e-12, "wmmse with Omega = I vs mmse");

    // sigma^2 -> 0, Omega = A = I: CI-MMSE approaches CI-ZF.
    PrecoderInput lo = random_instance(t % 2 ? ModulationScheme::psk(8) : ModulationScheme::qam(16), K, N,
                                       1e-14, rng);
    check(r, rel(ci_mmse(lo, build_factor_cache(lo)).x, ci_zf(lo).x), 1e-5, "ci_mmse at sigma^2 = 1e-14 vs ci_zf");

    // Lambda = 0: CI-ZF equals ZF.
    PrecoderInput z = random_instance(ModulationScheme::qam(16), K, N, 0.1, rng);
    z.s = inner_qam16(K, rng);
    check(r, rel(ci_zf(z).x, zf(z).x), 1e-10, "ci_zf with inner symbols vs zf");
  }
  return r;
}

inline SuiteResult kkt(const SelftestOptions& opt) {
  SuiteResult r{.name = "kkt"};
  Rng rng = make_stream(opt.seed, 0x6b6b74, 0);
  std::uniform_int_distribution<int> dim(1, 12);
  std::normal_distribution<double> g;
  for (int t = 0; t < 300; ++t) {
    NnlsProblem p;
    p.C = RMatrix(dim(rng), dim(rng));
    p.d = RVector(p.C.rows());
    for (auto& v : p.C.reshaped()) v = g(rng);
    for (auto& v : p.d) v = g(rng);
    const auto sol = solve_active_set(p);
    check(r, verify_kkt(p, sol) ? 0.0 : 2.0, 1.0, "active-set solution violates KKT");
  }
  // CI-WMMSE subproblems.
  for (int t = 0; t < 50; ++t) {
    const auto in = random_instance(ModulationScheme::qam(16), 6, 6, 0.05, rng);
    const auto cache = build_factor_cache(in);
    const auto lam = build_lambda(std::span<const cplx>(in.s.data(), in.s.size()), in.scheme);
    NnlsProblem p;
    p.C = cache.B * lam.matrix;
    p.d = -(cache.B * realify_vector(in.s));
    check(r, verify_kkt(p, solve_active_set(p)) ? 0.0 : 2.0, 1.0, "CI subproblem violates KKT");
  }
  return r;
}

inline SuiteResult gradient(const SelftestOptions& opt) {
  SuiteResult r{.name = "gradient_stationarity"};
  Rng rng = make_stream(opt.seed, 0x67726164, 0);
  std::normal_distribution<double> g;
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  for (int t = 0; t < 30; ++t) {
    const int K = 2 + t % 4;
    const int N = K + 1;
    PrecoderInput in = random_instance(t % 2 ? ModulationScheme::psk(8) : ModulationScheme::qam(16), K, N,
                                       0.05 + 0.1 * (t % 5), rng);
    for (int k = 0; k < K; ++k) {
      in.omega(k) = w(rng);
      in.a(k) = std::polar(w(rng), 2.0 * kPi * w(rng));
    }
    // Analytic gradient against central differences at a random point.
    RVector xb(2 * N), delta(2 * K);
    for (auto& v : xb) v = g(rng);
    for (auto& v : delta) v = ex(rng);
    const RVector an = objective_gradient(in, xb, delta);
    RVector fd(xb.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < xb.size(); ++i) {
      RVector p = xb, m = xb;
      p(i) += h;
      m(i) -= h;
      fd(i) = (objective_value(in, complexify_vector(p), delta) - objective_value(in, complexify_vector(m), delta)) /
              (2.0 * h);
    }
    check(r, (fd - an).norm(), 1e-5 * std::max(1.0, an.norm()), "gradient vs central differences");

    // Stationarity of the solver output under the objective's own convention.
    const auto out = ci_wmmse(solver_input(in, opt));
    const RVector x_opt = realify_vector(out.x);
    const RealEmbedding e = embed(in.s, in.H, in.a, in.omega);
    const auto lam = build_lambda(std::span<const cplx>(in.s.data(), K), in.scheme);
    const RVector tgt = e.s_bar + lam.matrix * out.delta;
    const RMatrix hb = e.A_bar * e.H_bar;
    const double scale = hb.norm() * e.omega_bar.maxCoeff() * tgt.norm();
    check(r, objective_gradient(in, x_opt, out.delta).norm(), 1e-8 * scale, "gradient at the solver optimum");
  }
  return r;
}

inline SuiteResult support_reduction(const SelftestOptions& opt) {
  SuiteResult r{.name = "support_reduction"};
  Rng rng = make_stream(opt.seed, 0x73757070, 0);
  CiOptions full;
  full.reduce_support = false;
  for (int t = 0; t < 60; ++t) {
    const auto scheme = t % 3 == 0 ? ModulationScheme::qam(64) : (t % 3 == 1 ? ModulationScheme::qam(16)
                                                                              : ModulationScheme::psk(8));
    const auto in = random_instance(scheme, 6, 6, 0.05, rng);
    const auto cache = build_factor_cache(in);
    const auto a = ci_wmmse(in, cache);
    const auto b = ci_wmmse(in, cache, full);
    check(r, (a.delta - b.delta).norm(), 1e-10 * std::max(1.0, b.delta.norm()), "reduced vs full delta");
    check(r, rel(a.x, b.x), 1e-10, "reduced vs full x");
    const auto lam = build_lambda(std::span<const cplx>(in.s.data(), 6), scheme);
    for (Eigen::Index j = 0; j < lam.matrix.cols(); ++j)
      if (lam.matrix.col(j).isZero(0.0)) check(r, std::abs(a.delta(j)), 0.0, "delta outside the support");
  }
  return r;
}

inline SuiteResult cir_membership(const SelftestOptions& opt) {
  SuiteResult r{.name = "cir_membership"};
  Rng rng = make_stream(opt.seed, 0x636972, 0);
  for (int t = 0; t < 60; ++t) {
    const auto scheme = t % 2 ? ModulationScheme::psk(8) : ModulationScheme::qam(16);
    const auto in = random_instance(scheme, 4, 5, 0.1, rng);
    const auto out = ci_zf(in);
    const CVector clean = in.a.cwiseProduct(in.H * out.x);
    for (int k = 0; k < 4; ++k) check(r, cir_contains(in.s(k), clean(k), scheme, 1e-8) ? 0.0 : 2.0, 1.0,
                                      "noise-free CI-ZF output outside the CIR");
    // Every constellation point lies in its own region and is detected as itself.
    const Constellation con(scheme);
    for (int i = 0; i < con.order(); ++i) {
      check(r, cir_contains(con.value(i), con.value(i), scheme, 0.0) ? 0.0 : 2.0, 1.0, "point outside its CIR");
      check(r, con.detect_index(con.value(i)) == i ? 0.0 : 2.0, 1.0, "point detected as another");
    }
  }
  return r;
}

}  // namespace selftest_detail

inline SelftestReport run_selftest(const SelftestOptions& opt = {}) {
  using namespace selftest_detail;
  SelftestReport rep;
  const std::vector<std::function<SuiteResult(const SelftestOptions&)>> suites{
      degeneracy_chain, kkt, gradient, support_reduction, cir_membership};
  for (const auto& suite : suites) {
    try {
      rep.suites.push_back(suite(opt));
    } catch (const std::exception& e) {
      SuiteResult bad;
      bad.name = "suite";
      bad.passed = false;
      bad.failures = 1;
      bad.first_failure = std::string("exception: ") + e.what();
      rep.suites.push_back(bad);
    }
  }
  return rep;
}

inline void print_report(std::ostream& os, const SelftestReport& rep) {
  for (const auto& s : rep.suites) {
    os << (s.passed ? "PASS " : "FAIL ") << s.name << "  checks=" << s.checks << " failures=" << s.failures;
    std::ostringstream w;
    w.precision(3);
    w << s.worst;
    os << " worst=" << w.str();
    if (!s.first_failure.empty()) os << "  first: " << s.first_failure;
    os << '\n';
  }
  os << (rep.passed() ? "selftest: all suites passed" : "selftest: FAILED") << '\n';
}

}  // namespace slp
