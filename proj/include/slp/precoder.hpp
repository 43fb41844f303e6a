#pragma once

// CI-WMMSE symbol-level precoding and its degenerate family.
//
// All work happens in the stacked real domain (see embedding.hpp). With
// Hb = A_bar H_bar, reg = sigma^2 rho / P_T and t = s_bar + Lambda delta the
// cost is
//     f(x, delta) = || Omega_bar^(1/2) (Hb x - t) ||^2 + reg ||x||^2,
// minimised over x by x* = Hb^T Q t with Q = (Hb Hb^T + reg Omega_bar^-1)^-1,
// which leaves  min_{delta >= 0} t^T Q t = || B Lambda delta - d ||^2 with
// B^T B = Q and d = -B s_bar.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slp/constellation.hpp"
#include "slp/embedding.hpp"
#include "slp/errors.hpp"
#include "slp/linalg.hpp"
#include "slp/nnls.hpp"

namespace slp {

enum class PrecoderKind { ZF, MMSE, WMMSE, CI_ZF, CI_MMSE, CI_WMMSE };

inline std::string_view precoder_name(PrecoderKind kind) {
  switch (kind) {
    case PrecoderKind::ZF: return "zf";
    case PrecoderKind::MMSE: return "mmse";
    case PrecoderKind::WMMSE: return "wmmse";
    case PrecoderKind::CI_ZF: return "ci_zf";
    case PrecoderKind::CI_MMSE: return "ci_mmse";
    case PrecoderKind::CI_WMMSE: return "ci_wmmse";
  }
  return "?";
}

inline PrecoderKind parse_precoder(std::string_view name) {
  for (auto k : {PrecoderKind::ZF, PrecoderKind::MMSE, PrecoderKind::WMMSE, PrecoderKind::CI_ZF,
                 PrecoderKind::CI_MMSE, PrecoderKind::CI_WMMSE})
    if (precoder_name(k) == name) return k;
  throw ConfigError("unknown precoder '" + std::string(name) + "'");
}

inline bool is_ci(PrecoderKind kind) {
  return kind == PrecoderKind::CI_ZF || kind == PrecoderKind::CI_MMSE ||
         kind == PrecoderKind::CI_WMMSE;
}

/// How rho is read off the weights: `Complex` uses Tr(Omega A A^H), `RealLiteral`
/// uses the trace of the stacked real matrices, which is twice as large.
enum class RhoConvention { Complex, RealLiteral };

inline RhoConvention parse_rho_convention(std::string_view name) {
  if (name == "complex") return RhoConvention::Complex;
  if (name == "real-literal") return RhoConvention::RealLiteral;
  throw ConfigError("rho-convention must be 'complex' or 'real-literal', got '" +
                    std::string(name) + "'");
}

inline std::string_view rho_convention_name(RhoConvention c) {
  return c == RhoConvention::Complex ? "complex" : "real-literal";
}

struct PrecoderInput {
  CVector s;
  CMatrix H;
  double sigma2 = 0.0;
  double P_T = 1.0;
  /// Diagonal of A (receiver coefficients a_k).
  CVector a;
  /// Diagonal of Omega (MSE weights).
  RVector omega;
  ModulationScheme scheme;
  RhoConvention rho_convention = RhoConvention::Complex;
};

/// Input with A = Omega = I.
inline PrecoderInput make_input(CVector s, CMatrix H, double sigma2, double P_T,
                                ModulationScheme scheme) {
  PrecoderInput in;
  const auto k = s.size();
  in.s = std::move(s);
  in.H = std::move(H);
  in.sigma2 = sigma2;
  in.P_T = P_T;
  in.a = CVector::Ones(k);
  in.omega = RVector::Ones(k);
  in.scheme = scheme;
  return in;
}

inline double rho_of(const CVector& a, const RVector& omega, RhoConvention conv) {
  double rho = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) rho += omega(k) * std::norm(a(k));
  return conv == RhoConvention::Complex ? rho : 2.0 * rho;
}

inline double regularization(const PrecoderInput& in) {
  return in.sigma2 * rho_of(in.a, in.omega, in.rho_convention) / in.P_T;
}

/// Everything that depends only on (H, sigma^2, P_T, A, Omega); shared by all
/// symbol vectors of a coherence block.
struct FactorCache {
  CMatrix H;
  double sigma2 = 0.0;
  double P_T = 1.0;
  CVector a;
  RVector omega;
  RhoConvention rho_convention = RhoConvention::Complex;
  /// Built for the sigma^2 = 0, Omega = I problem.
  bool zero_forcing = false;

  double rho = 0.0;
  double reg = 0.0;
  RMatrix H_breve;
  /// (Hb Hb^T + reg Omega_bar^-1)^-1
  RMatrix Q;
  /// Upper triangular, B^T B = Q.
  RMatrix B;
  /// Hb^T Omega_bar (Hb Hb^T Omega_bar + reg I)^-1, evaluated as Hb^T Q.
  RMatrix recovery;
};

namespace detail {

inline void check_weights(const CMatrix& H, const CVector& a, const RVector& omega) {
  const auto k = H.rows();
  if (k < 1 || H.cols() < 1) throw InputError("channel matrix must be non-empty");
  if (a.size() != k) throw InputError("A must have K = " + std::to_string(k) + " diagonal entries");
  if (omega.size() != k)
    throw InputError("Omega must have K = " + std::to_string(k) + " diagonal entries");
  if (!H.allFinite() || !a.allFinite() || !omega.allFinite())
    throw InputError("non-finite channel or weights");
  for (Eigen::Index i = 0; i < k; ++i) {
    if (a(i) == cplx(0.0, 0.0)) throw InputError("A must be nonsingular (a_k != 0)");
    if (!(omega(i) > 0.0)) throw InputError("Omega entries must be strictly positive");
  }
}

inline FactorCache factorize(const CMatrix& H, double sigma2, double P_T, const CVector& a,
                             const RVector& omega, RhoConvention conv, bool zero_forcing) {
  check_weights(H, a, omega);
  if (!(P_T > 0.0) || !std::isfinite(P_T)) throw InputError("P_T must be positive");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw InputError("sigma^2 must be >= 0");

  FactorCache c;
  c.H = H;
  c.sigma2 = sigma2;
  c.P_T = P_T;
  c.a = a;
  c.omega = omega;
  c.rho_convention = conv;
  c.zero_forcing = zero_forcing;
  c.rho = rho_of(a, omega, conv);
  c.reg = zero_forcing ? 0.0 : sigma2 * c.rho / P_T;

  const auto k2 = 2 * H.rows();
  c.H_breve = realify_matrix(CMatrix(a.asDiagonal())) * realify_matrix(H);
  RMatrix q_inv = c.H_breve * c.H_breve.transpose();
  if (c.reg > 0.0) {
    for (Eigen::Index i = 0; i < k2; ++i) q_inv(i, i) += c.reg / omega(i % H.rows());
  }
  Eigen::LLT<RMatrix> llt(q_inv);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const RVector diag = RMatrix(llt.matrixL()).diagonal();
    ok = diag.minCoeff() > 1e-7 * diag.maxCoeff();
  }
  if (!ok)
    throw FactorizationError(
        "regularized Gram matrix is not positive definite: H (" + std::to_string(H.rows()) + "x" +
        std::to_string(H.cols()) + ") is rank deficient and sigma^2 * rho / P_T = " +
        std::to_string(c.reg) + " does not regularize it");
  c.Q = llt.solve(RMatrix::Identity(k2, k2));
  c.Q = 0.5 * (c.Q + c.Q.transpose()).eval();
  Eigen::LLT<RMatrix> q_llt(c.Q);
  if (q_llt.info() != Eigen::Success)
    throw FactorizationError("inverse Gram matrix lost positive definiteness");
  c.B = q_llt.matrixU();
  c.recovery = c.H_breve.transpose() * c.Q;
  return c;
}

}  // namespace detail

inline FactorCache build_factor_cache(const CMatrix& H, double sigma2, double P_T, const CVector& a,
                                      const RVector& omega,
                                      RhoConvention conv = RhoConvention::Complex) {
  return detail::factorize(H, sigma2, P_T, a, omega, conv, false);
}

inline FactorCache build_factor_cache(const PrecoderInput& in) {
  return build_factor_cache(in.H, in.sigma2, in.P_T, in.a, in.omega, in.rho_convention);
}

/// Unregularized factors for ZF / CI-ZF. Requires H to have full row rank.
inline FactorCache build_zf_cache(const CMatrix& H, const CVector& a) {
  return detail::factorize(H, 0.0, 1.0, a, RVector::Ones(H.rows()), RhoConvention::Complex, true);
}

inline FactorCache build_zf_cache(const PrecoderInput& in) { return build_zf_cache(in.H, in.a); }

struct PrecoderOutput {
  PrecoderKind kind = PrecoderKind::ZF;
  /// Transmit vector, ||u||^2 = P_T.
  CVector u;
  /// Unscaled design.
  CVector x;
  double gamma = 0.0;
  /// Length 2K, zero outside the CIR support.
  RVector delta;
  double objective = 0.0;
  int k_t = 0;
  int nnls_iterations = 0;
};

/// Cost f(x, delta) at the input's sigma^2, P_T, A, Omega and rho convention.
inline double objective_value(const PrecoderInput& in, const CVector& x, const RVector& delta) {
  const auto k = in.s.size();
  if (in.H.rows() != k || x.size() != in.H.cols() || delta.size() != 2 * k)
    throw InputError("objective_value: dimension mismatch");
  const RealEmbedding e = embed(in.s, in.H, in.a, in.omega);
  const CirLambda lam = build_lambda(std::span<const cplx>(in.s.data(), k), in.scheme);
  const RVector xb = realify_vector(x);
  const RVector err = e.A_bar * e.H_bar * xb - (e.s_bar + lam.matrix * delta);
  return err.cwiseAbs2().dot(e.omega_bar) + regularization(in) * xb.squaredNorm();
}

/// Gradient of f with respect to the stacked real x.
inline RVector objective_gradient(const PrecoderInput& in, const RVector& x_bar,
                                  const RVector& delta) {
  const auto k = in.s.size();
  const RealEmbedding e = embed(in.s, in.H, in.a, in.omega);
  const CirLambda lam = build_lambda(std::span<const cplx>(in.s.data(), k), in.scheme);
  const RMatrix hb = e.A_bar * e.H_bar;
  const RVector t = e.s_bar + lam.matrix * delta;
  const RVector w_res = e.omega_bar.asDiagonal() * (hb * x_bar - t);
  return 2.0 * hb.transpose() * w_res + 2.0 * regularization(in) * x_bar;
}

inline double power_scale(const CVector& x, double P_T) {
  const double e = x.squaredNorm();
  if (!(e > 0.0)) throw InputError("cannot scale an all-zero precoder output");
  return std::sqrt(P_T / e);
}

/// Common gamma for L designs so that sum_l ||gamma x_l||^2 = L * P_T.
inline double block_gamma(std::span<const CVector> xs, double P_T) {
  if (xs.empty()) throw InputError("block_gamma: empty block");
  double total = 0.0;
  for (const auto& x : xs) total += x.squaredNorm();
  if (!(total > 0.0)) throw InputError("block_gamma: all-zero block");
  return std::sqrt(static_cast<double>(xs.size()) * P_T / total);
}

struct CiOptions {
  /// Drop the identically-zero columns of B Lambda before the NNLS solve.
  bool reduce_support = true;
  double nnls_tol = 1e-10;
};

namespace detail {

inline void check_cache(const PrecoderInput& in, const FactorCache& c, bool zero_forcing) {
  if (in.s.size() != in.H.rows()) throw InputError("s must have K = rows(H) entries");
  if (!in.s.allFinite()) throw InputError("non-finite symbol vector");
  if (c.zero_forcing != zero_forcing)
    throw InputError(zero_forcing ? "zero-forcing precoder needs build_zf_cache"
                                  : "regularized precoder cannot use a zero-forcing cache");
  if (c.H.rows() != in.H.rows() || c.H.cols() != in.H.cols() || c.H != in.H || c.a != in.a)
    throw InputError("factor cache was built for a different channel");
  if (!zero_forcing &&
      (c.sigma2 != in.sigma2 || c.P_T != in.P_T || c.omega != in.omega ||
       c.rho_convention != in.rho_convention))
    throw InputError("factor cache was built for different sigma^2 / P_T / Omega / rho");
}

inline PrecoderOutput solve_ci(const PrecoderInput& in, const FactorCache& c, bool use_cir,
                               const CiOptions& opt) {
  const auto k = in.s.size();
  const RVector s_bar = realify_vector(in.s);
  RVector delta = RVector::Zero(2 * k);
  PrecoderOutput out;
  RVector target = s_bar;
  const CirLambda lam = build_lambda(std::span<const cplx>(in.s.data(), k), in.scheme);
  if (use_cir) {
    out.k_t = lam.k_t();
    if (lam.k_t() > 0) {
      NnlsProblem p;
      p.tol = opt.nnls_tol;
      p.d = -(c.B * s_bar);
      if (opt.reduce_support) {
        RMatrix lam_t(2 * k, lam.k_t());
        for (int j = 0; j < lam.k_t(); ++j) lam_t.col(j) = lam.matrix.col(lam.support[j]);
        p.C = c.B * lam_t;
        const NnlsSolution sol = solve_active_set(p);
        for (int j = 0; j < lam.k_t(); ++j) delta(lam.support[j]) = sol.delta(j);
        out.nnls_iterations = sol.iterations;
      } else {
        p.C = c.B * lam.matrix;
        const NnlsSolution sol = solve_active_set(p);
        delta = sol.delta;
        out.nnls_iterations = sol.iterations;
      }
      target += lam.matrix * delta;
    }
  }
  const RVector x_bar = c.recovery * target;
  out.x = complexify_vector(x_bar);
  out.gamma = power_scale(out.x, in.P_T);
  out.u = out.gamma * out.x;
  // Same cost as objective_value(), reusing Hb from the cache.
  const RVector err = c.H_breve * x_bar - (s_bar + lam.matrix * delta);
  double weighted = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) weighted += in.omega(i % k) * err(i) * err(i);
  out.objective = weighted + regularization(in) * x_bar.squaredNorm();
  out.delta = std::move(delta);
  return out;
}

inline void require_unit_omega(const PrecoderInput& in, std::string_view who) {
  if (!(in.omega.array() == 1.0).all())
    throw InputError(std::string(who) + " requires Omega = I");
}

}  // namespace detail

inline PrecoderOutput ci_wmmse(const PrecoderInput& in, const FactorCache& cache,
                               const CiOptions& opt = {}) {
  detail::check_cache(in, cache, false);
  auto out = detail::solve_ci(in, cache, true, opt);
  out.kind = PrecoderKind::CI_WMMSE;
  return out;
}

inline PrecoderOutput ci_wmmse(const PrecoderInput& in) { return ci_wmmse(in, build_factor_cache(in)); }

/// CI-WMMSE with Omega = I.
inline PrecoderOutput ci_mmse(const PrecoderInput& in, const FactorCache& cache,
                              const CiOptions& opt = {}) {
  detail::require_unit_omega(in, "ci_mmse");
  auto out = ci_wmmse(in, cache, opt);
  out.kind = PrecoderKind::CI_MMSE;
  return out;
}

/// Symbol-level WMMSE: the CI-WMMSE closed form at delta = 0.
inline PrecoderOutput wmmse(const PrecoderInput& in, const FactorCache& cache) {
  detail::check_cache(in, cache, false);
  auto out = detail::solve_ci(in, cache, false, {});
  out.kind = PrecoderKind::WMMSE;
  return out;
}

inline PrecoderOutput wmmse(const PrecoderInput& in) { return wmmse(in, build_factor_cache(in)); }

inline PrecoderOutput mmse(const PrecoderInput& in, const FactorCache& cache) {
  detail::require_unit_omega(in, "mmse");
  auto out = wmmse(in, cache);
  out.kind = PrecoderKind::MMSE;
  return out;
}

inline PrecoderOutput mmse(const PrecoderInput& in) { return mmse(in, build_factor_cache(in)); }

/// CI-ZF: minimum-norm x whose noise-free received signals lie in a_k^-1 D_k.
inline PrecoderOutput ci_zf(const PrecoderInput& in, const FactorCache& zf_cache,
                            const CiOptions& opt = {}) {
  detail::check_cache(in, zf_cache, true);
  auto out = detail::solve_ci(in, zf_cache, true, opt);
  out.kind = PrecoderKind::CI_ZF;
  return out;
}

inline PrecoderOutput ci_zf(const PrecoderInput& in) { return ci_zf(in, build_zf_cache(in)); }

/// ZF through the shared real-domain factors (x = Hb^T (Hb Hb^T)^-1 s_bar).
inline PrecoderOutput zf(const PrecoderInput& in, const FactorCache& zf_cache) {
  detail::check_cache(in, zf_cache, true);
  auto out = detail::solve_ci(in, zf_cache, false, {});
  out.kind = PrecoderKind::ZF;
  return out;
}

/// ZF in the complex domain: x = H^H (H H^H)^-1 A^-1 s.
inline PrecoderOutput zf(const PrecoderInput& in) {
  detail::check_weights(in.H, in.a, in.omega);
  if (in.s.size() != in.H.rows()) throw InputError("s must have K = rows(H) entries");
  const CMatrix gram = in.H * in.H.adjoint();
  Eigen::LLT<CMatrix> llt(gram);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const RVector diag = CMatrix(llt.matrixL()).diagonal().real();
    ok = diag.minCoeff() > 1e-7 * diag.maxCoeff();
  }
  if (!ok) throw FactorizationError("ZF requires H with full row rank");
  PrecoderOutput out;
  out.kind = PrecoderKind::ZF;
  const CVector target = in.s.cwiseQuotient(in.a);
  out.x = in.H.adjoint() * llt.solve(target);
  out.delta = RVector::Zero(2 * in.s.size());
  out.gamma = power_scale(out.x, in.P_T);
  out.u = out.gamma * out.x;
  out.objective = objective_value(in, out.x, out.delta);
  return out;
}

/// Dispatch by kind. `cache` must be a regularized cache for MMSE-type kinds
/// and a zero-forcing cache for ZF-type kinds.
inline PrecoderOutput precode(PrecoderKind kind, const PrecoderInput& in, const FactorCache& cache) {
  switch (kind) {
    case PrecoderKind::ZF: return zf(in, cache);
    case PrecoderKind::MMSE: return mmse(in, cache);
    case PrecoderKind::WMMSE: return wmmse(in, cache);
    case PrecoderKind::CI_ZF: return ci_zf(in, cache);
    case PrecoderKind::CI_MMSE: return ci_mmse(in, cache);
    case PrecoderKind::CI_WMMSE: return ci_wmmse(in, cache);
  }
  throw InputError("unknown precoder kind");
}

inline bool uses_zf_cache(PrecoderKind kind) {
  return kind == PrecoderKind::ZF || kind == PrecoderKind::CI_ZF;
}

inline FactorCache build_cache_for(PrecoderKind kind, const PrecoderInput& in) {
  return uses_zf_cache(kind) ? build_zf_cache(in) : build_factor_cache(in);
}

}  // namespace slp
