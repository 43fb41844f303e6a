#pragma once

// Monte Carlo link simulation for the precoders in precoder.hpp: i.i.d.
// Rayleigh channels, block transmission with a shared power scale, ML
// detection at the users, and multiplication-count accounting for the
// CI precoders.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "slp/constellation.hpp"
#include "slp/errors.hpp"
#include "slp/linalg.hpp"
#include "slp/precoder.hpp"

namespace slp {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, substream); the same triple always
/// yields the same sequence, whichever thread draws from it.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(substream),
                    static_cast<std::uint32_t>(substream >> 32)};
  return Rng(seq);
}

/// K x N matrix of i.i.d. CN(0, 1) entries.
inline CMatrix generate_rayleigh(int N, int K, Rng& rng) {
  if (N < 1 || K < 1) throw InputError("generate_rayleigh: N and K must be >= 1");
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CMatrix H(K, N);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const double re = g(rng);
      const double im = g(rng);
      H(k, n) = cplx(re, im);
    }
  return H;
}

/// CN(0, sigma2) samples.
inline CVector complex_noise(Eigen::Index len, double sigma2, Rng& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(sigma2 / 2.0));
  CVector n(len);
  for (Eigen::Index i = 0; i < len; ++i) {
    const double re = g(rng);
    const double im = g(rng);
    n(i) = cplx(re, im);
  }
  return n;
}

/// y_k = (a_k / gamma) (h_k^T u + n_k) for a given noise realisation.
inline CVector receive(const CVector& u, const CMatrix& H, const CVector& noise, double gamma,
                       const CVector& a) {
  if (u.size() != H.cols() || noise.size() != H.rows() || a.size() != H.rows())
    throw InputError("receive: dimension mismatch");
  if (!(gamma > 0.0)) throw InputError("receive: gamma must be positive");
  return a.cwiseProduct(H * u + noise) / gamma;
}

inline CVector transmit_receive(const CVector& u, const CMatrix& H, double sigma2, double gamma,
                                const CVector& a, Rng& rng) {
  return receive(u, H, complex_noise(H.rows(), sigma2, rng), gamma, a);
}

struct SimConfig {
  int N = 12;
  int K = 12;
  ModulationScheme scheme = ModulationScheme::qam(16);
  std::vector<PrecoderKind> precoders{PrecoderKind::MMSE, PrecoderKind::CI_ZF,
                                      PrecoderKind::CI_MMSE};
  /// SNR = P_T / sigma^2 in dB.
  std::vector<double> snr_grid_db{0, 5, 10, 15, 20, 25, 30, 35, 40};
  /// Symbol vectors per block (channel coherence); > 1 switches to a shared block gamma.
  int block_length = 1;
  long long min_symbol_errors = 400;
  /// Symbols simulated before the error target may stop a point (channel averaging).
  long long min_symbols = 0;
  long long max_symbols = 2'000'000;
  std::uint64_t seed = 1;
  int threads = 1;
  double P_T = 1.0;
  RhoConvention rho_convention = RhoConvention::Complex;
  /// Omega diagonal; empty means identity.
  std::vector<double> omega;
};

inline void validate(const SimConfig& c) {
  if (c.N < 1) throw ConfigError("N must be >= 1");
  if (c.K < 1) throw ConfigError("K must be >= 1");
  if (c.block_length < 1) throw ConfigError("block_length must be >= 1");
  if (c.snr_grid_db.empty()) throw ConfigError("snr grid must not be empty");
  if (c.precoders.empty()) throw ConfigError("at least one precoder is required");
  if (c.min_symbol_errors < 1) throw ConfigError("min_symbol_errors must be >= 1");
  if (c.max_symbols < 1) throw ConfigError("max_symbols must be >= 1");
  if (c.min_symbols < 0 || c.min_symbols > c.max_symbols)
    throw ConfigError("min_symbols must lie in [0, max_symbols]");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (!(c.P_T > 0.0)) throw ConfigError("P_T must be positive");
  if (!c.omega.empty() && static_cast<int>(c.omega.size()) != c.K)
    throw ConfigError("omega must list K weights");
  for (double w : c.omega)
    if (!(w > 0.0)) throw ConfigError("omega weights must be positive");
  validate(c.scheme);
}

inline double sigma2_for_snr(double snr_db, double P_T) { return P_T / std::pow(10.0, snr_db / 10.0); }

struct SerPoint {
  double snr_db = 0.0;
  long long symbols = 0;
  long long errors = 0;
  long long bit_errors = 0;
  long long bits = 0;
  /// Blocks skipped because the precoder threw (rank-deficient H, NNLS failure).
  long long failures = 0;
  /// Noise-free received points outside their CIR (CI-ZF only; the regularized
  /// CI designs trade CIR membership for noise robustness).
  long long cir_violations = 0;
  /// Completed blocks and the sum of squared per-block SERs (batch means).
  long long blocks = 0;
  double block_ser_sq_sum = 0.0;

  double ser() const { return symbols > 0 ? static_cast<double>(errors) / symbols : 0.0; }
  double ber() const { return bits > 0 ? static_cast<double>(bit_errors) / bits : 0.0; }
  /// 95% half-width of the SER estimate. Errors inside one block share a
  /// channel, so the spread is estimated from per-block SERs (batch means);
  /// with fewer than two blocks the binomial approximation is used.
  double ci_halfwidth() const {
    if (symbols == 0) return 0.0;
    const double p = ser();
    if (blocks < 2) return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(symbols));
    const double b = static_cast<double>(blocks);
    const double var = std::max(0.0, (block_ser_sq_sum - b * p * p) / (b - 1.0));
    return 1.96 * std::sqrt(var / b);
  }
};

struct SerCurve {
  PrecoderKind kind = PrecoderKind::ZF;
  std::vector<SerPoint> points;
};

namespace detail {

struct BlockTally {
  long long errors = 0;
  long long bit_errors = 0;
  long long cir_violations = 0;
  bool failed = false;
};

// One coherence block for one precoder.
inline BlockTally run_block(PrecoderKind kind, const Constellation& con, const CMatrix& H,
                            const std::vector<std::vector<int>>& sym_idx,
                            const std::vector<CVector>& noise, double sigma2, const SimConfig& cfg,
                            const RVector& omega) {
  BlockTally tally;
  const int K = cfg.K;
  const auto L = sym_idx.size();
  PrecoderInput in = make_input(CVector(K), H, sigma2, cfg.P_T, cfg.scheme);
  in.omega = omega;
  in.rho_convention = cfg.rho_convention;
  std::vector<CVector> xs;
  std::vector<CVector> targets;
  xs.reserve(L);
  try {
    const FactorCache cache = build_cache_for(kind, in);
    for (std::size_t l = 0; l < L; ++l) {
      for (int k = 0; k < K; ++k) in.s(k) = con.value(sym_idx[l][k]);
      xs.push_back(precode(kind, in, cache).x);
      targets.push_back(in.s);
    }
  } catch (const FactorizationError&) {
    tally.failed = true;
    return tally;
  } catch (const NnlsNonConvergence&) {
    tally.failed = true;
    return tally;
  }
  double gamma_blk = 0.0;
  if (L > 1) gamma_blk = block_gamma(std::span<const CVector>(xs), cfg.P_T);
  for (std::size_t l = 0; l < L; ++l) {
    const double gamma = L > 1 ? gamma_blk : power_scale(xs[l], cfg.P_T);
    const CVector clean = in.a.cwiseProduct(H * xs[l]);
    const CVector y = clean + in.a.cwiseProduct(noise[l]) / gamma;
    for (int k = 0; k < K; ++k) {
      const int want = sym_idx[l][k];
      const int got = con.detect_index(y(k));
      if (got != want) {
        ++tally.errors;
        tally.bit_errors += std::popcount(con.point(got).bit_label ^ con.point(want).bit_label);
      }
      if (kind == PrecoderKind::CI_ZF && !cir_contains(targets[l](k), clean(k), cfg.scheme, 1e-6))
        ++tally.cir_violations;
    }
  }
  return tally;
}

inline std::vector<SerPoint> run_snr_point(const SimConfig& cfg, std::size_t snr_index) {
  const Constellation con(cfg.scheme);
  const double snr_db = cfg.snr_grid_db[snr_index];
  const double sigma2 = sigma2_for_snr(snr_db, cfg.P_T);
  const std::size_t P = cfg.precoders.size();
  const RVector omega = cfg.omega.empty()
                            ? RVector::Ones(cfg.K)
                            : RVector(Eigen::Map<const RVector>(cfg.omega.data(), cfg.K));
  std::vector<SerPoint> pts(P);
  for (auto& p : pts) p.snr_db = snr_db;
  std::vector<char> done(P, 0);
  const long long per_block = static_cast<long long>(cfg.block_length) * cfg.K;
  std::uniform_int_distribution<int> pick(0, con.order() - 1);

  for (std::uint64_t trial = 0;; ++trial) {
    bool any = false;
    for (std::size_t i = 0; i < P; ++i) any = any || !done[i];
    if (!any) break;

    Rng rng = make_stream(cfg.seed, snr_index, trial);
    const CMatrix H = generate_rayleigh(cfg.N, cfg.K, rng);
    std::vector<std::vector<int>> sym(cfg.block_length, std::vector<int>(cfg.K));
    for (auto& v : sym)
      for (auto& s : v) s = pick(rng);
    std::vector<CVector> noise;
    noise.reserve(cfg.block_length);
    for (int l = 0; l < cfg.block_length; ++l) noise.push_back(complex_noise(cfg.K, sigma2, rng));

    for (std::size_t i = 0; i < P; ++i) {
      if (done[i]) continue;
      const BlockTally t = run_block(cfg.precoders[i], con, H, sym, noise, sigma2, cfg, omega);
      SerPoint& p = pts[i];
      if (t.failed) {
        ++p.failures;
      } else {
        p.symbols += per_block;
        p.bits += per_block * con.bits_per_symbol();
        p.errors += t.errors;
        p.bit_errors += t.bit_errors;
        p.cir_violations += t.cir_violations;
        p.blocks += 1;
        const double block_ser = static_cast<double>(t.errors) / static_cast<double>(per_block);
        p.block_ser_sq_sum += block_ser * block_ser;
      }
      // Failures also consume budget so a degenerate setting cannot spin forever.
      const long long spent = p.symbols + p.failures * per_block;
      if ((p.errors >= cfg.min_symbol_errors && spent >= cfg.min_symbols) ||
          spent >= cfg.max_symbols)
        done[i] = 1;
    }
  }
  return pts;
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// SER curves, one per configured precoder, in configuration order. All
/// precoders see the same channels, symbols and noise. Results depend only on
/// the config (threads change wall time, not output).
inline std::vector<SerCurve> simulate_ser(const SimConfig& cfg) {
  validate(cfg);
  const std::size_t S = cfg.snr_grid_db.size();
  std::vector<std::vector<SerPoint>> per_snr(S);
  detail::parallel_for(S, cfg.threads, [&](std::size_t i) { per_snr[i] = detail::run_snr_point(cfg, i); });

  std::vector<SerCurve> curves(cfg.precoders.size());
  for (std::size_t p = 0; p < curves.size(); ++p) {
    curves[p].kind = cfg.precoders[p];
    for (std::size_t i = 0; i < S; ++i) curves[p].points.push_back(per_snr[i][p]);
  }
  return curves;
}

// ---------------------------------------------------------------------------
// Multiplication counts. N_M is the cost of a (2N x 2K)(2K x 2K) product.

inline double normalization_unit(int N, int K) { return 8.0 * N * K * K; }

inline double mults_ci_wmmse_lc(int N, int K, double k_t, double loops) {
  return (8.0 * N + 4.0 * k_t + 4.0 * k_t * loops) * K +
         (12.0 + 16.0 * N + 40.0 / 3.0 * K) * K * K;
}

inline double mults_ci_zf(int N, int K, double loops) {
  return (20.0 * K + 8.0 * K * loops) * N + (4.0 + 24.0 * N + 4.0 * K) * K * K;
}

inline double mults_ci_zf_lc(int N, int K, double k_t, double loops) {
  return (4.0 * k_t + 12.0 * K + 4.0 * k_t * loops) * N + (4.0 + 24.0 * N + 4.0 * K) * K * K;
}

struct OpCountReport {
  int N = 0;
  int K = 0;
  ModulationScheme scheme;
  long long samples = 0;
  double mean_k_t = 0.0;
  /// Mean active-set outer loops: CI-WMMSE reduced, CI-ZF full, CI-ZF reduced.
  double mean_loops_ci_wmmse_lc = 0.0;
  double mean_loops_ci_zf = 0.0;
  double mean_loops_ci_zf_lc = 0.0;
  double n_m = 0.0;
  /// E{M} / N_M, averaging the per-sample counts.
  double ratio_ci_wmmse_lc = 0.0;
  double ratio_ci_zf = 0.0;
  double ratio_ci_zf_lc = 0.0;
};

/// Samples `samples_per_snr` (channel, symbol vector) pairs at each SNR of the
/// config grid and evaluates the multiplication counts at the measured K_T and
/// loop counts. CI-WMMSE uses the config's Omega (identity by default).
inline OpCountReport complexity_report(const SimConfig& cfg, long long samples_per_snr) {
  validate(cfg);
  if (samples_per_snr < 1) throw ConfigError("complexity samples must be >= 1");
  const Constellation con(cfg.scheme);
  const RVector omega = cfg.omega.empty()
                            ? RVector::Ones(cfg.K)
                            : RVector(Eigen::Map<const RVector>(cfg.omega.data(), cfg.K));
  struct Acc {
    long long n = 0;
    double k_t = 0, l1 = 0, l2 = 0, l3 = 0, m1 = 0, m2 = 0, m3 = 0;
  };
  const std::size_t S = cfg.snr_grid_db.size();
  std::vector<Acc> acc(S);
  detail::parallel_for(S, cfg.threads, [&](std::size_t si) {
    const double sigma2 = sigma2_for_snr(cfg.snr_grid_db[si], cfg.P_T);
    std::uniform_int_distribution<int> pick(0, con.order() - 1);
    Acc& a = acc[si];
    CiOptions full;
    full.reduce_support = false;
    for (long long t = 0; t < samples_per_snr; ++t) {
      Rng rng = make_stream(cfg.seed ^ 0x636f6d706c6578ULL, si, static_cast<std::uint64_t>(t));
      const CMatrix H = generate_rayleigh(cfg.N, cfg.K, rng);
      PrecoderInput in = make_input(CVector(cfg.K), H, sigma2, cfg.P_T, cfg.scheme);
      in.omega = omega;
      in.rho_convention = cfg.rho_convention;
      for (int k = 0; k < cfg.K; ++k) in.s(k) = con.value(pick(rng));
      try {
        const FactorCache reg = build_factor_cache(in);
        const FactorCache zfc = build_zf_cache(in);
        const auto w = ci_wmmse(in, reg);
        const auto z_lc = ci_zf(in, zfc);
        const auto z_full = ci_zf(in, zfc, full);
        const double kt = w.k_t;
        a.n += 1;
        a.k_t += kt;
        a.l1 += w.nnls_iterations;
        a.l2 += z_full.nnls_iterations;
        a.l3 += z_lc.nnls_iterations;
        a.m1 += mults_ci_wmmse_lc(cfg.N, cfg.K, kt, w.nnls_iterations);
        a.m2 += mults_ci_zf(cfg.N, cfg.K, z_full.nnls_iterations);
        a.m3 += mults_ci_zf_lc(cfg.N, cfg.K, kt, z_lc.nnls_iterations);
      } catch (const FactorizationError&) {
      } catch (const NnlsNonConvergence&) {
      }
    }
  });
  Acc tot;
  for (const auto& a : acc) {
    tot.n += a.n;
    tot.k_t += a.k_t;
    tot.l1 += a.l1;
    tot.l2 += a.l2;
    tot.l3 += a.l3;
    tot.m1 += a.m1;
    tot.m2 += a.m2;
    tot.m3 += a.m3;
  }
  OpCountReport r;
  r.N = cfg.N;
  r.K = cfg.K;
  r.scheme = cfg.scheme;
  r.samples = tot.n;
  r.n_m = normalization_unit(cfg.N, cfg.K);
  if (tot.n > 0) {
    const double n = static_cast<double>(tot.n);
    r.mean_k_t = tot.k_t / n;
    r.mean_loops_ci_wmmse_lc = tot.l1 / n;
    r.mean_loops_ci_zf = tot.l2 / n;
    r.mean_loops_ci_zf_lc = tot.l3 / n;
    r.ratio_ci_wmmse_lc = tot.m1 / n / r.n_m;
    r.ratio_ci_zf = tot.m2 / n / r.n_m;
    r.ratio_ci_zf_lc = tot.m3 / n / r.n_m;
  }
  return r;
}

/// Mean K_T / K over `vectors` uniform symbol vectors of length K.
inline double mean_support_ratio(const ModulationScheme& scheme, int K, long long vectors,
                                 std::uint64_t seed) {
  if (K < 1 || vectors < 1) throw InputError("mean_support_ratio: K and vectors must be >= 1");
  const Constellation con(scheme);
  Rng rng = make_stream(seed, 0x737570706f7274ULL, 0);
  std::uniform_int_distribution<int> pick(0, con.order() - 1);
  std::vector<cplx> s(K);
  long long total = 0;
  for (long long v = 0; v < vectors; ++v) {
    for (auto& x : s) x = con.value(pick(rng));
    total += build_lambda(std::span<const cplx>(s), scheme).k_t();
  }
  return static_cast<double>(total) / (static_cast<double>(vectors) * K);
}

}  // namespace slp
