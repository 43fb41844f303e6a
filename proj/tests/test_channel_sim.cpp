#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "slp/channel_sim.hpp"

namespace slp {
namespace {

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

TEST(Rayleigh, UnitPowerCircularEntries) {
  Rng rng = make_stream(5, 0, 0);
  const CMatrix H = generate_rayleigh(1000, 1000, rng);
  const double n = static_cast<double>(H.size());
  const double power = H.cwiseAbs2().sum() / n;
  const double re_var = H.real().array().square().sum() / n;
  const double im_var = H.imag().array().square().sum() / n;
  const double cross = (H.real().array() * H.imag().array()).sum() / n;
  EXPECT_NEAR(power, 1.0, 0.01);
  EXPECT_NEAR(re_var, 0.5, 0.005);
  EXPECT_NEAR(im_var, 0.5, 0.005);
  EXPECT_NEAR(H.real().mean(), 0.0, 0.005);
  EXPECT_NEAR(cross, 0.0, 0.005);
}

TEST(Rayleigh, StreamsAreReproducibleAndDistinct) {
  Rng a = make_stream(9, 1, 2), b = make_stream(9, 1, 2), c = make_stream(9, 1, 3), d = make_stream(9, 2, 2);
  const CMatrix ha = generate_rayleigh(3, 4, a);
  EXPECT_EQ(ha, generate_rayleigh(3, 4, b));
  EXPECT_NE(ha, generate_rayleigh(3, 4, c));
  EXPECT_NE(ha, generate_rayleigh(3, 4, d));
  EXPECT_EQ(ha.rows(), 4);
  EXPECT_EQ(ha.cols(), 3);
  EXPECT_THROW(generate_rayleigh(0, 2, a), InputError);
}

TEST(Noise, VarianceMatchesSigma2) {
  Rng rng = make_stream(6, 0, 0);
  const CVector n = complex_noise(400000, 0.25, rng);
  EXPECT_NEAR(n.squaredNorm() / 400000.0, 0.25, 0.0025);
  EXPECT_NEAR(n.real().squaredNorm() / 400000.0, 0.125, 0.00125);
}

TEST(Receive, ZeroForcingWithoutNoiseReturnsSymbols) {
  Rng rng = make_stream(7, 0, 0);
  const Constellation con(ModulationScheme::qam(16));
  for (int t = 0; t < 20; ++t) {
    const CMatrix H = generate_rayleigh(5, 4, rng);
    CVector s(4);
    for (int k = 0; k < 4; ++k) s(k) = con.value((t * 5 + k * 3) % 16);
    const auto out = zf(make_input(s, H, 0.0, 2.0, con.scheme()));
    const CVector y = transmit_receive(out.u, H, 0.0, out.gamma, CVector::Ones(4), rng);
    EXPECT_LT((y - s).norm(), 1e-10 * s.norm());
  }
}

TEST(Receive, CiZfWithoutNoiseLandsInRegion) {
  Rng rng = make_stream(8, 0, 0);
  for (const auto scheme : {ModulationScheme::psk(8), ModulationScheme::qam(64)}) {
    const Constellation con(scheme);
    std::uniform_int_distribution<int> pick(0, con.order() - 1);
    for (int t = 0; t < 50; ++t) {
      const CMatrix H = generate_rayleigh(4, 4, rng);
      CVector s(4);
      for (int k = 0; k < 4; ++k) s(k) = con.value(pick(rng));
      const auto out = ci_zf(make_input(s, H, 0.1, 1.0, scheme));
      const CVector y = transmit_receive(out.u, H, 0.0, out.gamma, CVector::Ones(4), rng);
      for (int k = 0; k < 4; ++k) {
        EXPECT_TRUE(cir_contains(s(k), y(k), scheme, 1e-8));
        EXPECT_EQ(con.detect(y(k)).value, s(k));
      }
    }
  }
}

TEST(Receive, NoiseOnlyOutputHasScaledVariance) {
  Rng rng = make_stream(10, 0, 0);
  const CMatrix H = generate_rayleigh(2, 2, rng);
  const CVector a = (CVector(2) << cplx(2, 0), cplx(0, 0.5)).finished();
  double acc0 = 0, acc1 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const CVector y = transmit_receive(CVector::Zero(2), H, 0.5, 2.0, a, rng);
    acc0 += std::norm(y(0));
    acc1 += std::norm(y(1));
  }
  EXPECT_NEAR(acc0 / n, 4.0 * 0.5 / 4.0, 0.01);
  EXPECT_NEAR(acc1 / n, 0.25 * 0.5 / 4.0, 0.01 * 0.0625);
  EXPECT_THROW(receive(CVector::Zero(3), H, CVector::Zero(2), 1.0, a), InputError);
  EXPECT_THROW(receive(CVector::Zero(2), H, CVector::Zero(2), 0.0, a), InputError);
}

TEST(Ser, GuessingFloorAtVanishingSnr) {
  SimConfig c;
  c.N = c.K = 4;
  c.block_length = 50;
  c.snr_grid_db = {-60};
  c.min_symbol_errors = 1;
  c.min_symbols = c.max_symbols = 200000;
  for (const auto& [scheme, floor] : {std::pair{ModulationScheme::psk(4), 0.75},
                                      std::pair{ModulationScheme::qam(16), 15.0 / 16.0}}) {
    c.scheme = scheme;
    c.precoders = {PrecoderKind::ZF, PrecoderKind::CI_MMSE};
    for (const auto& curve : simulate_ser(c)) {
      EXPECT_NEAR(curve.points[0].ser(), floor, 0.02 * floor) << precoder_name(curve.kind);
    }
  }
}

// Per-symbol normalisation makes post-ZF noise CN(0, sigma2 ||x||^2 / P_T) on
// every user, so the QPSK SER given (H, s) is 1 - (1 - Q(1 / sqrt(v)))^2.
TEST(Ser, ZeroForcingQpskMatchesSemiAnalyticAverage) {
  const double snr_db = 10.0;
  const double sigma2 = sigma2_for_snr(snr_db, 1.0);
  const Constellation con(ModulationScheme::psk(4));
  Rng rng = make_stream(1234, 99, 0);
  std::uniform_int_distribution<int> pick(0, 3);
  const int draws = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const CMatrix H = generate_rayleigh(2, 2, rng);
    CVector s(2);
    for (int k = 0; k < 2; ++k) s(k) = con.value(pick(rng));
    const CVector x = H.adjoint() * (H * H.adjoint()).ldlt().solve(s);
    const double v = sigma2 * x.squaredNorm();
    const double p = q_function(1.0 / std::sqrt(v));
    const double ser = 1.0 - (1.0 - p) * (1.0 - p);
    sum += ser;
    sum_sq += ser * ser;
  }
  const double oracle = sum / draws;
  const double oracle_se = std::sqrt((sum_sq / draws - oracle * oracle) / draws);

  SimConfig c;
  c.N = c.K = 2;
  c.scheme = ModulationScheme::psk(4);
  c.precoders = {PrecoderKind::ZF};
  c.snr_grid_db = {snr_db};
  c.block_length = 1;
  c.min_symbol_errors = 1;
  c.min_symbols = c.max_symbols = 400000;
  const SerPoint p = simulate_ser(c)[0].points[0];
  const double sim_se = p.ci_halfwidth() / 1.96;
  EXPECT_GT(oracle, 0.01);
  EXPECT_LT(std::abs(p.ser() - oracle), 4.0 * std::hypot(sim_se, oracle_se))
      << "sim " << p.ser() << " oracle " << oracle;
}

TEST(Ser, IdenticalAcrossThreadCounts) {
  SimConfig c;
  c.N = c.K = 3;
  c.scheme = ModulationScheme::qam(16);
  c.precoders = {PrecoderKind::MMSE, PrecoderKind::CI_ZF, PrecoderKind::CI_MMSE};
  c.snr_grid_db = {0, 10, 20};
  c.block_length = 20;
  c.min_symbol_errors = 30;
  c.min_symbols = c.max_symbols = 20000;
  c.threads = 1;
  const auto a = simulate_ser(c);
  c.threads = 3;
  const auto b = simulate_ser(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].points.size(); ++j) {
      EXPECT_EQ(a[i].points[j].errors, b[i].points[j].errors);
      EXPECT_EQ(a[i].points[j].symbols, b[i].points[j].symbols);
      EXPECT_EQ(a[i].points[j].bit_errors, b[i].points[j].bit_errors);
      EXPECT_EQ(a[i].points[j].block_ser_sq_sum, b[i].points[j].block_ser_sq_sum);
    }
}

TEST(Ser, DecreasesWithSnr) {
  SimConfig c;
  c.N = c.K = 4;
  c.scheme = ModulationScheme::psk(4);
  c.precoders = {PrecoderKind::MMSE, PrecoderKind::CI_ZF, PrecoderKind::CI_MMSE};
  c.snr_grid_db = {0, 4, 8, 12, 16};
  c.block_length = 10;
  c.min_symbol_errors = 1;
  c.min_symbols = c.max_symbols = 100000;
  for (const auto& curve : simulate_ser(c))
    for (std::size_t j = 1; j < curve.points.size(); ++j)
      EXPECT_LT(curve.points[j].ser(), curve.points[j - 1].ser()) << precoder_name(curve.kind) << ' ' << j;
}

TEST(Ser, StoppingRule) {
  SimConfig c;
  c.N = c.K = 2;
  c.scheme = ModulationScheme::psk(4);
  c.precoders = {PrecoderKind::MMSE};
  c.snr_grid_db = {0};
  c.block_length = 10;
  c.min_symbol_errors = 5;
  c.max_symbols = 100000;
  const SerPoint early = simulate_ser(c)[0].points[0];
  EXPECT_GE(early.errors, 5);
  EXPECT_LT(early.symbols, 200);
  c.min_symbols = 3000;
  const SerPoint held = simulate_ser(c)[0].points[0];
  EXPECT_GE(held.symbols, 3000);
  EXPECT_LT(held.symbols, 3020);
  EXPECT_EQ(held.blocks * 20, held.symbols);
  c.min_symbol_errors = 1000000;
  c.min_symbols = 0;
  c.max_symbols = 1000;
  EXPECT_EQ(simulate_ser(c)[0].points[0].symbols, 1000);
}

TEST(Ser, RankDeficientChannelsCountAsFailures) {
  SimConfig c;
  c.N = 1;
  c.K = 2;
  c.scheme = ModulationScheme::psk(4);
  c.precoders = {PrecoderKind::ZF, PrecoderKind::MMSE};
  c.snr_grid_db = {10};
  c.block_length = 5;
  c.max_symbols = 100;
  const auto curves = simulate_ser(c);
  EXPECT_EQ(curves[0].points[0].symbols, 0);
  EXPECT_EQ(curves[0].points[0].failures, 10);
  EXPECT_EQ(curves[1].points[0].failures, 0);
  EXPECT_GT(curves[1].points[0].symbols, 0);
}

TEST(Ser, ConfidenceHalfWidth) {
  SerPoint p;
  p.symbols = 10000;
  p.errors = 100;
  EXPECT_NEAR(p.ci_halfwidth(), 1.96 * std::sqrt(0.01 * 0.99 / 10000), 1e-15);
  // Batch means over 4 blocks of 2500 symbols with SERs 0, 0, 0.02, 0.02.
  p.blocks = 4;
  p.block_ser_sq_sum = 2 * 0.02 * 0.02;
  const double var = (4 * 0.0001 + 0.0) / 3.0;
  EXPECT_NEAR(p.ci_halfwidth(), 1.96 * std::sqrt(var / 4.0), 1e-15);
}

TEST(Ser, InvalidConfigurationIsRejected) {
  SimConfig c;
  c.threads = 0;
  EXPECT_THROW(simulate_ser(c), ConfigError);
  c = {};
  c.omega = {1.0, 2.0};
  EXPECT_THROW(simulate_ser(c), ConfigError);
  c = {};
  c.min_symbols = c.max_symbols + 1;
  EXPECT_THROW(simulate_ser(c), ConfigError);
}

TEST(Complexity, FormulasAtHandEvaluatedPoints) {
  EXPECT_DOUBLE_EQ(normalization_unit(12, 12), 13824.0);
  EXPECT_DOUBLE_EQ(mults_ci_wmmse_lc(12, 12, 12.0, 5.0), 57024.0);
  EXPECT_DOUBLE_EQ(mults_ci_zf(12, 12, 3.0), 55296.0);
  EXPECT_DOUBLE_EQ(mults_ci_zf_lc(12, 12, 12.0, 2.0), 52416.0);
  EXPECT_DOUBLE_EQ(mults_ci_wmmse_lc(2, 3, 1.5, 0.0), 822.0);
}

TEST(Complexity, PskUsesTheFullSupport) {
  SimConfig c;
  c.N = c.K = 4;
  c.scheme = ModulationScheme::psk(8);
  c.snr_grid_db = {0, 20};
  const auto r = complexity_report(c, 50);
  EXPECT_EQ(r.samples, 100);
  EXPECT_DOUBLE_EQ(r.mean_k_t, 8.0);
  // With the full support the reduced and unreduced CI-ZF loops coincide.
  EXPECT_DOUBLE_EQ(r.mean_loops_ci_zf, r.mean_loops_ci_zf_lc);
  EXPECT_GT(r.ratio_ci_wmmse_lc, 0.0);
}

TEST(Complexity, QamSupportAndDeterminism) {
  SimConfig c;
  c.N = c.K = 6;
  c.scheme = ModulationScheme::qam(64);
  c.snr_grid_db = {10, 30};
  const auto r = complexity_report(c, 400);
  EXPECT_NEAR(r.mean_k_t / c.K, 0.5, 0.08);
  EXPECT_LE(r.mean_loops_ci_zf_lc, r.mean_loops_ci_zf);
  c.threads = 2;
  const auto r2 = complexity_report(c, 400);
  EXPECT_EQ(r.ratio_ci_wmmse_lc, r2.ratio_ci_wmmse_lc);
  EXPECT_THROW(complexity_report(c, 0), ConfigError);
}

}  // namespace
}  // namespace slp
