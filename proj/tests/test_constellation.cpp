#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "slp/channel_sim.hpp"
#include "slp/constellation.hpp"

namespace slp {
namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

double mean_energy(const ModulationScheme& scheme) {
  double e = 0.0;
  const auto table = constellation_table(scheme);
  for (const auto& p : table) e += std::norm(p.value);
  return e / table.size();
}

TEST(ConstellationTable, UnitAverageEnergy) {
  for (auto scheme : {ModulationScheme::psk(4), ModulationScheme::psk(8), ModulationScheme::psk(16),
                      ModulationScheme::qam(4), ModulationScheme::qam(16), ModulationScheme::qam(64)}) {
    EXPECT_NEAR(mean_energy(scheme), 1.0, 1e-12) << scheme_name(scheme);
    EXPECT_EQ(static_cast<int>(constellation_table(scheme).size()), scheme.order);
  }
}

TEST(ConstellationTable, QpskIsDiagonalPoints) {
  const auto table = constellation_table(parse_scheme("qpsk"));
  ASSERT_EQ(table.size(), 4u);
  for (const auto& p : table) {
    EXPECT_NEAR(std::abs(p.value.real()), kInvSqrt2, 1e-15);
    EXPECT_NEAR(std::abs(p.value.imag()), kInvSqrt2, 1e-15);
  }
  EXPECT_NEAR(std::abs(table[0].value - cplx(kInvSqrt2, kInvSqrt2)), 0.0, 1e-15);
}

TEST(ConstellationTable, SixteenQamGrid) {
  const auto table = constellation_table(ModulationScheme::qam(16));
  const double s = std::sqrt(10.0);
  for (const auto& p : table) {
    const double re = p.value.real() * s, im = p.value.imag() * s;
    EXPECT_NEAR(std::abs(re - std::round(re)), 0.0, 1e-12);
    EXPECT_TRUE(std::abs(std::round(re)) == 1 || std::abs(std::round(re)) == 3);
    EXPECT_TRUE(std::abs(std::round(im)) == 1 || std::abs(std::round(im)) == 3);
  }
}

TEST(ConstellationTable, PskUnitModulusAndOffset) {
  const auto table = constellation_table(ModulationScheme::psk(8));
  for (int m = 0; m < 8; ++m) {
    EXPECT_NEAR(std::abs(table[m].value), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(table[m].value - std::polar(1.0, 2 * kPi * m / 8 + kPi / 8)), 0.0, 1e-14);
  }
  const auto zero_offset = constellation_table(ModulationScheme::psk(8, 0.0));
  EXPECT_NEAR(std::abs(zero_offset[0].value - cplx(1, 0)), 0.0, 1e-15);
}

TEST(ConstellationTable, RejectsUnsupportedOrders) {
  EXPECT_THROW(constellation_table(ModulationScheme::qam(32)), ConfigError);
  EXPECT_THROW(constellation_table(ModulationScheme::qam(256)), ConfigError);
  EXPECT_THROW(constellation_table(ModulationScheme::psk(6)), ConfigError);
  EXPECT_THROW(constellation_table(ModulationScheme::psk(2)), ConfigError);
  EXPECT_THROW(parse_scheme("8qam"), ConfigError);
  EXPECT_THROW(parse_scheme("bogus"), ConfigError);
  EXPECT_EQ(parse_scheme("64QAM"), ModulationScheme::qam(64));
  EXPECT_EQ(parse_scheme("8psk"), ModulationScheme::psk(8));
}

TEST(GrayLabels, NeighboursDifferInOneBit) {
  // Nearest-neighbour pairs (minimum distance) must differ in exactly one bit.
  for (auto scheme : {ModulationScheme::psk(4), ModulationScheme::psk(8), ModulationScheme::qam(16),
                      ModulationScheme::qam(64)}) {
    const auto t = constellation_table(scheme);
    double dmin = 1e9;
    for (size_t i = 0; i < t.size(); ++i)
      for (size_t j = i + 1; j < t.size(); ++j) dmin = std::min(dmin, std::abs(t[i].value - t[j].value));
    for (size_t i = 0; i < t.size(); ++i)
      for (size_t j = i + 1; j < t.size(); ++j)
        if (std::abs(t[i].value - t[j].value) < dmin * (1 + 1e-9))
          EXPECT_EQ(std::popcount(t[i].bit_label ^ t[j].bit_label), 1) << scheme_name(scheme);
  }
}

TEST(BoundaryParams, QpskFirstQuadrant) {
  const auto b = boundary_params(cplx(kInvSqrt2, kInvSqrt2), ModulationScheme::psk(4));
  EXPECT_EQ(b.free_count, 2);
  EXPECT_NEAR(std::abs(b.mu - cplx(0, 1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(b.nu - cplx(1, 0)), 0.0, 1e-15);
}

TEST(BoundaryParams, PskAngleBetweenDirections) {
  for (int m : {4, 8, 16}) {
    const auto scheme = ModulationScheme::psk(m);
    for (const auto& p : constellation_table(scheme)) {
      const auto b = boundary_params(p, scheme);
      EXPECT_NEAR(std::abs(b.mu), 1.0, 1e-15);
      EXPECT_NEAR(std::abs(b.nu), 1.0, 1e-15);
      EXPECT_NEAR(std::abs(std::arg(b.mu / b.nu)), 2 * kPi / m, 1e-12);
    }
  }
}

TEST(BoundaryParams, SixteenQamInnerEdgeCorner) {
  const auto scheme = ModulationScheme::qam(16);
  const double s = std::sqrt(10.0);
  const auto inner = boundary_params(cplx(1, 1) / s, scheme);
  EXPECT_EQ(inner.free_count, 0);
  EXPECT_EQ(inner.mu, cplx(0, 0));
  EXPECT_EQ(inner.nu, cplx(0, 0));

  const auto corner = boundary_params(cplx(3, 3) / s, scheme);
  EXPECT_EQ(corner.free_count, 2);
  EXPECT_EQ(corner.mu, cplx(1, 0));
  EXPECT_EQ(corner.nu, cplx(0, 1));

  const auto edge = boundary_params(cplx(-3, 1) / s, scheme);
  EXPECT_EQ(edge.free_count, 1);
  EXPECT_EQ(edge.mu, cplx(-1, 0));
  EXPECT_EQ(edge.nu, cplx(0, 0));

  const auto edge_im = boundary_params(cplx(1, -3) / s, scheme);
  EXPECT_EQ(edge_im.free_count, 1);
  EXPECT_EQ(edge_im.nu, cplx(0, -1));
}

// Oracle for the cone: a point is in the CIR iff it detects as s and is at
// least as far from every decision boundary of s as s itself (the region
// bounded by lines through s parallel to the decision boundaries).
bool geometric_cir(const ModulationScheme& scheme, cplx s, cplx c) {
  if (scheme.kind == ModulationKind::PSK) {
    // Decision boundaries: rays at arg(s) +/- pi/M. Signed distance from the
    // boundary line through the origin, measured inward.
    const double phi = std::arg(s);
    for (double sign : {+1.0, -1.0}) {
      const cplx normal = std::polar(1.0, phi + sign * (kPi / scheme.order) - sign * kPi / 2);
      const double ds = (std::conj(normal) * s).real();
      const double dc = (std::conj(normal) * c).real();
      if (dc < ds - 1e-12) return false;
    }
    return true;
  }
  const int side = static_cast<int>(std::lround(std::sqrt(scheme.order)));
  const double scale = std::sqrt(2.0 * (scheme.order - 1) / 3.0);
  const double edge = (side - 1) / scale;
  const auto axis_ok = [&](double sv, double cv) {
    if (std::abs(std::abs(sv) - edge) < 1e-12) return sv > 0 ? cv >= sv - 1e-12 : cv <= sv + 1e-12;
    return std::abs(cv - sv) < 1e-12;
  };
  return axis_ok(s.real(), c.real()) && axis_ok(s.imag(), c.imag());
}

TEST(CirContains, MatchesGeometricOracleOnGrid) {
  for (auto scheme : {ModulationScheme::psk(4), ModulationScheme::psk(8), ModulationScheme::qam(16)}) {
    for (const auto& p : constellation_table(scheme)) {
      for (int i = -20; i <= 20; ++i)
        for (int j = -20; j <= 20; ++j) {
          const cplx c = p.value + cplx(0.05 * i + 0.0123, 0.05 * j - 0.0071);
          EXPECT_EQ(cir_contains(p, c, scheme, 1e-12), geometric_cir(scheme, p.value, c))
              << scheme_name(scheme) << " s=" << p.value << " c=" << c;
        }
      // Points on the cone itself (a grid on the s-aligned axes) are inside.
      const auto b = boundary_params(p, scheme);
      EXPECT_TRUE(cir_contains(p, p.value + 0.3 * b.mu + 0.7 * b.nu, scheme, 1e-12));
    }
  }
}

TEST(CirContains, ReferenceExamples) {
  const auto qpsk = ModulationScheme::psk(4);
  const cplx s(kInvSqrt2, kInvSqrt2);
  EXPECT_TRUE(cir_contains(s, s, qpsk, 1e-12));
  EXPECT_TRUE(cir_contains(s, 2.0 * s, qpsk, 1e-12));
  EXPECT_FALSE(cir_contains(s, 0.5 * s, qpsk, 1e-12));
  const auto q16 = ModulationScheme::qam(16);
  const cplx inner = cplx(1, 1) / std::sqrt(10.0);
  EXPECT_TRUE(cir_contains(inner, inner, q16, 1e-12));
  EXPECT_FALSE(cir_contains(inner, inner + 0.1, q16, 1e-12));
}

TEST(Detect, ReferenceExamples) {
  const auto qpsk = ModulationScheme::psk(4);
  EXPECT_NEAR(std::abs(detect(cplx(3, 0.5), qpsk).value - cplx(kInvSqrt2, kInvSqrt2)), 0, 1e-15);
  for (auto scheme : {ModulationScheme::psk(8), ModulationScheme::qam(16), ModulationScheme::qam(64)})
    for (const auto& p : constellation_table(scheme)) EXPECT_EQ(detect(p.value, scheme).index, p.index);
}

TEST(Detect, SlicerMatchesBruteForceIncludingTies) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto scheme : {ModulationScheme::qam(4), ModulationScheme::qam(16), ModulationScheme::qam(64),
                      ModulationScheme::psk(8)}) {
    const Constellation con(scheme);
    for (int i = 0; i < 20000; ++i) {
      const cplx y(g(rng), g(rng));
      EXPECT_EQ(con.detect_index(y), oracle::brute_force_detect(con.points(), y));
    }
    // Midpoints between any two points resolve to the lowest index among the
    // (numerically) equidistant nearest points.
    for (const auto& p : con.points())
      for (const auto& q : con.points()) {
        const cplx mid = 0.5 * (p.value + q.value);
        double dmin = 1e9;
        for (const auto& r : con.points()) dmin = std::min(dmin, std::abs(mid - r.value));
        int expected = -1;
        for (const auto& r : con.points())
          if (std::abs(mid - r.value) <= dmin + 1e-12) {
            expected = r.index;
            break;
          }
        EXPECT_EQ(con.detect_index(mid), expected) << scheme_name(scheme) << " " << mid;
      }
  }
  const Constellation qam(ModulationScheme::qam(16));
  EXPECT_EQ(qam.detect_index(cplx(0, 0)), oracle::brute_force_detect(qam.points(), cplx(0, 0)));
}

TEST(Detect, CirIsInsideDecisionRegion) {
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> ex(1.0);
  for (auto scheme : {ModulationScheme::psk(4), ModulationScheme::psk(8), ModulationScheme::qam(16),
                      ModulationScheme::qam(64)}) {
    const Constellation con(scheme);
    for (const auto& p : con.points()) {
      const auto b = boundary_params(p, scheme);
      for (int i = 0; i < 200; ++i) {
        const cplx y = p.value + ex(rng) * b.mu + ex(rng) * b.nu;
        EXPECT_EQ(con.detect_index(y), p.index);
      }
    }
  }
}

TEST(BuildLambda, ReferenceExamples) {
  const std::vector<cplx> q{cplx(kInvSqrt2, kInvSqrt2)};
  const auto lam = build_lambda(std::span<const cplx>(q), ModulationScheme::psk(4));
  RMatrix expected(2, 2);
  expected << 0, 1, 1, 0;
  EXPECT_LT((lam.matrix - expected).norm(), 1e-15);
  EXPECT_EQ(lam.k_t(), 2);

  const double s = std::sqrt(10.0);
  const std::vector<cplx> inner{cplx(1, -1) / s};
  const auto lam_inner = build_lambda(std::span<const cplx>(inner), ModulationScheme::qam(16));
  EXPECT_EQ(lam_inner.matrix.norm(), 0.0);
  EXPECT_EQ(lam_inner.k_t(), 0);

  const std::vector<cplx> mixed{cplx(3, -3) / s, cplx(1, 1) / s};
  const auto lam_mixed = build_lambda(std::span<const cplx>(mixed), ModulationScheme::qam(16));
  EXPECT_EQ(lam_mixed.k_t(), 2);
  EXPECT_EQ(lam_mixed.support, (std::vector<int>{0, 2}));
}

TEST(BuildLambda, StackedFormDecomposesIntoPerUserCirPoints) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> ex(1.0);
  for (auto scheme : {ModulationScheme::psk(8), ModulationScheme::qam(16), ModulationScheme::qam(64)}) {
    const Constellation con(scheme);
    std::uniform_int_distribution<int> pick(0, con.order() - 1);
    for (int trial = 0; trial < 200; ++trial) {
      const int K = 1 + trial % 7;
      CVector s(K);
      for (int k = 0; k < K; ++k) s(k) = con.value(pick(rng));
      const auto lam = build_lambda(std::span<const cplx>(s.data(), K), scheme);
      RVector delta(2 * K);
      for (int i = 0; i < 2 * K; ++i) delta(i) = ex(rng);
      const CVector t = complexify_vector(realify_vector(s) + lam.matrix * delta);
      int kt = 0;
      for (int k = 0; k < K; ++k) {
        EXPECT_TRUE(cir_contains(s(k), t(k), scheme, 1e-12));
        kt += boundary_params(s(k), scheme).free_count;
      }
      EXPECT_EQ(kt, lam.k_t());
      // Block-of-diagonals structure.
      for (int r = 0; r < 2 * K; ++r)
        for (int c = 0; c < 2 * K; ++c)
          if (r % K != c % K) EXPECT_EQ(lam.matrix(r, c), 0.0);
    }
  }
}

TEST(SupportStatistics, ExpectedKtPerModulation) {
  EXPECT_NEAR(mean_support_ratio(ModulationScheme::qam(16), 12, 100000, 1), 1.0, 0.02);
  EXPECT_NEAR(mean_support_ratio(ModulationScheme::qam(64), 12, 100000, 1), 0.5, 0.01);
  EXPECT_EQ(mean_support_ratio(ModulationScheme::psk(8), 12, 1000, 1), 2.0);
}

TEST(BitMapping, EmptyAndRoundTrip) {
  for (auto scheme : {ModulationScheme::psk(4), ModulationScheme::psk(8), ModulationScheme::qam(16),
                      ModulationScheme::qam(64)}) {
    EXPECT_TRUE(map_bits({}, scheme).empty());
    std::mt19937_64 rng(9);
    std::vector<std::uint8_t> bits(bits_per_symbol(scheme) * 500);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1U);
    const auto symbols = map_bits(bits, scheme);
    EXPECT_EQ(symbols.size(), 500u);
    EXPECT_EQ(demap_symbols(symbols, scheme), bits);
  }
}

TEST(BitMapping, DocumentedConventions) {
  const auto qpsk = ModulationScheme::psk(4);
  const std::vector<std::uint8_t> b00{0, 0}, b01{0, 1}, b11{1, 1}, b10{1, 0};
  EXPECT_NEAR(std::abs(map_bits(b00, qpsk)[0] - cplx(kInvSqrt2, kInvSqrt2)), 0, 1e-15);
  EXPECT_NEAR(std::abs(map_bits(b01, qpsk)[0] - cplx(-kInvSqrt2, kInvSqrt2)), 0, 1e-15);
  EXPECT_NEAR(std::abs(map_bits(b11, qpsk)[0] - cplx(-kInvSqrt2, -kInvSqrt2)), 0, 1e-15);
  EXPECT_NEAR(std::abs(map_bits(b10, qpsk)[0] - cplx(kInvSqrt2, -kInvSqrt2)), 0, 1e-15);
  const std::vector<std::uint8_t> zeros(4, 0);
  EXPECT_NEAR(std::abs(map_bits(zeros, ModulationScheme::qam(16))[0] - cplx(-3, -3) / std::sqrt(10.0)),
              0, 1e-15);
}

TEST(BitMapping, LengthMismatchThrows) {
  const std::vector<std::uint8_t> bits{0, 1, 1};
  EXPECT_THROW(map_bits(bits, ModulationScheme::qam(16)), InputError);
  const std::vector<std::uint8_t> bad{0, 2};
  EXPECT_THROW(map_bits(bad, ModulationScheme::psk(4)), InputError);
}

}  // namespace
}  // namespace slp
