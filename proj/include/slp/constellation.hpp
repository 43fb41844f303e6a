#pragma once

// PSK / square-QAM constellations, Gray labelling, ML detection and the
// constructive-interference-region (CIR) geometry built on top of them.
//
// Every constellation is normalised to unit average symbol energy. Bit
// strings are Gray coded, most significant bit first:
//   * PSK: point m sits at phase 2*pi*m/M + offset and carries label gray(m).
//     With the default offset pi/M, QPSK bits "00" map to (1+j)/sqrt(2),
//     "01" to (-1+j)/sqrt(2), "11" to (-1-j)/sqrt(2), "10" to (1-j)/sqrt(2).
//   * QAM: point index = i_re * sqrt(M) + i_im, where level i is
//     (2i - (sqrt(M)-1)) / scale in ascending order. The first half of the
//     label is gray(i_re), the second half gray(i_im); "0000" is the 16QAM
//     corner (-3-3j)/sqrt(10).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slp/errors.hpp"
#include "slp/linalg.hpp"

namespace slp {

enum class ModulationKind { PSK, QAM };

struct ModulationScheme {
  ModulationKind kind = ModulationKind::QAM;
  int order = 16;
  /// PSK only; unset means pi/M.
  std::optional<double> phase_offset;

  static ModulationScheme psk(int order, std::optional<double> offset = std::nullopt) {
    return {ModulationKind::PSK, order, offset};
  }
  static ModulationScheme qam(int order) { return {ModulationKind::QAM, order, std::nullopt}; }

  double psk_offset() const { return phase_offset.value_or(kPi / order); }

  friend bool operator==(const ModulationScheme&, const ModulationScheme&) = default;
};

namespace detail {

inline bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

inline int ilog2(int v) {
  int r = 0;
  while ((1 << r) < v) ++r;
  return r;
}

inline std::uint32_t gray(std::uint32_t v) { return v ^ (v >> 1); }

inline std::uint32_t inverse_gray(std::uint32_t g) {
  std::uint32_t v = 0;
  for (; g != 0; g >>= 1) v ^= g;
  return v;
}

inline int qam_side(int order) {
  return static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
}

// 16QAM -> sqrt(10), 64QAM -> sqrt(42), 4QAM -> sqrt(2).
inline double qam_scale(int order) { return std::sqrt(2.0 * (order - 1) / 3.0); }

}  // namespace detail

/// Throws ConfigError unless the scheme is one this library supports.
inline void validate(const ModulationScheme& scheme) {
  if (scheme.kind == ModulationKind::PSK) {
    // A two-direction cone cannot describe the BPSK half-plane, so M >= 4.
    if (scheme.order < 4 || !detail::is_pow2(scheme.order))
      throw ConfigError("PSK order must be a power of two >= 4, got " +
                        std::to_string(scheme.order));
    if (scheme.phase_offset && !std::isfinite(*scheme.phase_offset))
      throw ConfigError("PSK phase offset must be finite");
  } else {
    if (scheme.order != 4 && scheme.order != 16 && scheme.order != 64)
      throw ConfigError("QAM order must be 4, 16 or 64, got " + std::to_string(scheme.order));
  }
}

inline int bits_per_symbol(const ModulationScheme& scheme) { return detail::ilog2(scheme.order); }

/// Parses the config/CLI names "qpsk", "8psk", "16psk", "4qam", "16qam", "64qam".
inline ModulationScheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "qpsk") return ModulationScheme::psk(4);
  const auto parse_order = [&](std::string_view suffix) -> std::optional<int> {
    if (lower.size() <= suffix.size() || !lower.ends_with(suffix)) return std::nullopt;
    const std::string digits = lower.substr(0, lower.size() - suffix.size());
    if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
      return std::nullopt;
    return std::stoi(digits);
  };
  ModulationScheme scheme;
  if (auto m = parse_order("psk")) {
    scheme = ModulationScheme::psk(*m);
  } else if (auto m = parse_order("qam")) {
    scheme = ModulationScheme::qam(*m);
  } else {
    throw ConfigError("unknown modulation scheme '" + std::string(name) + "'");
  }
  validate(scheme);
  return scheme;
}

inline std::string scheme_name(const ModulationScheme& scheme) {
  if (scheme.kind == ModulationKind::PSK)
    return scheme.order == 4 ? "qpsk" : std::to_string(scheme.order) + "psk";
  return std::to_string(scheme.order) + "qam";
}

struct ConstellationPoint {
  cplx value;
  int index = 0;
  /// Gray label, log2(M) bits, MSB first.
  std::uint32_t bit_label = 0;
};

/// CIR of a symbol s: { s + d_mu * mu + d_nu * nu : d_mu, d_nu >= 0 }.
/// Zero directions are fixed coordinates.
struct CirBoundary {
  cplx mu{0.0, 0.0};
  cplx nu{0.0, 0.0};
  int free_count = 0;
};

inline std::vector<ConstellationPoint> constellation_table(const ModulationScheme& scheme) {
  validate(scheme);
  const int m = scheme.order;
  std::vector<ConstellationPoint> table;
  table.reserve(m);
  if (scheme.kind == ModulationKind::PSK) {
    const double offset = scheme.psk_offset();
    for (int i = 0; i < m; ++i) {
      const double phase = 2.0 * kPi * i / m + offset;
      table.push_back({std::polar(1.0, phase), i, detail::gray(static_cast<std::uint32_t>(i))});
    }
  } else {
    const int side = detail::qam_side(m);
    const int half_bits = detail::ilog2(side);
    const double scale = detail::qam_scale(m);
    for (int ir = 0; ir < side; ++ir) {
      for (int ii = 0; ii < side; ++ii) {
        const double re = (2.0 * ir - (side - 1)) / scale;
        const double im = (2.0 * ii - (side - 1)) / scale;
        const std::uint32_t label =
            (detail::gray(static_cast<std::uint32_t>(ir)) << half_bits) |
            detail::gray(static_cast<std::uint32_t>(ii));
        table.push_back({cplx(re, im), ir * side + ii, label});
      }
    }
  }
  return table;
}

/// CIR direction vectors of a constellation value. PSK opens the cone along
/// phi +/- pi/M; QAM extends only the outermost coordinates, outward.
inline CirBoundary boundary_params(cplx s, const ModulationScheme& scheme) {
  CirBoundary b;
  if (scheme.kind == ModulationKind::PSK) {
    const double phi = std::arg(s);
    b.mu = std::polar(1.0, phi + kPi / scheme.order);
    b.nu = std::polar(1.0, phi - kPi / scheme.order);
    b.free_count = 2;
    return b;
  }
  const int side = detail::qam_side(scheme.order);
  const double edge = (side - 1) / detail::qam_scale(scheme.order);
  const double thresh = edge * (1.0 - 1e-9);
  if (std::abs(s.real()) >= thresh) {
    b.mu = cplx(s.real() > 0 ? 1.0 : -1.0, 0.0);
    ++b.free_count;
  }
  if (std::abs(s.imag()) >= thresh) {
    b.nu = cplx(0.0, s.imag() > 0 ? 1.0 : -1.0);
    ++b.free_count;
  }
  return b;
}

inline CirBoundary boundary_params(const ConstellationPoint& s, const ModulationScheme& scheme) {
  return boundary_params(s.value, scheme);
}

/// Stacked CIR matrix [[M_R, N_R], [M_I, N_I]] acting on
/// delta = [d_mu_1..d_mu_K, d_nu_1..d_nu_K].
struct CirLambda {
  RMatrix matrix;
  /// Columns of `matrix` that are not identically zero, ascending.
  std::vector<int> support;

  int k_t() const { return static_cast<int>(support.size()); }
};

inline CirLambda build_lambda(std::span<const cplx> symbols, const ModulationScheme& scheme) {
  const auto k = static_cast<Eigen::Index>(symbols.size());
  CirLambda lam;
  lam.matrix = RMatrix::Zero(2 * k, 2 * k);
  std::vector<int> nu_cols;
  for (Eigen::Index i = 0; i < k; ++i) {
    const CirBoundary b = boundary_params(symbols[i], scheme);
    lam.matrix(i, i) = b.mu.real();
    lam.matrix(k + i, i) = b.mu.imag();
    lam.matrix(i, k + i) = b.nu.real();
    lam.matrix(k + i, k + i) = b.nu.imag();
    if (b.mu != cplx(0.0, 0.0)) lam.support.push_back(static_cast<int>(i));
    if (b.nu != cplx(0.0, 0.0)) nu_cols.push_back(static_cast<int>(k + i));
  }
  lam.support.insert(lam.support.end(), nu_cols.begin(), nu_cols.end());
  return lam;
}

inline CirLambda build_lambda(std::span<const ConstellationPoint> symbols,
                              const ModulationScheme& scheme) {
  std::vector<cplx> values;
  values.reserve(symbols.size());
  for (const auto& p : symbols) values.push_back(p.value);
  return build_lambda(std::span<const cplx>(values), scheme);
}

/// Membership of `candidate` in the closed CIR of `s`, with slack `tol`.
inline bool cir_contains(cplx s, cplx candidate, const ModulationScheme& scheme, double tol) {
  const CirBoundary b = boundary_params(s, scheme);
  const cplx diff = candidate - s;
  switch (b.free_count) {
    case 0:
      return std::abs(diff) <= tol;
    case 1: {
      const cplx dir = b.mu != cplx(0.0, 0.0) ? b.mu : b.nu;
      // dir has unit modulus: split diff into along / across components.
      const cplx rotated = std::conj(dir) * diff;
      return rotated.real() >= -tol && std::abs(rotated.imag()) <= tol;
    }
    default: {
      const double det = b.mu.real() * b.nu.imag() - b.nu.real() * b.mu.imag();
      const double d_mu = (diff.real() * b.nu.imag() - b.nu.real() * diff.imag()) / det;
      const double d_nu = (b.mu.real() * diff.imag() - diff.real() * b.mu.imag()) / det;
      return d_mu >= -tol && d_nu >= -tol;
    }
  }
}

inline bool cir_contains(const ConstellationPoint& s, cplx candidate, const ModulationScheme& scheme,
                         double tol) {
  return cir_contains(s.value, candidate, scheme, tol);
}

/// Immutable lookup object for a scheme: table, detector and bit mapper.
class Constellation {
 public:
  explicit Constellation(ModulationScheme scheme)
      : scheme_(scheme), points_(constellation_table(scheme)), bits_(slp::bits_per_symbol(scheme)) {
    index_of_label_.resize(points_.size());
    for (const auto& p : points_) index_of_label_[p.bit_label] = p.index;
    if (scheme_.kind == ModulationKind::QAM) {
      side_ = detail::qam_side(scheme_.order);
      scale_ = detail::qam_scale(scheme_.order);
    }
  }

  const ModulationScheme& scheme() const { return scheme_; }
  int order() const { return scheme_.order; }
  int bits_per_symbol() const { return bits_; }
  const std::vector<ConstellationPoint>& points() const { return points_; }
  const ConstellationPoint& point(int index) const { return points_.at(index); }
  cplx value(int index) const { return points_[index].value; }

  /// ML decision: nearest point; distances within 1e-12 count as ties and go to the lowest index.
  int detect_index(cplx y) const {
    if (scheme_.kind == ModulationKind::QAM) {
      return slice(y.real()) * side_ + slice(y.imag());
    }
    double best_d = std::abs(y - points_[0].value);
    for (const auto& p : points_) best_d = std::min(best_d, std::abs(y - p.value));
    for (const auto& p : points_)
      if (std::abs(y - p.value) <= best_d + 1e-12) return p.index;
    return 0;
  }

  const ConstellationPoint& detect(cplx y) const { return points_[detect_index(y)]; }

  /// Gray maps an MSB-first bit string (values 0/1) to point indices.
  std::vector<int> map_bits(std::span<const std::uint8_t> bits) const {
    if (bits.size() % static_cast<std::size_t>(bits_) != 0)
      throw InputError("bit count " + std::to_string(bits.size()) + " is not a multiple of " +
                       std::to_string(bits_));
    std::vector<int> out;
    out.reserve(bits.size() / bits_);
    for (std::size_t i = 0; i < bits.size(); i += bits_) {
      std::uint32_t label = 0;
      for (int b = 0; b < bits_; ++b) {
        if (bits[i + b] > 1) throw InputError("bit values must be 0 or 1");
        label = (label << 1) | bits[i + b];
      }
      out.push_back(index_of_label_[label]);
    }
    return out;
  }

  std::vector<std::uint8_t> demap_symbols(std::span<const int> indices) const {
    std::vector<std::uint8_t> out;
    out.reserve(indices.size() * bits_);
    for (int idx : indices) {
      const std::uint32_t label = points_.at(idx).bit_label;
      for (int b = bits_ - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((label >> b) & 1U));
    }
    return out;
  }

 private:
  // Level index on one QAM axis; a value on (or within 1e-9 of) a threshold goes to the lower level.
  int slice(double v) const {
    const double t = (v * scale_ + (side_ - 1)) / 2.0;
    const double i = std::ceil(t - 0.5 - 1e-9);
    return static_cast<int>(std::clamp(i, 0.0, static_cast<double>(side_ - 1)));
  }

  ModulationScheme scheme_;
  std::vector<ConstellationPoint> points_;
  int bits_;
  std::vector<int> index_of_label_;
  int side_ = 0;
  double scale_ = 1.0;
};

inline ConstellationPoint detect(cplx y, const ModulationScheme& scheme) {
  // Tables are small; callers on hot paths should hold a Constellation.
  thread_local std::optional<Constellation> cached;
  if (!cached || !(cached->scheme() == scheme)) cached.emplace(scheme);
  return cached->detect(y);
}

inline std::vector<cplx> map_bits(std::span<const std::uint8_t> bits, const ModulationScheme& scheme) {
  const Constellation c(scheme);
  std::vector<cplx> out;
  for (int idx : c.map_bits(bits)) out.push_back(c.value(idx));
  return out;
}

inline std::vector<std::uint8_t> demap_symbols(std::span<const cplx> symbols,
                                               const ModulationScheme& scheme) {
  const Constellation c(scheme);
  std::vector<int> idx;
  idx.reserve(symbols.size());
  for (cplx s : symbols) idx.push_back(c.detect_index(s));
  return c.demap_symbols(idx);
}

}  // namespace slp
