#pragma once

// Real-valued stacking of the complex model: vectors become [Re; Im] and
// matrices [[Re, -Im], [Im, Re]], so that realify(M v) = realify(M) realify(v).

#include <string>

#include "slp/errors.hpp"
#include "slp/linalg.hpp"

namespace slp {

inline RVector realify_vector(const CVector& v) {
  const auto n = v.size();
  RVector out(2 * n);
  out.head(n) = v.real();
  out.tail(n) = v.imag();
  return out;
}

inline RMatrix realify_matrix(const CMatrix& m) {
  const auto r = m.rows();
  const auto c = m.cols();
  RMatrix out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = m.real();
  out.topRightCorner(r, c) = -m.imag();
  out.bottomLeftCorner(r, c) = m.imag();
  out.bottomRightCorner(r, c) = m.real();
  return out;
}

inline CVector complexify_vector(const RVector& v) {
  if (v.size() % 2 != 0)
    throw InputError("complexify_vector: odd length " + std::to_string(v.size()));
  const auto n = v.size() / 2;
  CVector out(n);
  out.real() = v.head(n);
  out.imag() = v.tail(n);
  return out;
}

/// Stacked real forms of one precoding instance.
struct RealEmbedding {
  RVector s_bar;
  RMatrix H_bar;
  RMatrix A_bar;
  /// Diagonal of diag(Omega, Omega).
  RVector omega_bar;
};

inline RealEmbedding embed(const CVector& s, const CMatrix& H, const CVector& a_diag,
                           const RVector& omega_diag) {
  if (H.rows() != s.size() || a_diag.size() != s.size() || omega_diag.size() != s.size())
    throw InputError("embed: dimension mismatch");
  RealEmbedding e;
  e.s_bar = realify_vector(s);
  e.H_bar = realify_matrix(H);
  e.A_bar = realify_matrix(CMatrix(a_diag.asDiagonal()));
  e.omega_bar.resize(2 * omega_diag.size());
  e.omega_bar << omega_diag, omega_diag;
  return e;
}

}  // namespace slp
