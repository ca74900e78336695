#pragma once

// Dense realizations of sparse Pauli operators: matrices on explicit site
// lists, matrix-free string application, spectral/trace norms, and the
// Pauli transform (dense matrix -> string coefficients).
//
// Basis convention: for a sorted site list (s_0 < s_1 < ... < s_{n-1}),
// basis index bit q (LSB = q 0) is the spin on site s_q, with bit 0 = up
// (sigma^z eigenvalue +1) and bit 1 = down (eigenvalue -1).

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <vector>

#include "spinlab/errors.hpp"
#include "spinlab/pauli.hpp"
#include "spinlab/util.hpp"

namespace spinlab {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

inline constexpr int kDenseNormLimit = 12;   // power-iteration ceiling (sites)
inline constexpr int kDenseMatrixLimit = 12; // explicit-matrix ceiling (sites)

/// One Pauli string compiled to bit masks over a fixed site list:
/// applying it to basis state |n> gives coeff * parity * |n ^ flip_mask>
/// with parity = (-1)^popcount(n & sign_mask). The i^{#Y} factor and the
/// term coefficient are folded into `coeff`.
struct CompiledTerm {
  std::uint64_t flip_mask = 0;  // X and Y positions
  std::uint64_t sign_mask = 0;  // Y and Z positions
  cplx coeff;
};

/// A LocalOperator compiled against a sorted site list for fast
/// matrix-free application to dense vectors.
class CompiledOperator {
 public:
  CompiledOperator() = default;

  CompiledOperator(const LocalOperator& a, const std::vector<int>& sites) : sites_(sites) {
    if (sites.size() > 8 * sizeof(std::uint64_t))
      throw SupportTooLarge("compiled operator limited to 64 sites");
    dim_ = std::size_t{1} << sites.size();
    terms_.reserve(a.num_terms());
    for (const auto& [p, c] : a.terms()) {
      CompiledTerm t;
      int ny = 0;
      for (const auto& [site, l] : p.letters) {
        const auto it = std::lower_bound(sites.begin(), sites.end(), site);
        if (it == sites.end() || *it != site)
          throw SupportOutsideWindow("operator support not contained in site list");
        const std::uint64_t bit = std::uint64_t{1} << (it - sites.begin());
        if (l == Letter::X) {
          t.flip_mask |= bit;
        } else if (l == Letter::Y) {
          t.flip_mask |= bit;
          t.sign_mask |= bit;
          ++ny;
        } else {
          t.sign_mask |= bit;
        }
      }
      static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      t.coeff = c * ipow[ny % 4];
      terms_.push_back(t);
    }
  }

  std::size_t dim() const { return dim_; }
  const std::vector<int>& sites() const { return sites_; }

  /// y += A x (y must be presized to dim and zero-initialized by caller).
  void apply_add(const VectorXc& x, VectorXc& y) const {
    for (const CompiledTerm& t : terms_) {
      for (std::size_t n = 0; n < dim_; ++n) {
        const bool odd = std::popcount(n & t.sign_mask) & 1;
        const cplx v = odd ? -t.coeff : t.coeff;
        y[n ^ t.flip_mask] += v * x[n];
      }
    }
  }

  VectorXc apply(const VectorXc& x) const {
    VectorXc y = VectorXc::Zero(static_cast<Eigen::Index>(dim_));
    apply_add(x, y);
    return y;
  }

 private:
  std::vector<int> sites_;
  std::size_t dim_ = 1;
  std::vector<CompiledTerm> terms_;
};

/// Dense matrix of A on the given sorted site list (throws if the support
/// is not contained in it, or the list exceeds the dense ceiling).
inline MatrixXc dense_on(const LocalOperator& a, const std::vector<int>& sites) {
  if (static_cast<int>(sites.size()) > kDenseMatrixLimit)
    throw SupportTooLarge("dense matrix requested on more than " +
                          std::to_string(kDenseMatrixLimit) + " sites");
  const CompiledOperator op(a, sites);
  const std::size_t d = op.dim();
  MatrixXc m = MatrixXc::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  VectorXc e = VectorXc::Zero(static_cast<Eigen::Index>(d));
  VectorXc col(static_cast<Eigen::Index>(d));
  for (std::size_t n = 0; n < d; ++n) {
    e[n] = 1;
    col.setZero();
    op.apply_add(e, col);
    m.col(static_cast<Eigen::Index>(n)) = col;
    e[n] = 0;
  }
  return m;
}

/// Dense matrix of A on its own support.
inline MatrixXc dense(const LocalOperator& a) { return dense_on(a, a.support()); }

/// Pauli transform of a dense matrix on `sites`: returns the LocalOperator
/// with the same matrix. Runs a per-qubit butterfly in O(n 4^n). Terms with
/// |coefficient| <= drop_tol are discarded (pass 0 to keep everything).
inline LocalOperator pauli_decompose(const MatrixXc& m, const std::vector<int>& sites,
                                     double drop_tol = 0.0) {
  const int n = static_cast<int>(sites.size());
  const std::size_t d = std::size_t{1} << n;
  if (m.rows() != static_cast<Eigen::Index>(d) || m.cols() != static_cast<Eigen::Index>(d))
    throw InvalidInput("pauli_decompose: matrix dimension does not match site count");
  // work[r * d + c] starts as the matrix entry; after the butterfly on every
  // qubit, the (r_q, c_q) bit pair encodes the letter on site q:
  // (0,0)=identity, (0,1)=X, (1,0)=Y, (1,1)=Z.
  std::vector<cplx> work(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) work[r * d + c] = m(static_cast<Eigen::Index>(r),
                                                           static_cast<Eigen::Index>(c));
  const cplx half(0.5, 0), ihalf(0, 0.5);
  for (int q = 0; q < n; ++q) {
    const std::size_t rb = d << q;  // stride of the row bit within work
    const std::size_t cb = std::size_t{1} << q;
    for (std::size_t base = 0; base < d * d; ++base) {
      if ((base & rb) || (base & cb)) continue;
      const cplx m00 = work[base];
      const cplx m01 = work[base + cb];
      const cplx m10 = work[base + rb];
      const cplx m11 = work[base + rb + cb];
      work[base] = half * (m00 + m11);            // identity
      work[base + cb] = half * (m01 + m10);       // X
      work[base + rb] = ihalf * (m01 - m10);      // Y  (a_Y = i(M01 - M10)/2)
      work[base + rb + cb] = half * (m00 - m11);  // Z
    }
  }
  LocalOperator::TermMap out;
  for (std::size_t idx = 0; idx < d * d; ++idx) {
    const cplx c = work[idx];
    if (c == cplx(0, 0) || std::abs(c) <= drop_tol) continue;
    PauliString p;
    for (int q = 0; q < n; ++q) {
      const int code = ((idx >> (n + q)) & 1) * 2 + ((idx >> q) & 1);
      if (code != 0) p.letters.emplace_back(sites[q], static_cast<Letter>(code));
    }
    // letters were appended in ascending site order already
    out[std::move(p)] += c;
  }
  return LocalOperator::from_map(std::move(out));
}

namespace detail {

/// Largest eigenvalue of the PSD map x -> A†(A x) by power iteration with a
/// deterministic start; returns ‖A‖. Convergence on the Rayleigh quotient.
inline double power_iteration_norm(const CompiledOperator& op, const CompiledOperator& op_dag) {
  const std::size_t d = op.dim();
  VectorXc v(static_cast<Eigen::Index>(d));
  // Fixed, seedless start vector: decorrelated from Pauli structure.
  std::uint64_t s = 0x9e3779b97f4a7c15ull;
  for (std::size_t n = 0; n < d; ++n) {
    s ^= s >> 12;
    s *= 0x2545f4914f6cdd1dull;
    s ^= s << 25;
    s ^= s >> 27;
    const double re = static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
    s ^= s >> 12;
    s *= 0x2545f4914f6cdd1dull;
    s ^= s << 25;
    s ^= s >> 27;
    const double im = static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
    v[n] = cplx(re, im);
  }
  v.normalize();
  double lambda = 0.0;
  VectorXc w = VectorXc::Zero(static_cast<Eigen::Index>(d));
  VectorXc u = VectorXc::Zero(static_cast<Eigen::Index>(d));
  for (int it = 0; it < 10000; ++it) {
    w.setZero();
    op.apply_add(v, w);
    u.setZero();
    op_dag.apply_add(w, u);  // u = A†A v
    const double next = std::real(v.dot(u));
    const double nu = u.norm();
    if (nu == 0.0) return 0.0;
    v = u / nu;
    if (it > 2 && std::abs(next - lambda) <= 1e-14 * std::max(next, 1e-300)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace detail

/// Spectral norm of A on its support. Dense SVD up to 7 sites, matrix-free
/// power iteration beyond, hard ceiling `dense_limit` sites.
inline double operator_norm(const LocalOperator& a, int dense_limit = kDenseNormLimit) {
  const auto& supp = a.support();
  if (supp.empty()) return std::abs(a.coeff(PauliString{}));
  if (static_cast<int>(supp.size()) > dense_limit)
    throw SupportTooLarge("operator norm: support of " + std::to_string(supp.size()) +
                          " sites exceeds limit " + std::to_string(dense_limit));
  if (supp.size() <= 7) {
    const MatrixXc m = dense_on(a, supp);
    Eigen::JacobiSVD<MatrixXc> svd(m);
    return svd.singularValues()(0);
  }
  const CompiledOperator op(a, supp);
  const CompiledOperator op_dag(adjoint(a), supp);
  return detail::power_iteration_norm(op, op_dag);
}

/// Trace norm (sum of singular values) of a dense matrix.
inline double trace_norm(const MatrixXc& m) {
  Eigen::JacobiSVD<MatrixXc> svd(m);
  return svd.singularValues().sum();
}

/// Tr(rho * A) with rho dense on `sites` and A sparse: O(terms * 2^n).
/// Uses (rho P)_nn = rho(n, n^flip) * ph(n) for each string P.
inline cplx dense_trace_product(const MatrixXc& rho, const LocalOperator& a,
                                const std::vector<int>& sites) {
  const std::size_t d = static_cast<std::size_t>(rho.rows());
  cplx total(0, 0);
  for (const auto& [p, c] : a.terms()) {
    std::uint64_t flip = 0, sign = 0;
    int ny = 0;
    for (const auto& [site, l] : p.letters) {
      const auto it = std::lower_bound(sites.begin(), sites.end(), site);
      if (it == sites.end() || *it != site)
        throw SupportOutsideWindow("trace: operator support not contained in site list");
      const std::uint64_t bit = std::uint64_t{1} << (it - sites.begin());
      if (l == Letter::X) flip |= bit;
      if (l == Letter::Y) { flip |= bit; sign |= bit; ++ny; }
      if (l == Letter::Z) sign |= bit;
    }
    static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const cplx cc = c * ipow[ny % 4];
    cplx tr(0, 0);
    for (std::size_t n = 0; n < d; ++n) {
      const bool odd = std::popcount(n & sign) & 1;
      // P|n> = ph|m> with m = n ^ flip, so (rho P)_{nn} = rho(n, m) ph(... at n).
      const cplx ph = odd ? -cc : cc;
      tr += rho(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n ^ flip)) * ph;
    }
    total += tr;
  }
  return total;
}

/// Schrödinger-picture Lindblad derivative of a density matrix:
/// drho/dt = -i[H, rho] + sum_L (L rho L† - (L†L rho + rho L†L)/2).
inline MatrixXc schrodinger_derivative(const MatrixXc& rho, const MatrixXc& h,
                                       const std::vector<MatrixXc>& ls) {
  const cplx mi(0, -1);
  MatrixXc out = mi * (h * rho - rho * h);
  for (const MatrixXc& l : ls) {
    const MatrixXc ldag = l.adjoint();
    const MatrixXc ll = ldag * l;
    out += l * rho * ldag - 0.5 * (ll * rho + rho * ll);
  }
  return out;
}

}  // namespace spinlab
