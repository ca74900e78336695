#pragma once

// Expectation functionals: the product Gibbs state of total magnetization
// (exactly factorizing over sites), finite-window thermal Gibbs states
// (dense), connected correlators, local conditional expectations, and a
// KMS residual check.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "spinlab/dense.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/pauli.hpp"
#include "spinlab/util.hpp"

namespace spinlab {

/// Product Gibbs state of total magnetization at chemical potential mu:
/// each site carries the weight diag(e^mu, e^-mu) / (2 cosh mu), so
/// <sigma^x> = <sigma^y> = 0 and <sigma^z> = tanh(mu). Expectations of
/// Pauli strings factorize exactly over sites.
class ProductGibbsState {
 public:
  explicit ProductGibbsState(double mu) : mu_(mu), s_(std::tanh(mu)) {}

  double mu() const { return mu_; }
  /// Single-site magnetization tanh(mu).
  double site_z() const { return s_; }

  cplx expect_string(const PauliString& p) const {
    double v = 1.0;
    for (const auto& [site, l] : p.letters) {
      if (l != Letter::Z) return cplx(0, 0);
      v *= s_;
    }
    return cplx(v, 0);
  }

  cplx expect(const LocalOperator& a) const {
    cplx total(0, 0);
    for (const auto& [p, c] : a.terms()) total += c * expect_string(p);
    return total;
  }

 private:
  double mu_;
  double s_;
};

namespace detail {

/// Sites of a string carrying X or Y letters. A product of strings has a
/// nonzero product-state expectation only if these sets telescope away.
inline std::vector<int> xy_sites(const PauliString& p) {
  std::vector<int> v;
  for (const auto& [site, l] : p.letters)
    if (l != Letter::Z) v.push_back(site);
  return v;
}

using XyBuckets = std::map<std::vector<int>, std::vector<const std::pair<const PauliString, cplx>*>>;

inline XyBuckets bucket_by_xy(const LocalOperator& a) {
  XyBuckets b;
  for (const auto& term : a.terms()) b[xy_sites(term.first)].push_back(&term);
  return b;
}

}  // namespace detail

/// Expectation of an ordered product A_1 A_2 ... A_n in a product Gibbs
/// state without materializing the product operator. The last factor is
/// bucketed by XY-support so only string combinations that can survive the
/// per-site traces are evaluated.
inline cplx expect_product(const ProductGibbsState& state,
                           const std::vector<const LocalOperator*>& ops) {
  const std::size_t n = ops.size();
  if (n == 0) return cplx(1, 0);
  if (n == 1) return state.expect(*ops[0]);
  const detail::XyBuckets last = detail::bucket_by_xy(*ops[n - 1]);

  cplx total(0, 0);
  // Depth-first expansion of the first n-1 factors, carrying the partial
  // string product; the final factor is resolved through the buckets.
  std::function<void(std::size_t, const PauliString&, cplx)> walk =
      [&](std::size_t level, const PauliString& partial, cplx coeff) {
        if (level == n - 1) {
          const auto it = last.find(detail::xy_sites(partial));
          if (it == last.end()) return;
          for (const auto* term : it->second) {
            auto [r, phase] = string_product(partial, term->first);
            total += coeff * term->second * phase * state.expect_string(r);
          }
          return;
        }
        for (const auto& [p, c] : ops[level]->terms()) {
          auto [r, phase] = string_product(partial, p);
          walk(level + 1, r, coeff * c * phase);
        }
      };

  // Guard the worst-case expansion size (product of term counts of the
  // first n-1 factors).
  double cost = 1;
  for (std::size_t i = 0; i + 1 < n; ++i) cost *= static_cast<double>(ops[i]->num_terms());
  if (cost > 4e7)
    throw LimitExceeded("expect_product: term-combination count too large");

  walk(0, PauliString{}, cplx(1, 0));
  return total;
}

/// Connected correlator (A,B) = w(A†B) - w(A†) w(B): conjugate-linear in
/// the first slot. Vanishes exactly for disjoint supports in product states.
inline cplx connected(const ProductGibbsState& state, const LocalOperator& a,
                      const LocalOperator& b) {
  const LocalOperator ad = adjoint(a);
  const std::vector<const LocalOperator*> pair{&ad, &b};
  return expect_product(state, pair) - state.expect(ad) * state.expect(b);
}

/// Conditional expectation onto the sites in X: letters outside X are
/// replaced by their single-site averages (0 for X/Y, tanh(mu) for Z).
/// Idempotent; the identity on operators already supported in X.
inline LocalOperator conditional_expectation(const LocalOperator& a, const std::set<int>& x,
                                             const ProductGibbsState& rho) {
  LocalOperator::TermMap m;
  const double s = rho.site_z();
  for (const auto& [p, c] : a.terms()) {
    cplx coeff = c;
    PauliString q;
    bool dead = false;
    for (const auto& [site, l] : p.letters) {
      if (x.count(site)) {
        q.letters.emplace_back(site, l);
      } else if (l == Letter::Z) {
        coeff *= s;
      } else {
        dead = true;
        break;
      }
    }
    if (!dead && coeff != cplx(0, 0)) m[std::move(q)] += coeff;
  }
  return LocalOperator::from_map(std::move(m));
}

/// Finite-window Gibbs state rho ~ exp(-(beta H - mu M)) on a contiguous
/// site interval, held densely. Positivity and unit trace are checked at
/// construction.
class FiniteThermalState {
 public:
  FiniteThermalState(int lo, int hi, const LocalOperator& hamiltonian, double beta, double mu)
      : lo_(lo), hi_(hi), beta_(beta), mu_(mu) {
    if (hi < lo) throw InvalidInput("thermal window: hi < lo");
    if (hi - lo + 1 > kDenseMatrixLimit)
      throw WindowTooLarge("thermal window exceeds dense limit of " +
                           std::to_string(kDenseMatrixLimit) + " sites");
    for (int s = lo; s <= hi; ++s) sites_.push_back(s);
    const auto& hs = hamiltonian.support();
    if (!hs.empty() && (hs.front() < lo || hs.back() > hi))
      throw SupportOutsideWindow("thermal window: Hamiltonian support outside window");

    const MatrixXc hd = dense_on(hamiltonian, sites_);
    const MatrixXc md = dense_on(magnetization(sites_), sites_);
    // Modular exponent K with rho = e^{-K} / Z.
    MatrixXc k = beta * hd - mu * md;
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(k);
    evals_ = es.eigenvalues();
    evecs_ = es.eigenvectors();
    const double emin = evals_.minCoeff();
    Eigen::VectorXd w = (-(evals_.array() - emin)).exp();
    const double z = w.sum();
    rho_ = evecs_ * (w / z).asDiagonal() * evecs_.adjoint();

    const double tr = std::abs(rho_.trace().real() - 1.0) + std::abs(rho_.trace().imag());
    if (tr > 1e-12) throw NumericalFailure("thermal state: trace deviates from 1");
    Eigen::SelfAdjointEigenSolver<MatrixXc> check(rho_);
    if (check.eigenvalues().minCoeff() < -1e-12)
      throw NumericalFailure("thermal state: negative eigenvalue");
  }

  int lo() const { return lo_; }
  int hi() const { return hi_; }
  double beta() const { return beta_; }
  double mu() const { return mu_; }
  const std::vector<int>& sites() const { return sites_; }
  const MatrixXc& rho() const { return rho_; }

  void require_inside(const LocalOperator& a) const {
    const auto& s = a.support();
    if (!s.empty() && (s.front() < lo_ || s.back() > hi_))
      throw SupportOutsideWindow("observable support outside thermal window");
  }

  cplx expect(const LocalOperator& a) const {
    require_inside(a);
    return dense_trace_product(rho_, a, sites_);
  }

  /// w(A† B) via dense product (windows are small by construction).
  cplx expect_pair(const LocalOperator& a_dag, const LocalOperator& b) const {
    require_inside(a_dag);
    require_inside(b);
    const double combos =
        static_cast<double>(a_dag.num_terms()) * static_cast<double>(b.num_terms());
    if (combos <= 4e4) {
      cplx total(0, 0);
      for (const auto& [p, cp] : a_dag.terms())
        for (const auto& [q, cq] : b.terms()) {
          auto [r, phase] = string_product(p, q);
          total += cp * cq * phase *
                   dense_trace_product(rho_, LocalOperator::term(r, cplx(1, 0)), sites_);
        }
      return total;
    }
    const MatrixXc ma = dense_on(a_dag, sites_);
    const MatrixXc mb = dense_on(b, sites_);
    return (rho_ * ma * mb).trace();
  }

  /// Imaginary-time conjugation by the state's own modular exponent:
  /// tau_{i beta}(B) = e^{-K} B e^{K} with K = beta H - mu M.
  MatrixXc modular_conjugate(const LocalOperator& b) const {
    require_inside(b);
    const MatrixXc bd = dense_on(b, sites_);
    const MatrixXc bt = evecs_.adjoint() * bd * evecs_;
    const Eigen::Index d = bt.rows();
    MatrixXc out(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        out(i, j) = bt(i, j) * std::exp(evals_(j) - evals_(i));
    return evecs_ * out * evecs_.adjoint();
  }

 private:
  int lo_, hi_;
  double beta_, mu_;
  std::vector<int> sites_;
  MatrixXc rho_;
  Eigen::VectorXd evals_;
  MatrixXc evecs_;
};

inline cplx connected(const FiniteThermalState& state, const LocalOperator& a,
                      const LocalOperator& b) {
  const LocalOperator ad = adjoint(a);
  return state.expect_pair(ad, b) - state.expect(ad) * state.expect(b);
}

/// |w(A tau_{i beta} B) - w(B A)|: the KMS residual of the window's own
/// Gibbs state. Vanishes (to dense-arithmetic precision) by construction.
inline double kms_residual(const FiniteThermalState& state, const LocalOperator& a,
                           const LocalOperator& b) {
  state.require_inside(a);
  state.require_inside(b);
  const MatrixXc ad = dense_on(a, state.sites());
  const MatrixXc bd = dense_on(b, state.sites());
  const MatrixXc tb = state.modular_conjugate(b);
  const cplx lhs = (state.rho() * ad * tb).trace();
  const cplx rhs = (state.rho() * bd * ad).trace();
  return std::abs(lhs - rhs);
}

}  // namespace spinlab
