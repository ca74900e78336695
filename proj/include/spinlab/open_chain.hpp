#pragma once

// Validation and equilibrium analysis of the strongly-conserving open-chain
// family: magnetization commutation and detailed-balance checks, spin-current
// derivation from the local conservation law, closed-form equilibrium
// observables, and the explicit diffusion lower bound.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "spinlab/dense.hpp"
#include "spinlab/dynamics.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/lieb_robinson.hpp"
#include "spinlab/model.hpp"
#include "spinlab/states.hpp"

namespace spinlab {

/// Outcome of the structural model checks. Failures are recorded, not thrown.
struct ModelValidation {
  double conservation_residual = 0;  // max ‖[M, h]‖, ‖[M, L_i]‖ (coefficient l1)
  double condition_residual = 0;     // |sum a(conj d - conj c) - sum conj(b)(d - c)|
  bool telescope_solved = false;     // sum_i [L_i, L_i†] = shift(o) - o solvable?
  LocalOperator telescope_density;   // the two-site o when solvable
  double telescope_residual = 0;     // least-squares defect of the telescope

  bool conserving(double tol = 1e-12) const { return conservation_residual <= tol; }
  bool detailed_balance(double tol = 1e-10) const {
    return condition_residual <= tol && telescope_solved;
  }
};

namespace detail {

/// All 16 Pauli strings supported inside {0,1}, identity first.
inline std::vector<LocalOperator> two_site_string_basis() {
  std::vector<LocalOperator> basis;
  const Letter ls[3] = {Letter::X, Letter::Y, Letter::Z};
  basis.push_back(LocalOperator::identity());
  for (const Letter l : ls) basis.push_back(LocalOperator::single(0, l));
  for (const Letter l : ls) basis.push_back(LocalOperator::single(1, l));
  for (const Letter l0 : ls)
    for (const Letter l1 : ls)
      basis.push_back(multiply(LocalOperator::single(0, l0), LocalOperator::single(1, l1)));
  return basis;
}

}  // namespace detail

/// Structural checks: strong conservation, the algebraic detailed-balance
/// condition, and an explicit telescope density o with
/// sum_i [L_i(0), L_i(0)†] = translate(o, 1) - o (two-site least squares).
inline ModelValidation validate_model(const LindbladModel& m) {
  ModelValidation report;

  const LocalOperator m2 = magnetization({0, 1});
  report.conservation_residual = commutator(m2, hamiltonian_density(m)).coeff_l1();
  for (const auto& tuple : m.jumps)
    report.conservation_residual =
        std::max(report.conservation_residual, commutator(m2, jump_density(tuple)).coeff_l1());

  cplx lhs(0, 0), rhs(0, 0);
  for (const auto& j : m.jumps) {
    lhs += j[0] * (std::conj(j[3]) - std::conj(j[2]));
    rhs += std::conj(j[1]) * (j[3] - j[2]);
  }
  report.condition_residual = std::abs(lhs - rhs);

  // telescope least squares over the traceless two-site strings
  LocalOperator w = LocalOperator::zero();
  for (const auto& tuple : m.jumps) {
    const LocalOperator l = jump_density(tuple);
    w = w + commutator(l, adjoint(l));
  }
  const std::vector<LocalOperator> basis = detail::two_site_string_basis();
  std::vector<LocalOperator> images;
  std::map<PauliString, int> coords;
  auto index_of = [&coords](const PauliString& p) {
    return coords.emplace(p, static_cast<int>(coords.size())).first->second;
  };
  for (std::size_t k = 1; k < basis.size(); ++k) {  // identity maps to zero
    images.push_back(translate(basis[k], 1) - basis[k]);
    for (const auto& [p, c] : images.back().terms()) index_of(p);
  }
  for (const auto& [p, c] : w.terms()) index_of(p);

  const Eigen::Index rows = static_cast<Eigen::Index>(coords.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(images.size());
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(rows, cols);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(rows);
  for (Eigen::Index k = 0; k < cols; ++k)
    for (const auto& [p, c] : images[static_cast<std::size_t>(k)].terms())
      a(index_of(p), k) = c;
  for (const auto& [p, c] : w.terms()) b(index_of(p)) = c;

  if (rows == 0) {
    report.telescope_solved = true;
    report.telescope_density = LocalOperator::zero();
    return report;
  }
  const Eigen::VectorXcd x = a.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
  report.telescope_residual = (a * x - b).norm();
  const double scale = std::max(1.0, b.norm());
  report.telescope_solved = report.telescope_residual <= 1e-10 * scale;
  if (report.telescope_solved) {
    LocalOperator o = LocalOperator::zero();
    for (Eigen::Index k = 0; k < cols; ++k)
      o = o + basis[static_cast<std::size_t>(k) + 1] * x(k);
    report.telescope_density = o.pruned(1e-14);
  }
  return report;
}

/// Spin current on the bond {0,1} split into coherent and incoherent parts.
struct CurrentPair {
  LocalOperator j_total;
  LocalOperator j_hamiltonian;
  LocalOperator j_lindblad;
  double conservation_residual = 0;  // ‖generator(s(0)) + j(0) - j(-1)‖
  double split_residual = 0;         // translation covariance of the bond split
  double closed_form_residual = 0;   // incoherent part against its closed form
};

namespace detail {

/// Incoherent-current closed form:
/// sum_i ( 2|b|^2 P+ P-  -  2|a|^2 P- P+
///         + (2a(conj d - conj c) + conj(e) a - e conj(b)) s+ s-  + h.c. ).
inline LocalOperator lindblad_current_closed_form(const LindbladModel& m) {
  const LocalOperator one = LocalOperator::identity();
  const LocalOperator p_plus_0 = (one + LocalOperator::sigma_z(0)) * cplx(0.5, 0);
  const LocalOperator p_minus_0 = (one - LocalOperator::sigma_z(0)) * cplx(0.5, 0);
  const LocalOperator p_plus_1 = (one + LocalOperator::sigma_z(1)) * cplx(0.5, 0);
  const LocalOperator p_minus_1 = (one - LocalOperator::sigma_z(1)) * cplx(0.5, 0);
  const LocalOperator up_down = multiply(LocalOperator::sigma_plus(0), LocalOperator::sigma_minus(1));
  const LocalOperator down_up = multiply(LocalOperator::sigma_minus(0), LocalOperator::sigma_plus(1));

  LocalOperator j = LocalOperator::zero();
  for (const auto& t : m.jumps) {
    const cplx a = t[0], b = t[1], c = t[2], d = t[3], e = t[4];
    j = j + multiply(p_plus_0, p_minus_1) * cplx(2.0 * std::norm(b), 0) -
        multiply(p_minus_0, p_plus_1) * cplx(2.0 * std::norm(a), 0) +
        up_down * (2.0 * a * (std::conj(d) - std::conj(c)) + std::conj(e) * a - e * std::conj(b)) +
        down_up * (2.0 * std::conj(a) * (d - c) + e * std::conj(a) - std::conj(e) * b);
  }
  return j.pruned(1e-15);
}

/// Heisenberg derivative of sigma^z(0) restricted to the single bond (x, x+1).
inline LocalOperator bond_derivative(const LindbladModel& m, int x) {
  const LindbladGenerator gen = LindbladGenerator::from_model(m, Window{x, x + 1, false});
  return gen.apply(LocalOperator::sigma_z(0), Direction::Forward);
}

}  // namespace detail

/// Derives the spin current from generator(s(0)) = j(-1) - j(0) by splitting
/// the derivative into its per-bond contributions.
inline CurrentPair derive_current(const LindbladModel& m) {
  CurrentPair out;
  const LocalOperator d_right = detail::bond_derivative(m, 0);    // bond (0,1)
  const LocalOperator d_left = detail::bond_derivative(m, -1);    // bond (-1,0)
  out.j_total = (d_right * cplx(-1, 0)).pruned(1e-15);

  // the left-bond contribution must be the translated right-bond current
  const double scale = std::max(1.0, d_right.coeff_l1());
  out.split_residual = (d_left - translate(out.j_total, -1)).coeff_l1();
  if (out.split_residual > 1e-12 * scale)
    throw DivergenceSplitFailed("spin-derivative does not telescope into a two-site current");

  const LindbladGenerator full =
      LindbladGenerator::from_model(m, Window{-1, 1, false});
  const LocalOperator identity_check = full.apply(LocalOperator::sigma_z(0), Direction::Forward) +
                                       out.j_total - translate(out.j_total, -1);
  out.conservation_residual = identity_check.coeff_l1();

  LindbladModel coherent = m;
  coherent.jumps.clear();
  out.j_hamiltonian = (detail::bond_derivative(coherent, 0) * cplx(-1, 0)).pruned(1e-15);
  out.j_lindblad = (out.j_total - out.j_hamiltonian).pruned(1e-15);
  out.closed_form_residual =
      (out.j_lindblad - detail::lindblad_current_closed_form(m)).coeff_l1();
  return out;
}

/// Closed-form equilibrium observables of the product Gibbs state at
/// chemical potential mu, and the diffusion lower bound.
struct EquilibriumReport {
  double s = 0;        // magnetization density tanh(mu)
  double j_avg = 0;    // equilibrium current sum_i (|b|^2-|a|^2)(1-s^2)/2
  double v = 0;        // hydrodynamic velocity d j / d s
  double v_prime = 0;  // flux curvature sum_i (|a|^2-|b|^2)
  double chi = 0;      // susceptibility 1/cosh^2(mu)
  double l_lower = 0;  // diffusion bound (chi v')^2 / (8 v_info)
  double cross_check_residual = 0;  // trace evaluation of j vs closed form
};

inline EquilibriumReport equilibrium_report(const LindbladModel& m, double mu) {
  const ModelValidation val = validate_model(m);
  if (!val.conserving())
    throw ModelInvalid("model does not strongly conserve magnetization");
  if (!val.detailed_balance())
    throw ModelInvalid("model violates the detailed-balance condition");

  EquilibriumReport rep;
  rep.s = std::tanh(mu);
  const double asym = hopping_asymmetry(m);
  rep.j_avg = -asym * (1.0 - rep.s * rep.s) / 2.0;
  rep.v = rep.s * asym;
  rep.v_prime = asym;
  const double ch = std::cosh(mu);
  rep.chi = 1.0 / (ch * ch);
  rep.l_lower =
      (asym == 0.0) ? 0.0
                    : (rep.chi * rep.v_prime) * (rep.chi * rep.v_prime) /
                          (8.0 * theoretical_velocity(m));

  const ProductGibbsState state(mu);
  rep.cross_check_residual = std::abs(state.expect(derive_current(m).j_total) - rep.j_avg);
  return rep;
}

/// Trace norm of the Schrödinger-picture derivative of the product Gibbs
/// density matrix on a periodic ring: zero exactly when detailed balance
/// makes the state stationary.
inline double gibbs_stationarity_residual(const LindbladModel& m, double mu, int n) {
  if (n < 3) throw InvalidInput("stationarity check needs a ring of at least 3 sites");
  if (n > kSuperopSiteLimit)
    throw RingTooLarge("ring of " + std::to_string(n) + " sites exceeds the dense limit " +
                       std::to_string(kSuperopSiteLimit));
  const Window ring{0, n - 1, true};
  const std::vector<int> sites = ring.site_list();

  const MatrixXc h = dense_on(hamiltonian_window(interaction_of(m), ring), sites);
  std::vector<MatrixXc> jumps;
  for (const auto& [x, y] : ring.bonds())
    for (const auto& tuple : m.jumps)
      jumps.push_back(dense_on(place_bond(jump_density(tuple), x, y), sites));

  const std::size_t dim = std::size_t{1} << n;
  const double up = std::exp(mu), down = std::exp(-mu), norm = 2.0 * std::cosh(mu);
  MatrixXc rho = MatrixXc::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t idx = 0; idx < dim; ++idx) {
    double w = 1.0;
    for (int q = 0; q < n; ++q) w *= ((idx >> q) & 1 ? down : up) / norm;
    rho(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(idx)) = w;
  }
  return trace_norm(schrodinger_derivative(rho, h, jumps));
}

}  // namespace spinlab
