#pragma once

// The translation-invariant open-chain model family: a nearest-neighbour
// hopping Hamiltonian density
//   h = alpha s+_0 s-_1 + conj(alpha) s-_0 s+_1 + beta s^z_0 + gamma s^z_0 s^z_1
// and two-site jump densities
//   L_i = a_i s+_0 s-_1 + b_i s-_0 s+_1 + c_i s^z_0 + d_i s^z_1 + e_i s^z_0 s^z_1.
// Every member commutes with total magnetization (strong conservation),
// which is what makes product Gibbs states natural candidates for
// stationarity.

#include <array>
#include <complex>
#include <vector>

#include "spinlab/pauli.hpp"
#include "spinlab/util.hpp"

namespace spinlab {

/// One jump amplitude 5-tuple (a, b, c, d, e).
using JumpTuple = std::array<cplx, 5>;

struct LindbladModel {
  cplx alpha{0, 0};
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<JumpTuple> jumps;
};

/// XX hopping chain: alpha = 1, no field, no coupling, no jumps.
inline LindbladModel xx_model() {
  LindbladModel m;
  m.alpha = cplx(1, 0);
  return m;
}

/// XX chain with single-site dephasing of strength c (jump c sigma^z).
inline LindbladModel xx_dephasing_model(double c) {
  LindbladModel m = xx_model();
  m.jumps.push_back(JumpTuple{cplx(0, 0), cplx(0, 0), cplx(c, 0), cplx(0, 0), cplx(0, 0)});
  return m;
}

/// Hamiltonian one-site piece: beta * sigma^z at site 0.
inline LocalOperator hamiltonian_one_site(const LindbladModel& m) {
  if (m.beta == 0.0) return LocalOperator::zero();
  return LocalOperator::sigma_z(0) * cplx(m.beta, 0);
}

/// Hamiltonian two-site piece on sites {0,1}:
/// alpha s+ s- + conj(alpha) s- s+ + gamma s^z s^z.
inline LocalOperator hamiltonian_two_site(const LindbladModel& m) {
  LocalOperator h =
      multiply(LocalOperator::sigma_plus(0), LocalOperator::sigma_minus(1)) * m.alpha +
      multiply(LocalOperator::sigma_minus(0), LocalOperator::sigma_plus(1)) * std::conj(m.alpha);
  if (m.gamma != 0.0)
    h = h + multiply(LocalOperator::sigma_z(0), LocalOperator::sigma_z(1)) * cplx(m.gamma, 0);
  return h;
}

/// Full Hamiltonian density on the bond {0,1} (one-site part at site 0).
inline LocalOperator hamiltonian_density(const LindbladModel& m) {
  return hamiltonian_two_site(m) + hamiltonian_one_site(m);
}

/// Jump density on the bond {0,1} for one amplitude tuple.
inline LocalOperator jump_density(const JumpTuple& j) {
  LocalOperator l =
      multiply(LocalOperator::sigma_plus(0), LocalOperator::sigma_minus(1)) * j[0] +
      multiply(LocalOperator::sigma_minus(0), LocalOperator::sigma_plus(1)) * j[1];
  if (j[2] != cplx(0, 0)) l = l + LocalOperator::sigma_z(0) * j[2];
  if (j[3] != cplx(0, 0)) l = l + LocalOperator::sigma_z(1) * j[3];
  if (j[4] != cplx(0, 0))
    l = l + multiply(LocalOperator::sigma_z(0), LocalOperator::sigma_z(1)) * j[4];
  return l;
}

inline std::vector<LocalOperator> jump_densities(const LindbladModel& m) {
  std::vector<LocalOperator> out;
  out.reserve(m.jumps.size());
  for (const auto& j : m.jumps) out.push_back(jump_density(j));
  return out;
}

/// Interaction-strength estimate V~ = 2(2|alpha| + |beta| + |gamma|)
/// + 2 sum_i (|a_i| + |b_i| + |c_i| + |d_i| + |e_i|), the computable bound
/// entering the information-speed estimate.
inline double interaction_strength_estimate(const LindbladModel& m) {
  double v = 2.0 * (2.0 * std::abs(m.alpha) + std::abs(m.beta) + std::abs(m.gamma));
  for (const auto& j : m.jumps) {
    double s = 0;
    for (const cplx& c : j) s += std::abs(c);
    v += 2.0 * s;
  }
  return v;
}

/// Net hopping asymmetry sum_i (|a_i|^2 - |b_i|^2): controls the
/// equilibrium current, the flux curvature, and the diffusion lower bound.
inline double hopping_asymmetry(const LindbladModel& m) {
  double s = 0;
  for (const auto& j : m.jumps) s += std::norm(j[0]) - std::norm(j[1]);
  return s;
}

}  // namespace spinlab
