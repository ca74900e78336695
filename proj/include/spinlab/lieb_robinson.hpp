#pragma once

// Light-cone measurement: grids of commutator norms ||[A_x(t), B]|| over
// displacements x and times t, with cone-velocity and tail-decay fits.
//
// The translated observable is evolved in the Heisenberg picture on a finite
// window, so boundary effects must be controlled. Two policies:
//  * MeasuredLeakage (default): march the trajectory and abort if the
//    evolved observable ever puts more than `leakage_tol * ||A||` of
//    coefficient weight on the outermost `margin_sites` sites of the window.
//    This is an a-posteriori certificate that the window was big enough.
//  * TheoreticalCone: require up front that the window extends at least
//    ceil(v_theory * t_max) + margin_sites beyond every translate of A.
//    Rigorous but extremely conservative: v_theory is a worst-case bound,
//    so feasible windows are far larger than the measured cone needs.

#include <cmath>
#include <string>
#include <vector>

#include "spinlab/dense.hpp"
#include "spinlab/dynamics.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/model.hpp"
#include "spinlab/pauli.hpp"
#include "spinlab/util.hpp"

namespace spinlab {

/// Worst-case group velocity bound 4 e zeta(2) * V for interaction-strength
/// estimate V of the model (Hamiltonian and jump couplings combined).
inline double theoretical_velocity(const LindbladModel& m) {
  return 4.0 * kE * kZeta2 * interaction_strength_estimate(m);
}

enum class MarginPolicy { MeasuredLeakage, TheoreticalCone };

struct GridPlan {
  std::vector<int> displacements;  // x values for translating A
  std::vector<double> times;       // ascending, nonnegative
  MarginPolicy margin = MarginPolicy::MeasuredLeakage;
  int margin_sites = 2;            // width of the guard band at each edge
  double leakage_tol = 1e-10;      // relative edge-weight bound (measured)
  double value_budget = 1e-6;      // relative error allowed per norm value
};

struct LightConeGrid {
  std::vector<int> displacements;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // values[ix][it]
  double norm_a = 0.0;
  double norm_b = 0.0;
  double v_theory = 0.0;
  double max_edge_leakage = 0.0;  // largest observed guard-band weight
  double value_floor = 1e-14;     // below this, values are indistinguishable from 0
};

namespace detail {

struct TrimmedNorm {
  double value = 0.0;
  double dropped = 0.0;  // l1 weight removed: bounds the norm shift
};

/// Spectral norm with automatic tail trimming. Evolved observables carry
/// huge supports of negligible coefficients (the RK4 march touches far sites
/// at the 1e-13 level long before any real weight arrives), which would
/// break the dense-norm site ceiling. Trimming terms changes the norm by at
/// most their total |coefficient| weight; that weight is returned so callers
/// can treat it as the resolution floor of the value.
inline TrimmedNorm norm_with_trim(const LocalOperator& a, double budget) {
  if (static_cast<int>(a.support().size()) <= kDenseNormLimit)
    return {operator_norm(a), 0.0};
  const double full_l1 = a.coeff_l1();
  LocalOperator cur = a;
  for (double eps = 1e-16; eps <= 1e-4; eps *= 10) {
    cur = cur.pruned(eps);
    const double dropped = full_l1 - cur.coeff_l1();
    if (dropped > budget) break;
    if (static_cast<int>(cur.support().size()) <= kDenseNormLimit)
      return {operator_norm(cur), dropped};
  }
  throw SupportTooLarge("norm request on " + std::to_string(a.support().size()) +
                        " sites could not be trimmed within the error budget " +
                        format_double(budget));
}

/// Coefficient weight of terms touching the outermost `band` sites of an
/// open window.
inline double edge_band_weight(const LocalOperator& a, const Window& w, int band) {
  const int lo_edge = w.lo + band - 1;
  const int hi_edge = w.hi - band + 1;
  double s = 0;
  for (const auto& [p, c] : a.terms()) {
    if (p.letters.empty()) continue;
    if (p.letters.front().first <= lo_edge || p.letters.back().first >= hi_edge)
      s += std::abs(c);
  }
  return s;
}

}  // namespace detail

/// Grid of commutator norms ||[A_x(t), B]||: A is translated by x first,
/// then evolved forward for time t under the model's window generator.
inline LightConeGrid commutator_norm_grid(const LocalOperator& a, const LocalOperator& b,
                                          const LindbladModel& model, const GridPlan& plan,
                                          const EvolverConfig& cfg) {
  const Window& w = cfg.window;
  if (w.periodic)
    throw InvalidInput("light-cone grids need an open window with guarded edges");
  if (plan.displacements.empty() || plan.times.empty())
    throw InvalidInput("light-cone grid needs at least one displacement and one time");
  for (std::size_t i = 0; i < plan.times.size(); ++i) {
    if (plan.times[i] < 0 || (i > 0 && plan.times[i] <= plan.times[i - 1]))
      throw InvalidInput("grid times must be nonnegative and strictly ascending");
  }
  w.require_contains(b, "light-cone grid");

  LightConeGrid grid;
  grid.displacements = plan.displacements;
  grid.times = plan.times;
  grid.norm_a = operator_norm(a);
  grid.norm_b = operator_norm(b);
  grid.v_theory = theoretical_velocity(model);

  if (plan.margin == MarginPolicy::TheoreticalCone) {
    const double t_max = plan.times.back();
    const int required = static_cast<int>(std::ceil(grid.v_theory * t_max)) + plan.margin_sites;
    for (int x : plan.displacements) {
      const LocalOperator ax = translate(a, x);
      w.require_contains(ax, "light-cone grid");
      const auto& s = ax.support();
      if (s.empty()) continue;
      if (s.front() - w.lo < required || w.hi - s.back() < required)
        throw MarginViolation("window leaves fewer than " + std::to_string(required) +
                              " sites beyond the translate at displacement " + std::to_string(x));
    }
  }

  const LindbladGenerator gen = LindbladGenerator::from_model(model, w);
  grid.values.assign(plan.displacements.size(), std::vector<double>(plan.times.size(), 0.0));
  for (std::size_t ix = 0; ix < plan.displacements.size(); ++ix) {
    LocalOperator cur = translate(a, plan.displacements[ix]);
    w.require_contains(cur, "light-cone grid");
    double t_prev = 0.0;
    for (std::size_t it = 0; it < plan.times.size(); ++it) {
      const double t = plan.times[it];
      if (t > t_prev) cur = evolve_lindblad(cur, t - t_prev, Direction::Forward, gen, cfg);
      t_prev = t;
      const double leak = detail::edge_band_weight(cur, w, plan.margin_sites);
      grid.max_edge_leakage = std::max(grid.max_edge_leakage, leak);
      if (plan.margin == MarginPolicy::MeasuredLeakage && leak > plan.leakage_tol * grid.norm_a)
        throw MarginViolation("evolved observable reached the window edge: weight " +
                              format_double(leak) + " at t = " + format_double(t));
      const detail::TrimmedNorm tn = detail::norm_with_trim(
          commutator(cur, b), plan.value_budget * grid.norm_a * grid.norm_b);
      grid.values[ix][it] = tn.value;
      // trimmed weight bounds the value error: raise the resolution floor
      grid.value_floor = std::max(grid.value_floor, 10.0 * tn.dropped);
    }
  }
  return grid;
}

struct LightConeFit {
  double threshold = 0.0;
  double v_fit = 0.0;           // slope of the threshold crossing x*(t)
  double v_r_squared = 0.0;     // linear-fit quality of x*(t)
  double lambda_fit = 0.0;      // mean exponential decay rate beyond the cone
  double tail_r_squared = 0.0;  // mean log-linear fit quality of the tails
  std::vector<double> crossing_t;
  std::vector<double> crossing_x;
};

/// Fits the light cone: per time, the largest displacement whose value still
/// reaches `threshold` (default 1e-3 ||A|| ||B||) marks the cone edge x*(t);
/// v_fit is the least-squares slope of x*(t). Beyond the edge, log-values
/// against x give the exponential tail rate. Values below the grid's
/// resolution floor (1e-14, raised by any trimming) are treated as exact
/// zeros. Needs >= 3 times and >= 4 displacements; throws FitDegenerate
/// when fewer than two threshold crossings exist.
inline LightConeFit fit_light_cone(const LightConeGrid& grid, double threshold = -1.0) {
  if (grid.times.size() < 3 || grid.displacements.size() < 4)
    throw InvalidInput("cone fit needs at least 3 times and 4 displacements");
  LightConeFit fit;
  fit.threshold = threshold > 0 ? threshold : 1e-3 * grid.norm_a * grid.norm_b;
  if (fit.threshold <= 0) throw InvalidInput("cone fit needs a positive threshold");

  std::vector<double> tail_lambdas;
  std::vector<double> tail_r2;
  for (std::size_t it = 0; it < grid.times.size(); ++it) {
    int best = -1;
    for (std::size_t ix = 0; ix < grid.displacements.size(); ++ix) {
      const double v = grid.values[ix][it] < grid.value_floor ? 0.0 : grid.values[ix][it];
      if (v >= fit.threshold)
        if (best < 0 || grid.displacements[ix] > grid.displacements[static_cast<std::size_t>(best)])
          best = static_cast<int>(ix);
    }
    if (best < 0) continue;
    const int x_star = grid.displacements[static_cast<std::size_t>(best)];
    fit.crossing_t.push_back(grid.times[it]);
    fit.crossing_x.push_back(static_cast<double>(x_star));

    std::vector<double> xs, logs;
    for (std::size_t ix = 0; ix < grid.displacements.size(); ++ix) {
      if (grid.displacements[ix] <= x_star) continue;
      const double v = grid.values[ix][it] < grid.value_floor ? 0.0 : grid.values[ix][it];
      if (v <= 0) continue;
      xs.push_back(static_cast<double>(grid.displacements[ix]));
      logs.push_back(std::log(v));
    }
    if (xs.size() >= 2) {
      const LineFit lf = fit_line(xs, logs);
      tail_lambdas.push_back(-lf.slope);
      tail_r2.push_back(lf.r_squared);
    }
  }

  if (fit.crossing_t.size() < 2)
    throw FitDegenerate("cone fit needs at least two threshold crossings, got " +
                        std::to_string(fit.crossing_t.size()));
  const LineFit cone = fit_line(fit.crossing_t, fit.crossing_x);
  fit.v_fit = cone.slope;
  fit.v_r_squared = cone.r_squared;
  if (!tail_lambdas.empty()) {
    double s = 0, r = 0;
    for (double l : tail_lambdas) s += l;
    for (double q : tail_r2) r += q;
    fit.lambda_fit = s / static_cast<double>(tail_lambdas.size());
    fit.tail_r_squared = r / static_cast<double>(tail_r2.size());
  }
  return fit;
}

}  // namespace spinlab
