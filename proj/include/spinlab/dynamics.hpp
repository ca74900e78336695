#pragma once

// Heisenberg-picture evolution on finite windows.
//
// Forward generator (Heisenberg dual of a completely positive trace
// preserving semigroup):
//   G*(A) = i[H, A] + (1/2) sum_{x,i} ( L† [A, L] + [L†, A] L )
//         = i[H, A] + sum_{x,i} ( L† A L - (1/2){L†L, A} ).
// Backward generator (well-defined under local detailed balance):
//   G(A)  = -i[H, A] + sum_{x,i} ( L A L† - (1/2){L L†, A} ),
// i.e. the Hamiltonian sign flips and every jump operator is replaced by
// its adjoint. The backward semigroup is its own generator's exponential,
// never negative-time forward evolution.

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "spinlab/dense.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/model.hpp"
#include "spinlab/pauli.hpp"
#include "spinlab/states.hpp"
#include "spinlab/util.hpp"

namespace spinlab {

inline constexpr int kSuperopSiteLimit = 7;  // hard cap for 4^N superoperators

/// Contiguous site interval [lo, hi], open or periodic.
struct Window {
  int lo = 0;
  int hi = 0;
  bool periodic = false;

  int size() const { return hi - lo + 1; }

  std::vector<int> site_list() const {
    std::vector<int> s;
    s.reserve(static_cast<std::size_t>(size()));
    for (int x = lo; x <= hi; ++x) s.push_back(x);
    return s;
  }

  bool contains(const LocalOperator& a) const {
    const auto& s = a.support();
    return s.empty() || (s.front() >= lo && s.back() <= hi);
  }

  void require_contains(const LocalOperator& a, const char* what) const {
    if (!contains(a))
      throw SupportOutsideWindow(std::string(what) + ": support outside window [" +
                                 std::to_string(lo) + "," + std::to_string(hi) + "]");
  }

  /// Ordered bonds (x, y): nearest neighbours, plus the wrap bond when
  /// periodic.
  std::vector<std::pair<int, int>> bonds() const {
    std::vector<std::pair<int, int>> b;
    for (int x = lo; x < hi; ++x) b.emplace_back(x, x + 1);
    if (periodic && size() >= 2) b.emplace_back(hi, lo);
    return b;
  }
};

/// Cyclic translation on a periodic window; plain translation on an open
/// one (where the result must still fit).
inline LocalOperator translate_on(const Window& w, const LocalOperator& a, int x) {
  if (!w.periodic) {
    LocalOperator t = translate(a, x);
    w.require_contains(t, "translate");
    return t;
  }
  const int n = w.size();
  const int lo = w.lo;
  return remap_sites(a, [n, lo, x](int s) {
    int r = (s - lo + x) % n;
    if (r < 0) r += n;
    return lo + r;
  });
}

/// Places a two-site template (support in {0,1}) on the bond (x, y).
inline LocalOperator place_bond(const LocalOperator& tmpl, int x, int y) {
  return remap_sites(tmpl, [x, y](int s) { return s == 0 ? x : y; });
}

/// Translation-invariant interaction: a one-site density at site 0 and a
/// two-site density on {0,1}. Both must be Hermitian.
struct Interaction {
  LocalOperator one_site;
  LocalOperator two_site;

  Interaction() = default;
  Interaction(LocalOperator one, LocalOperator two)
      : one_site(std::move(one)), two_site(std::move(two)) {
    if (!one_site.is_hermitian(1e-12) || !two_site.is_hermitian(1e-12))
      throw InvalidInput("interaction densities must be Hermitian");
    const auto& s1 = one_site.support();
    if (!s1.empty() && (s1.front() != 0 || s1.back() != 0))
      throw InvalidInput("one-site interaction density must live at site 0");
    const auto& s2 = two_site.support();
    if (!s2.empty() && (s2.front() < 0 || s2.back() > 1))
      throw InvalidInput("two-site interaction density must live on sites {0,1}");
  }
};

inline Interaction interaction_of(const LindbladModel& m) {
  return Interaction(hamiltonian_one_site(m), hamiltonian_two_site(m));
}

/// H_window = sum_x one_site(x) + sum_bonds two_site(bond).
inline LocalOperator hamiltonian_window(const Interaction& phi, const Window& w) {
  LocalOperator::TermMap m;
  if (!phi.one_site.is_zero()) {
    for (int x = w.lo; x <= w.hi; ++x) {
      const LocalOperator piece = translate(phi.one_site, x);
      for (const auto& [p, c] : piece.terms()) m[p] += c;
    }
  }
  if (!phi.two_site.is_zero()) {
    for (const auto& [x, y] : w.bonds()) {
      const LocalOperator piece = place_bond(phi.two_site, x, y);
      for (const auto& [p, c] : piece.terms()) m[p] += c;
    }
  }
  return LocalOperator::from_map(std::move(m));
}

enum class Direction { Forward, Backward };

namespace detail {

inline void add_commutator_into(LocalOperator::TermMap& dest, cplx scale, const LocalOperator& h,
                                const LocalOperator& a) {
  for (const auto& [p, cp] : h.terms()) {
    for (const auto& [q, cq] : a.terms()) {
      auto [r, phase] = string_product(p, q);
      const cplx diff = phase - std::conj(phase);
      if (diff != cplx(0, 0)) dest[std::move(r)] += scale * cp * cq * diff;
    }
  }
}

inline void add_sandwich_into(LocalOperator::TermMap& dest, cplx scale, const LocalOperator& l1,
                              const LocalOperator& a, const LocalOperator& l2) {
  for (const auto& [q, cq] : a.terms()) {
    for (const auto& [p, cp] : l1.terms()) {
      auto [pq, ph1] = string_product(p, q);
      const cplx c1 = scale * cp * cq * ph1;
      for (const auto& [r, cr] : l2.terms()) {
        auto [pqr, ph2] = string_product(pq, r);
        dest[std::move(pqr)] += c1 * cr * ph2;
      }
    }
  }
}

inline void add_anticommutator_into(LocalOperator::TermMap& dest, cplx scale,
                                    const LocalOperator& m, const LocalOperator& a) {
  for (const auto& [p, cp] : m.terms()) {
    for (const auto& [q, cq] : a.terms()) {
      auto [r, phase] = string_product(p, q);
      const cplx sum = phase + std::conj(phase);
      if (sum != cplx(0, 0)) dest[std::move(r)] += scale * cp * cq * sum;
    }
  }
}

}  // namespace detail

/// The full window generator: Hamiltonian pieces per site/bond and jump
/// instances per bond per family. Immutable once built.
class LindbladGenerator {
 public:
  struct JumpInstance {
    LocalOperator l;
    LocalOperator l_dag;
    LocalOperator ldag_l;  // L†L (forward anticommutator piece)
    LocalOperator l_ldag;  // LL† (backward anticommutator piece)
  };

  LindbladGenerator(const Interaction& phi, const std::vector<LocalOperator>& jump_templates,
                    const Window& w)
      : window_(w) {
    for (int x = w.lo; x <= w.hi; ++x) {
      if (!phi.one_site.is_zero()) h_pieces_.push_back(translate(phi.one_site, x));
    }
    for (const auto& [x, y] : w.bonds()) {
      if (!phi.two_site.is_zero()) h_pieces_.push_back(place_bond(phi.two_site, x, y));
      for (const auto& tmpl : jump_templates) {
        const auto& s = tmpl.support();
        if (!s.empty() && (s.front() < 0 || s.back() > 1))
          throw InvalidInput("jump template must live on sites {0,1}");
        JumpInstance inst;
        inst.l = place_bond(tmpl, x, y);
        inst.l_dag = adjoint(inst.l);
        inst.ldag_l = multiply(inst.l_dag, inst.l);
        inst.l_ldag = multiply(inst.l, inst.l_dag);
        jumps_.push_back(std::move(inst));
      }
    }
  }

  static LindbladGenerator from_model(const LindbladModel& m, const Window& w) {
    return LindbladGenerator(interaction_of(m), jump_densities(m), w);
  }

  const Window& window() const { return window_; }
  const std::vector<LocalOperator>& hamiltonian_pieces() const { return h_pieces_; }
  const std::vector<JumpInstance>& jumps() const { return jumps_; }

  LocalOperator hamiltonian() const {
    LocalOperator::TermMap m;
    for (const auto& h : h_pieces_)
      for (const auto& [p, c] : h.terms()) m[p] += c;
    return LocalOperator::from_map(std::move(m));
  }

  /// One application of the generator in the requested direction.
  LocalOperator apply(const LocalOperator& a, Direction dir) const {
    window_.require_contains(a, "generator");
    LocalOperator::TermMap out;
    const cplx ih = (dir == Direction::Forward) ? cplx(0, 1) : cplx(0, -1);
    for (const auto& h : h_pieces_) detail::add_commutator_into(out, ih, h, a);
    for (const auto& j : jumps_) {
      if (dir == Direction::Forward) {
        detail::add_sandwich_into(out, cplx(1, 0), j.l_dag, a, j.l);
        detail::add_anticommutator_into(out, cplx(-0.5, 0), j.ldag_l, a);
      } else {
        detail::add_sandwich_into(out, cplx(1, 0), j.l, a, j.l_dag);
        detail::add_anticommutator_into(out, cplx(-0.5, 0), j.l_ldag, a);
      }
    }
    return LocalOperator::from_map(std::move(out));
  }

 private:
  Window window_;
  std::vector<LocalOperator> h_pieces_;
  std::vector<JumpInstance> jumps_;
};

enum class EvolveMethod { DenseExponential, OdeRk4 };

struct EvolverConfig {
  Window window;
  EvolveMethod method = EvolveMethod::OdeRk4;
  double dt = 0.01;
  int dense_limit = kDenseMatrixLimit;  // Hamiltonian dense-evolution cap
  int superop_limit = 6;                // memory-safe default; hard cap 7
  double prune_eps = 0.0;               // term pruning per step (0 = exact)
  double step_tol = 0.0;                // step-doubling rejection (0 = off)
  int check_every = 10;                 // steps between step-doubling checks
};

namespace detail {

inline LocalOperator axpy(const LocalOperator& a, double s, const LocalOperator& k) {
  LocalOperator::TermMap m = a.terms();
  for (const auto& [p, c] : k.terms()) m[p] += s * c;
  return LocalOperator::from_map(std::move(m));
}

inline LocalOperator rk4_step(const LocalOperator& a, double h, const LindbladGenerator& gen,
                              Direction dir, double prune_eps) {
  const LocalOperator k1 = gen.apply(a, dir);
  const LocalOperator k2 = gen.apply(axpy(a, h / 2, k1), dir);
  const LocalOperator k3 = gen.apply(axpy(a, h / 2, k2), dir);
  const LocalOperator k4 = gen.apply(axpy(a, h, k3), dir);
  LocalOperator::TermMap m = a.terms();
  for (const auto& [p, c] : k1.terms()) m[p] += (h / 6) * c;
  for (const auto& [p, c] : k2.terms()) m[p] += (h / 3) * c;
  for (const auto& [p, c] : k3.terms()) m[p] += (h / 3) * c;
  for (const auto& [p, c] : k4.terms()) m[p] += (h / 6) * c;
  LocalOperator out = LocalOperator::from_map(std::move(m));
  return prune_eps > 0 ? out.pruned(prune_eps) : out;
}

/// Coefficient-wise distance (exact upper bound on 2^{-n/2}‖A-B‖_F).
inline double coeff_distance(const LocalOperator& a, const LocalOperator& b) {
  double s = 0;
  for (const auto& [p, c] : a.terms()) s += std::norm(c - b.coeff(p));
  for (const auto& [p, c] : b.terms())
    if (a.coeff(p) == cplx(0, 0)) s += std::norm(c);
  return std::sqrt(s);
}

}  // namespace detail

/// Heisenberg Lindblad semigroup member: exp(t G*) A (forward) or
/// exp(t G) A (backward), t >= 0.
inline LocalOperator evolve_lindblad(const LocalOperator& a, double t, Direction dir,
                                     const LindbladGenerator& gen, const EvolverConfig& cfg) {
  if (t < 0) throw InvalidInput("Lindblad evolution is a semigroup: t must be >= 0");
  gen.window().require_contains(a, "evolve");
  if (t == 0) return a;

  if (cfg.method == EvolveMethod::DenseExponential) {
    const int n = gen.window().size();
    if (n > kSuperopSiteLimit)
      throw WindowTooLarge("dense superoperator limited to " +
                           std::to_string(kSuperopSiteLimit) + " sites");
    if (n > cfg.superop_limit)
      throw WindowTooLarge("dense superoperator limited to " +
                           std::to_string(cfg.superop_limit) + " sites by config");
    const auto sites = gen.window().site_list();
    const std::size_t dim = std::size_t{1} << (2 * n);  // 4^n strings
    // String index: base-4 code, letter code in {0,1,2,3} per site.
    auto string_of = [&](std::size_t idx) {
      PauliString p;
      for (int q = 0; q < n; ++q) {
        const int code = static_cast<int>((idx >> (2 * q)) & 3);
        if (code != 0) p.letters.emplace_back(sites[q], static_cast<Letter>(code));
      }
      return p;
    };
    auto index_of = [&](const PauliString& p) {
      std::size_t idx = 0;
      for (const auto& [site, l] : p.letters) {
        const int q = site - gen.window().lo;
        idx |= static_cast<std::size_t>(static_cast<int>(l)) << (2 * q);
      }
      return idx;
    };
    MatrixXc s = MatrixXc::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t col = 0; col < dim; ++col) {
      const LocalOperator image =
          gen.apply(LocalOperator::term(string_of(col), cplx(1, 0)), dir);
      for (const auto& [p, c] : image.terms())
        s(static_cast<Eigen::Index>(index_of(p)), static_cast<Eigen::Index>(col)) = c;
    }
    VectorXc v = VectorXc::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& [p, c] : a.terms()) v[static_cast<Eigen::Index>(index_of(p))] = c;
    const MatrixXc expm = (t * s).exp();
    const VectorXc w = expm * v;
    LocalOperator::TermMap out;
    for (std::size_t i = 0; i < dim; ++i) {
      const cplx c = w[static_cast<Eigen::Index>(i)];
      if (c != cplx(0, 0)) out[string_of(i)] = c;
    }
    return LocalOperator::from_map(std::move(out));
  }

  // RK4 march with an exact landing on t.
  const int steps = std::max(1, static_cast<int>(std::ceil(t / cfg.dt - 1e-12)));
  const double h = t / steps;
  LocalOperator cur = a;
  for (int i = 0; i < steps; ++i) {
    if (cfg.step_tol > 0 && cfg.check_every > 0 && i % cfg.check_every == 0) {
      const LocalOperator full = detail::rk4_step(cur, h, gen, dir, cfg.prune_eps);
      const LocalOperator half = detail::rk4_step(
          detail::rk4_step(cur, h / 2, gen, dir, cfg.prune_eps), h / 2, gen, dir, cfg.prune_eps);
      const double est = detail::coeff_distance(full, half) / 15.0;
      if (est > cfg.step_tol)
        throw StepSizeRejected("RK4 local error estimate " + format_double(est) +
                               " exceeds tolerance " + format_double(cfg.step_tol));
      cur = half;
    } else {
      cur = detail::rk4_step(cur, h, gen, dir, cfg.prune_eps);
    }
  }
  return cur;
}

/// Unitary Heisenberg evolution A(t) = e^{itH} A e^{-itH} on a dense
/// window, cached eigendecomposition. Valid for positive and negative t.
class HamiltonianEvolver {
 public:
  HamiltonianEvolver(const LocalOperator& h, const Window& w, int dense_limit = kDenseMatrixLimit)
      : window_(w), sites_(w.site_list()) {
    if (w.size() > dense_limit)
      throw WindowTooLarge("Hamiltonian dense evolution limited to " +
                           std::to_string(dense_limit) + " sites");
    w.require_contains(h, "hamiltonian");
    if (!h.is_hermitian(1e-12)) throw InvalidInput("Hamiltonian must be Hermitian");
    const MatrixXc hd = dense_on(h, sites_);
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(hd);
    evals_ = es.eigenvalues();
    evecs_ = es.eigenvectors();
  }

  const Window& window() const { return window_; }
  const std::vector<int>& sites() const { return sites_; }

  MatrixXc evolve_dense(const MatrixXc& m, double t) const {
    const Eigen::Index d = m.rows();
    const MatrixXc mt = evecs_.adjoint() * m * evecs_;
    MatrixXc out(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        out(i, j) = mt(i, j) * std::exp(cplx(0, t * (evals_(i) - evals_(j))));
    return evecs_ * out * evecs_.adjoint();
  }

  LocalOperator evolve(const LocalOperator& a, double t, double drop_tol = 1e-14) const {
    window_.require_contains(a, "evolve");
    if (t == 0) return a;
    const MatrixXc ad = dense_on(a, sites_);
    return pauli_decompose(evolve_dense(ad, t), sites_, drop_tol);
  }

 private:
  Window window_;
  std::vector<int> sites_;
  Eigen::VectorXd evals_;
  MatrixXc evecs_;
};

/// Unitary Heisenberg evolution of A under the window Hamiltonian of phi.
inline LocalOperator evolve_hamiltonian(const LocalOperator& a, double t, const Interaction& phi,
                                        const EvolverConfig& cfg) {
  cfg.window.require_contains(a, "evolve");
  if (cfg.method == EvolveMethod::OdeRk4) {
    // Unitary dynamics as the jump-free Lindblad semigroup (group: negative
    // times via the backward generator, which is exactly -i[H,.]).
    const LindbladGenerator gen(phi, {}, cfg.window);
    if (t >= 0) return evolve_lindblad(a, t, Direction::Forward, gen, cfg);
    return evolve_lindblad(a, -t, Direction::Backward, gen, cfg);
  }
  if (cfg.window.size() > cfg.dense_limit)
    throw WindowTooLarge("Hamiltonian dense evolution limited to " +
                         std::to_string(cfg.dense_limit) + " sites");
  const HamiltonianEvolver ev(hamiltonian_window(phi, cfg.window), cfg.window, cfg.dense_limit);
  return ev.evolve(a, t);
}

/// Local approximation: project an evolved observable onto the base support
/// fattened by r, and measure the projection error in operator norm.
struct LocalizeResult {
  LocalOperator approximation;
  double error = 0.0;
};

inline LocalizeResult localize(const LocalOperator& a_evolved, const std::vector<int>& base_support,
                               int r, const ProductGibbsState& rho) {
  if (r < 0) throw InvalidInput("localize: radius must be >= 0");
  std::set<int> fat;
  for (int s : base_support)
    for (int d = -r; d <= r; ++d) fat.insert(s + d);
  LocalizeResult res;
  res.approximation = conditional_expectation(a_evolved, fat, rho);
  res.error = operator_norm(a_evolved - res.approximation);
  return res;
}

}  // namespace spinlab
