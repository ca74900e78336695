#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spinlab/dense.hpp"
#include "spinlab/dynamics.hpp"
#include "spinlab/model.hpp"
#include "spinlab/pauli.hpp"
#include "spinlab/states.hpp"

using namespace spinlab;

namespace {

/// Dense jump matrices of a model instantiated per bond, via the kron oracle.
std::vector<oracle::Mat> dense_jumps(const LindbladModel& m, const Window& w) {
  std::vector<oracle::Mat> out;
  const auto sites = w.site_list();
  for (const auto& [x, y] : w.bonds())
    for (const auto& tmpl : jump_densities(m))
      out.push_back(oracle::dense_by_kron(place_bond(tmpl, x, y), sites));
  return out;
}

LindbladModel mixed_model() {
  LindbladModel m;
  m.alpha = cplx(0.8, 0.3);
  m.beta = -0.4;
  m.gamma = 0.25;
  m.jumps.push_back(JumpTuple{cplx(0.3, 0), cplx(0.1, -0.2), cplx(0, 0.2), cplx(0.1, 0), cplx(0, 0)});
  return m;
}

double coeff_dist(const LocalOperator& a, const LocalOperator& b) { return (a - b).coeff_l1(); }

}  // namespace

TEST_CASE("window geometry") {
  const Window open{0, 3, false};
  CHECK(open.size() == 4);
  CHECK(open.site_list() == std::vector<int>{0, 1, 2, 3});
  CHECK(open.bonds() == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}});
  CHECK(open.contains(LocalOperator::sigma_x(3)));
  CHECK_FALSE(open.contains(LocalOperator::sigma_x(4)));
  CHECK(open.contains(LocalOperator::identity()));

  const Window ring{0, 3, true};
  CHECK(ring.bonds() == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {3, 0}});
}

TEST_CASE("translation on rings wraps cyclically") {
  const Window ring{0, 5, true};
  std::mt19937_64 rng(11);
  const LocalOperator a = oracle::random_operator(rng, {0, 1, 2}, 6);
  CHECK(translate_on(ring, a, 6) == a);
  CHECK(translate_on(ring, translate_on(ring, a, 4), 2) == a);
  CHECK(translate_on(ring, a, -1) == translate_on(ring, a, 5));
  // coefficients survive the wrap untouched
  CHECK(translate_on(ring, a, 3).coeff_l1() == a.coeff_l1());

  const Window open{0, 5, false};
  CHECK(translate_on(open, a, 3) == translate(a, 3));
  CHECK_THROWS_AS(translate_on(open, a, 4), SupportOutsideWindow);
}

TEST_CASE("window Hamiltonian assembles densities over sites and bonds") {
  const LindbladModel m = mixed_model();
  const Interaction phi = interaction_of(m);
  const Window open{0, 3, false};
  LocalOperator manual = LocalOperator::zero();
  for (int x = 0; x <= 3; ++x) manual = manual + translate(phi.one_site, x);
  for (int x = 0; x <= 2; ++x) manual = manual + translate(phi.two_site, x);
  CHECK(hamiltonian_window(phi, open) == manual);

  const Window ring{0, 3, true};
  const LocalOperator hr = hamiltonian_window(phi, ring);
  CHECK(hr == manual + place_bond(phi.two_site, 3, 0));
  CHECK(hr.is_hermitian(0.0));
}

TEST_CASE("interaction validation") {
  CHECK_THROWS_AS(Interaction(LocalOperator::sigma_plus(0), LocalOperator::zero()), InvalidInput);
  CHECK_THROWS_AS(Interaction(LocalOperator::sigma_z(1), LocalOperator::zero()), InvalidInput);
  CHECK_THROWS_AS(Interaction(LocalOperator::zero(), LocalOperator::sigma_z(2)), InvalidInput);
}

TEST_CASE("generator application matches dense derivatives in both directions") {
  const LindbladModel m = mixed_model();
  const Window w{0, 2, false};
  const auto sites = w.site_list();
  const LindbladGenerator gen = LindbladGenerator::from_model(m, w);
  const oracle::Mat hd = oracle::dense_by_kron(gen.hamiltonian(), sites);
  const std::vector<oracle::Mat> ls = dense_jumps(m, w);
  REQUIRE(ls.size() == 2);  // one jump family on two bonds

  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const LocalOperator a = oracle::random_operator(rng, sites, 6);
    const oracle::Mat ad = oracle::dense_by_kron(a, sites);
    const oracle::Mat fwd = oracle::dense_by_kron(gen.apply(a, Direction::Forward), sites);
    CHECK((fwd - oracle::heisenberg_derivative(ad, hd, ls)).cwiseAbs().maxCoeff() < 1e-12);
    const oracle::Mat bwd = oracle::dense_by_kron(gen.apply(a, Direction::Backward), sites);
    CHECK((bwd - oracle::backward_derivative(ad, hd, ls)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Heisenberg and Schrodinger derivatives are trace duals") {
  const LindbladModel m = mixed_model();
  const Window w{0, 2, false};
  const auto sites = w.site_list();
  const LindbladGenerator gen = LindbladGenerator::from_model(m, w);
  const MatrixXc hd = dense_on(gen.hamiltonian(), sites);
  std::vector<MatrixXc> ls;
  for (const auto& j : gen.jumps()) ls.push_back(dense_on(j.l, sites));

  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const oracle::Mat rho = oracle::random_density_matrix(rng, 8);
    const LocalOperator a = oracle::random_operator(rng, sites, 5);
    const cplx lhs = dense_trace_product(rho, gen.apply(a, Direction::Forward), sites);
    const MatrixXc drho = schrodinger_derivative(rho, hd, ls);
    const cplx rhs = (drho * dense_on(a, sites)).trace();
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("dense-exponential evolution matches the superoperator oracle") {
  const LindbladModel m = mixed_model();
  const Window w{0, 2, false};
  const auto sites = w.site_list();
  const LindbladGenerator gen = LindbladGenerator::from_model(m, w);
  const oracle::Mat hd = oracle::dense_by_kron(gen.hamiltonian(), sites);
  const std::vector<oracle::Mat> ls = dense_jumps(m, w);

  EvolverConfig cfg;
  cfg.window = w;
  cfg.method = EvolveMethod::DenseExponential;

  std::mt19937_64 rng(41);
  for (double t : {0.0, 0.3, 1.1}) {
    const LocalOperator a = oracle::random_operator(rng, sites, 6);
    const LocalOperator at = evolve_lindblad(a, t, Direction::Forward, gen, cfg);
    const oracle::Mat ref = oracle::evolve_by_superop(
        oracle::dense_by_kron(a, sites), t,
        [&](const oracle::Mat& x) { return oracle::heisenberg_derivative(x, hd, ls); });
    CHECK((oracle::dense_by_kron(at, sites) - ref).cwiseAbs().maxCoeff() < 1e-10);

    const LocalOperator bt = evolve_lindblad(a, t, Direction::Backward, gen, cfg);
    const oracle::Mat refb = oracle::evolve_by_superop(
        oracle::dense_by_kron(a, sites), t,
        [&](const oracle::Mat& x) { return oracle::backward_derivative(x, hd, ls); });
    CHECK((oracle::dense_by_kron(bt, sites) - refb).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("RK4 evolution agrees with the dense exponential") {
  const LindbladModel m = mixed_model();
  const Window w{0, 2, false};
  const LindbladGenerator gen = LindbladGenerator::from_model(m, w);

  EvolverConfig dense_cfg;
  dense_cfg.window = w;
  dense_cfg.method = EvolveMethod::DenseExponential;
  EvolverConfig ode_cfg;
  ode_cfg.window = w;
  ode_cfg.method = EvolveMethod::OdeRk4;
  ode_cfg.dt = 0.005;

  std::mt19937_64 rng(51);
  const LocalOperator a = oracle::random_operator(rng, w.site_list(), 6);
  for (double t : {0.37, 0.5}) {  // exact landing on non-multiples of dt too
    const LocalOperator ref = evolve_lindblad(a, t, Direction::Forward, gen, dense_cfg);
    const LocalOperator ode = evolve_lindblad(a, t, Direction::Forward, gen, ode_cfg);
    CHECK(coeff_dist(ref, ode) < 1e-6);
  }

  // identity is exactly stationary under the unital Heisenberg semigroup
  const LocalOperator id = LocalOperator::identity({2, 0});
  CHECK(evolve_lindblad(id, 0.4, Direction::Forward, gen, ode_cfg) == id);
  CHECK(coeff_dist(evolve_lindblad(id, 0.4, Direction::Forward, gen, dense_cfg), id) < 1e-12);
}

TEST_CASE("semigroup domain checks") {
  const LindbladModel m = mixed_model();
  const Window w{0, 2, false};
  const LindbladGenerator gen = LindbladGenerator::from_model(m, w);
  EvolverConfig cfg;
  cfg.window = w;
  const LocalOperator a = LocalOperator::sigma_x(0);
  CHECK_THROWS_AS(evolve_lindblad(a, -0.1, Direction::Forward, gen, cfg), InvalidInput);
  CHECK_THROWS_AS(evolve_lindblad(LocalOperator::sigma_x(5), 0.1, Direction::Forward, gen, cfg),
                  SupportOutsideWindow);

  const Window wide{0, 8, false};
  const LindbladGenerator gwide = LindbladGenerator::from_model(m, wide);
  EvolverConfig cfg_wide;
  cfg_wide.window = wide;
  cfg_wide.method = EvolveMethod::DenseExponential;
  CHECK_THROWS_AS(evolve_lindblad(a, 0.1, Direction::Forward, gwide, cfg_wide), WindowTooLarge);
}

TEST_CASE("step-size rejection") {
  const LindbladModel m = mixed_model();
  const Window w{0, 2, false};
  const LindbladGenerator gen = LindbladGenerator::from_model(m, w);
  std::mt19937_64 rng(61);
  const LocalOperator a = oracle::random_operator(rng, w.site_list(), 6);

  EvolverConfig coarse;
  coarse.window = w;
  coarse.dt = 0.5;  // far too big for the requested accuracy
  coarse.step_tol = 1e-12;
  coarse.check_every = 1;
  CHECK_THROWS_AS(evolve_lindblad(a, 1.0, Direction::Forward, gen, coarse), StepSizeRejected);

  EvolverConfig fine = coarse;
  fine.dt = 0.005;
  fine.step_tol = 1e-6;
  const LocalOperator checked = evolve_lindblad(a, 0.25, Direction::Forward, gen, fine);
  EvolverConfig plain = fine;
  plain.step_tol = 0.0;
  const LocalOperator unchecked = evolve_lindblad(a, 0.25, Direction::Forward, gen, plain);
  CHECK(coeff_dist(checked, unchecked) < 1e-7);
}

TEST_CASE("pure Hamiltonian dynamics is reversible; dissipative is not") {
  const LindbladModel xx = xx_model();
  const Window w{0, 3, false};
  const LindbladGenerator gen = LindbladGenerator::from_model(xx, w);
  EvolverConfig cfg;
  cfg.window = w;
  cfg.dt = 0.005;
  std::mt19937_64 rng(71);
  const LocalOperator a = oracle::random_operator(rng, w.site_list(), 5);
  const LocalOperator fwd = evolve_lindblad(a, 0.6, Direction::Forward, gen, cfg);
  const LocalOperator back = evolve_lindblad(fwd, 0.6, Direction::Backward, gen, cfg);
  CHECK(coeff_dist(back, a) < 1e-6);

  const LindbladGenerator dis = LindbladGenerator::from_model(xx_dephasing_model(0.7), w);
  const LocalOperator fd = evolve_lindblad(a, 0.6, Direction::Forward, dis, cfg);
  const LocalOperator bd = evolve_lindblad(fd, 0.6, Direction::Backward, dis, cfg);
  CHECK(coeff_dist(bd, a) > 1e-2);
}

TEST_CASE("unitary window evolution matches the exponential conjugation") {
  const LindbladModel m = mixed_model();
  const Interaction phi = interaction_of(m);
  const Window w{0, 3, false};
  const auto sites = w.site_list();
  const LocalOperator h = hamiltonian_window(phi, w);
  const HamiltonianEvolver ev(h, w);

  const oracle::Mat hd = oracle::dense_by_kron(h, sites);
  std::mt19937_64 rng(81);
  for (double t : {0.4, -0.9}) {
    const LocalOperator a = oracle::random_operator(rng, sites, 6);
    const oracle::Mat u = (cplx(0, t) * hd).exp();
    const oracle::Mat ref = u * oracle::dense_by_kron(a, sites) * u.adjoint();
    const LocalOperator at = ev.evolve(a, t);
    CHECK((oracle::dense_by_kron(at, sites) - ref).cwiseAbs().maxCoeff() < 1e-11);
    // unitarity: spectral norm is preserved
    CHECK(operator_norm(at) == Catch::Approx(operator_norm(a)).epsilon(1e-9));
  }

  // group law
  const LocalOperator a = oracle::random_operator(rng, sites, 5);
  CHECK(coeff_dist(ev.evolve(ev.evolve(a, 0.3), 0.5), ev.evolve(a, 0.8)) < 1e-11);
  CHECK(coeff_dist(ev.evolve(ev.evolve(a, 0.3), -0.3), a) < 1e-11);

  // the RK4 route through the jump-free generator gives the same flow
  EvolverConfig cfg;
  cfg.window = w;
  cfg.method = EvolveMethod::OdeRk4;
  cfg.dt = 0.005;
  CHECK(coeff_dist(evolve_hamiltonian(a, 0.45, phi, cfg), ev.evolve(a, 0.45)) < 1e-6);
  CHECK(coeff_dist(evolve_hamiltonian(a, -0.45, phi, cfg), ev.evolve(a, -0.45)) < 1e-6);
  EvolverConfig dense_cfg = cfg;
  dense_cfg.method = EvolveMethod::DenseExponential;
  CHECK(coeff_dist(evolve_hamiltonian(a, 0.45, phi, dense_cfg), ev.evolve(a, 0.45)) < 1e-11);
}

TEST_CASE("bond dephasing damps sigma^+ at the closed-form rate") {
  // L = c sigma^z on the left site of each bond: sigma^+ decays at rate 2c^2.
  const double c = 0.35;
  LindbladModel m;  // no Hamiltonian at all
  m.jumps.push_back(JumpTuple{cplx(0, 0), cplx(0, 0), cplx(c, 0), cplx(0, 0), cplx(0, 0)});
  const Window w{0, 3, false};
  const LindbladGenerator gen = LindbladGenerator::from_model(m, w);

  const LocalOperator sp = LocalOperator::sigma_plus(0);
  const LocalOperator image = gen.apply(sp, Direction::Forward);
  CHECK(coeff_dist(image, sp * cplx(-2 * c * c, 0)) < 1e-14);

  EvolverConfig ode;
  ode.window = w;
  ode.dt = 0.002;
  EvolverConfig dense_cfg;
  dense_cfg.window = w;
  dense_cfg.method = EvolveMethod::DenseExponential;
  const double t = 0.8;
  const LocalOperator expected = sp * cplx(std::exp(-2 * c * c * t), 0);
  CHECK(coeff_dist(evolve_lindblad(sp, t, Direction::Forward, gen, ode), expected) < 1e-8);
  CHECK(coeff_dist(evolve_lindblad(sp, t, Direction::Forward, gen, dense_cfg), expected) < 1e-8);
}

TEST_CASE("localization onto a fattened support") {
  const LindbladModel xx = xx_model();
  const Window w{0, 5, false};
  const LindbladGenerator gen = LindbladGenerator::from_model(xx, w);
  EvolverConfig cfg;
  cfg.window = w;
  cfg.dt = 0.01;
  const LocalOperator a0 = LocalOperator::sigma_z(2);
  const LocalOperator at = evolve_lindblad(a0, 0.5, Direction::Forward, gen, cfg);
  const ProductGibbsState rho(0.0);

  const LocalizeResult tight = localize(at, {2}, 0, rho);
  const LocalizeResult wide1 = localize(at, {2}, 1, rho);
  const LocalizeResult full = localize(at, {2}, 5, rho);
  CHECK(tight.error >= wide1.error - 1e-12);
  CHECK(full.error < 1e-12);
  CHECK(coeff_dist(full.approximation, at) < 1e-12);
  // the approximation is supported in the fattened region
  CHECK(wide1.approximation.support().front() >= 1);
  CHECK(wide1.approximation.support().back() <= 3);
  CHECK_THROWS_AS(localize(at, {2}, -1, rho), InvalidInput);
}
