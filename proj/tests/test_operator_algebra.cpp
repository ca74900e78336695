#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <complex>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spinlab/dense.hpp"
#include "spinlab/pauli.hpp"

using namespace spinlab;

namespace {

double mat_dist(const oracle::Mat& a, const oracle::Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("single-letter products follow the cyclic rule") {
  // XY = iZ, YZ = iX, ZX = iY and anticyclic partners.
  struct Row { int a, b, c; cplx ph; };
  const cplx i1(0, 1);
  const std::vector<Row> table = {
      {1, 1, 0, {1, 0}}, {2, 2, 0, {1, 0}}, {3, 3, 0, {1, 0}},
      {1, 2, 3, i1},     {2, 3, 1, i1},     {3, 1, 2, i1},
      {2, 1, 3, -i1},    {3, 2, 1, -i1},    {1, 3, 2, -i1},
  };
  for (const auto& row : table) {
    auto [c, ph] = letter_product(row.a, row.b);
    CHECK(c == row.c);
    CHECK(ph == row.ph);
  }
  // identity absorbs
  CHECK(letter_product(0, 2) == std::make_pair(2, cplx(1, 0)));
  CHECK(letter_product(3, 0) == std::make_pair(3, cplx(1, 0)));
}

TEST_CASE("string products match dense Kronecker arithmetic") {
  std::mt19937_64 rng(12345);
  const std::vector<int> sites = {0, 1, 2};
  for (int rep = 0; rep < 200; ++rep) {
    const PauliString p = oracle::random_string(rng, sites);
    const PauliString q = oracle::random_string(rng, sites);
    auto [r, phase] = string_product(p, q);
    const oracle::Mat md = oracle::dense_by_kron(LocalOperator::term(p, {1, 0}), sites) *
                           oracle::dense_by_kron(LocalOperator::term(q, {1, 0}), sites);
    const oracle::Mat rd = phase * oracle::dense_by_kron(LocalOperator::term(r, {1, 0}), sites);
    REQUIRE(mat_dist(md, rd) < 1e-14);
    // phases close in {1, -1, i, -i}
    CHECK(std::abs(std::abs(phase) - 1.0) < 1e-15);
    // commutation predicate agrees with the dense commutator
    const bool comm = strings_commute(p, q);
    const oracle::Mat qp = oracle::dense_by_kron(LocalOperator::term(q, {1, 0}), sites) *
                           oracle::dense_by_kron(LocalOperator::term(p, {1, 0}), sites);
    CHECK(comm == (mat_dist(md, qp) < 1e-14));
  }
}

TEST_CASE("string product is associative") {
  std::mt19937_64 rng(777);
  const std::vector<int> sites = {-1, 0, 3};
  for (int rep = 0; rep < 100; ++rep) {
    const PauliString a = oracle::random_string(rng, sites);
    const PauliString b = oracle::random_string(rng, sites);
    const PauliString c = oracle::random_string(rng, sites);
    auto [ab, ph_ab] = string_product(a, b);
    auto [ab_c, ph1] = string_product(ab, c);
    auto [bc, ph_bc] = string_product(b, c);
    auto [a_bc, ph2] = string_product(a, bc);
    CHECK(ab_c == a_bc);
    CHECK(std::abs(ph_ab * ph1 - ph_bc * ph2) < 1e-15);
  }
}

TEST_CASE("canonical term order is a strict total order with identity first") {
  const PauliString id{};
  const PauliString x0{{0, Letter::X}};
  const PauliString y0{{0, Letter::Y}};
  const PauliString z0{{0, Letter::Z}};
  const PauliString x1{{1, Letter::X}};
  const PauliString x0x1{{0, Letter::X}, {1, Letter::X}};
  const PauliString x0z1{{0, Letter::X}, {1, Letter::Z}};
  const PauliString z0x1{{0, Letter::Z}, {1, Letter::X}};

  CHECK(id < x0);
  CHECK(x0 < y0);   // letters compared after equal supports
  CHECK(y0 < z0);
  CHECK(x0 < x0x1); // prefix support comes first
  CHECK(x0x1 < x1); // support sequence dominates: (0,1) before (1)
  CHECK(x0x1 < x0z1);
  CHECK(x0z1 < z0x1);
  CHECK_FALSE(x0 < x0);

  // strict weak order sanity on random samples
  std::mt19937_64 rng(42);
  std::vector<PauliString> sample;
  for (int k = 0; k < 60; ++k) sample.push_back(oracle::random_string(rng, {0, 1, 2}));
  for (const auto& a : sample)
    for (const auto& b : sample) {
      if (a == b) {
        CHECK_FALSE(a < b);
        CHECK_FALSE(b < a);
      } else {
        CHECK((a < b) != (b < a));
      }
    }
}

TEST_CASE("operator arithmetic matches dense arithmetic") {
  std::mt19937_64 rng(999);
  const std::vector<int> sites = {0, 1, 2};
  for (int rep = 0; rep < 40; ++rep) {
    const LocalOperator a = oracle::random_operator(rng, sites, 6);
    const LocalOperator b = oracle::random_operator(rng, sites, 6);
    const oracle::Mat ad = oracle::dense_by_kron(a, sites);
    const oracle::Mat bd = oracle::dense_by_kron(b, sites);

    CHECK(mat_dist(oracle::dense_by_kron(a + b, sites), ad + bd) < 1e-13);
    CHECK(mat_dist(oracle::dense_by_kron(a - b, sites), ad - bd) < 1e-13);
    CHECK(mat_dist(oracle::dense_by_kron(a * cplx(0.5, -2), sites), cplx(0.5, -2) * ad) < 1e-13);
    CHECK(mat_dist(oracle::dense_by_kron(multiply(a, b), sites), ad * bd) < 1e-12);
    CHECK(mat_dist(oracle::dense_by_kron(commutator(a, b), sites), ad * bd - bd * ad) < 1e-12);
    CHECK(mat_dist(oracle::dense_by_kron(anticommutator(a, b), sites), ad * bd + bd * ad) < 1e-12);
    CHECK(mat_dist(oracle::dense_by_kron(adjoint(a), sites), ad.adjoint()) < 1e-13);
  }
}

TEST_CASE("adjoint and Hermiticity") {
  std::mt19937_64 rng(5);
  const LocalOperator a = oracle::random_operator(rng, {0, 1}, 5);
  CHECK(adjoint(adjoint(a)) == a);
  const LocalOperator h = a + adjoint(a);
  CHECK(h.is_hermitian(0.0));
  CHECK(oracle::random_operator(rng, {0, 1}, 5, /*hermitian=*/true).is_hermitian(0.0));
  const LocalOperator sp = LocalOperator::sigma_plus(0);
  CHECK_FALSE(sp.is_hermitian(1e-15));
  CHECK(adjoint(sp) == LocalOperator::sigma_minus(0));
}

TEST_CASE("sigma^+ sigma^- algebra") {
  const LocalOperator sp = LocalOperator::sigma_plus(3);
  const LocalOperator sm = LocalOperator::sigma_minus(3);
  // sigma^+ sigma^- = (1 + sigma^z)/2, the projector onto up.
  const LocalOperator proj_up = multiply(sp, sm);
  CHECK(proj_up == LocalOperator::identity({0.5, 0}) + LocalOperator::sigma_z(3) * cplx(0.5, 0));
  // sigma^+ raises: acting on down gives up. In dense form on site {3}:
  const oracle::Mat d = oracle::dense_by_kron(sp, {3});
  CHECK(std::abs(d(0, 1) - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(d(0, 0)) + std::abs(d(1, 0)) + std::abs(d(1, 1)) < 1e-15);
}

TEST_CASE("canonicalization drops exact zeros and merges duplicates") {
  LocalOperator::TermMap m;
  m[PauliString{{0, Letter::X}}] = cplx(1, 0);
  m[PauliString{{0, Letter::X}}] += cplx(-1, 0);
  m[PauliString{{1, Letter::Z}}] = cplx(2, 0);
  const LocalOperator a = LocalOperator::from_map(std::move(m));
  CHECK(a.num_terms() == 1);
  CHECK(a.coeff(PauliString{{1, Letter::Z}}) == cplx(2, 0));
  CHECK(a.support() == std::vector<int>{1});

  const LocalOperator b = LocalOperator::sigma_x(0);
  CHECK((b - b).is_zero());
  CHECK((b - b).has_empty_support());
}

TEST_CASE("pruned drops small terms only") {
  LocalOperator a = LocalOperator::sigma_x(0) * cplx(1e-9, 0) + LocalOperator::sigma_z(1);
  const LocalOperator p = a.pruned(1e-6);
  CHECK(p.num_terms() == 1);
  CHECK(p.coeff(PauliString{{1, Letter::Z}}) == cplx(1, 0));
  CHECK(a.pruned(0.0) == a);
}

TEST_CASE("translation is exact and composes") {
  std::mt19937_64 rng(31);
  const LocalOperator a = oracle::random_operator(rng, {0, 1, 2}, 7);
  CHECK(translate(a, 0) == a);
  CHECK(translate(translate(a, 5), -5) == a);
  CHECK(translate(translate(a, 3), 4) == translate(a, 7));
  const LocalOperator t = translate(a, 10);
  CHECK(t.coeff_l1() == a.coeff_l1());
  std::vector<int> shifted = a.support();
  for (int& s : shifted) s += 10;
  CHECK(t.support() == shifted);
}

TEST_CASE("support geometry") {
  const LocalOperator a = LocalOperator::sigma_x(0) + LocalOperator::sigma_z(4);
  const LocalOperator b = LocalOperator::sigma_y(7);
  const SupportGeometry g = geometry(a, b);
  CHECK(g.dist == 3.0);
  CHECK(g.diam_a == 4);
  CHECK(g.diam_b == 0);
  CHECK_FALSE(g.empty_a);

  const SupportGeometry ge = geometry(LocalOperator::identity(), b);
  CHECK(ge.empty_a);
  CHECK(std::isinf(ge.dist));

  CHECK(support_distance({0, 5}, {5, 9}) == 0.0);
  CHECK(support_distance({0, 1}, {-3, -2}) == 2.0);
}

TEST_CASE("coefficient norms bracket the operator norm") {
  std::mt19937_64 rng(64);
  for (int rep = 0; rep < 25; ++rep) {
    const LocalOperator a = oracle::random_operator(rng, {0, 1, 2}, 8);
    if (a.is_zero()) continue;
    const double n = operator_norm(a);
    CHECK(a.coeff_l2() <= n * (1 + 1e-12) + 1e-12);
    CHECK(n <= a.coeff_l1() * (1 + 1e-12) + 1e-12);
  }
}

TEST_CASE("operator norm on closed forms") {
  CHECK(operator_norm(LocalOperator::sigma_x(2)) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(operator_norm(LocalOperator::sigma_plus(0)) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(operator_norm(LocalOperator::identity({-2.5, 0})) == Catch::Approx(2.5).epsilon(1e-14));
  CHECK(operator_norm(LocalOperator::zero()) == 0.0);
  // a 1 + b sigma^z has norm max(|a+b|, |a-b|)
  const LocalOperator m = LocalOperator::identity({0.3, 0}) + LocalOperator::sigma_z(1) * cplx(-1.1, 0);
  CHECK(operator_norm(m) == Catch::Approx(1.4).epsilon(1e-12));
}

TEST_CASE("power-iteration norm agrees with dense SVD") {
  std::mt19937_64 rng(4242);
  for (int rep = 0; rep < 10; ++rep) {
    const LocalOperator a = oracle::random_operator(rng, {0, 1, 2, 3}, 10);
    if (a.is_zero()) continue;
    const double svd = operator_norm(a);           // 4 sites -> dense SVD path
    const double pow = operator_norm(a, 4);        // force limit = support size
    // (same limit, but explicitly also compare against the kron oracle)
    Eigen::JacobiSVD<oracle::Mat> o(oracle::dense_by_kron(a, a.support()));
    CHECK(svd == Catch::Approx(o.singularValues()(0)).epsilon(1e-10));
    CHECK(pow == Catch::Approx(o.singularValues()(0)).epsilon(1e-10));
  }
  // operators wider than 7 sites take the matrix-free path; compare on a
  // norm that is known exactly: a sum of commuting strings has norm l1.
  LocalOperator wide = LocalOperator::zero();
  for (int s = 0; s < 9; ++s) wide = wide + LocalOperator::sigma_z(s) * cplx(0.5, 0);
  CHECK(operator_norm(wide) == Catch::Approx(4.5).epsilon(1e-9));
  LocalOperator huge = wide + LocalOperator::sigma_z(12);
  for (int s = 14; s < 17; ++s) huge = huge + LocalOperator::sigma_x(s);
  CHECK_THROWS_AS(operator_norm(huge), SupportTooLarge);
}

TEST_CASE("dense realization round-trips with the Pauli transform") {
  std::mt19937_64 rng(2024);
  const std::vector<int> sites = {2, 5, 6};
  for (int rep = 0; rep < 20; ++rep) {
    const LocalOperator a = oracle::random_operator(rng, sites, 9);
    const MatrixXc d = dense_on(a, sites);
    CHECK(mat_dist(d, oracle::dense_by_kron(a, sites)) < 1e-13);
    const LocalOperator back = pauli_decompose(d, sites);
    CHECK((back - a).coeff_l1() < 1e-12);
    // with a drop tolerance, round-off ghost terms disappear entirely
    CHECK(pauli_decompose(d, sites, 1e-12).num_terms() == a.num_terms());
  }
  for (int rep = 0; rep < 10; ++rep) {
    const oracle::Mat m = oracle::random_matrix(rng, 8);
    const LocalOperator a = pauli_decompose(m, sites);
    CHECK(mat_dist(dense_on(a, sites), m) < 1e-12);
  }
}

TEST_CASE("compiled application equals dense matrix-vector product") {
  std::mt19937_64 rng(88);
  const std::vector<int> sites = {0, 1, 2, 3};
  for (int rep = 0; rep < 15; ++rep) {
    const LocalOperator a = oracle::random_operator(rng, sites, 8);
    const CompiledOperator op(a, sites);
    const oracle::Mat ad = oracle::dense_by_kron(a, sites);
    const oracle::Vec x = oracle::random_vector(rng, 16);
    const oracle::Vec y = op.apply(x);
    CHECK((y - ad * x).cwiseAbs().maxCoeff() < 1e-13);
  }
  CHECK_THROWS_AS(CompiledOperator(LocalOperator::sigma_x(9), sites), SupportOutsideWindow);
}

TEST_CASE("trace pairing against a dense state") {
  std::mt19937_64 rng(303);
  const std::vector<int> sites = {0, 1, 2};
  for (int rep = 0; rep < 15; ++rep) {
    const oracle::Mat rho = oracle::random_density_matrix(rng, 8);
    const LocalOperator a = oracle::random_operator(rng, sites, 6);
    const cplx fast = dense_trace_product(rho, a, sites);
    const cplx slow = (rho * oracle::dense_by_kron(a, sites)).trace();
    CHECK(std::abs(fast - slow) < 1e-13);
  }
  const oracle::Mat rho = oracle::random_density_matrix(rng, 8);
  CHECK_THROWS_AS(dense_trace_product(rho, LocalOperator::sigma_x(5), sites),
                  SupportOutsideWindow);
}

TEST_CASE("trace norm of simple matrices") {
  oracle::Mat m = oracle::Mat::Zero(2, 2);
  m(0, 0) = 3;
  m(1, 1) = -4;
  CHECK(trace_norm(m) == Catch::Approx(7.0).epsilon(1e-13));
}

TEST_CASE("magnetization is the sum of sigma^z") {
  const LocalOperator m = magnetization({0, 1, 2});
  CHECK(m == LocalOperator::sigma_z(0) + LocalOperator::sigma_z(1) + LocalOperator::sigma_z(2));
  CHECK(operator_norm(m) == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("remap must stay injective on the support") {
  // non-injective maps merge letters; the algebra stays consistent because
  // remap re-sorts, but translation never does this. Check group behavior.
  const LocalOperator a = LocalOperator::sigma_x(0) + LocalOperator::sigma_y(1);
  const LocalOperator r = remap_sites(a, [](int s) { return -s; });
  CHECK(r == LocalOperator::sigma_x(0) + LocalOperator::sigma_y(-1));
}

TEST_CASE("string rendering") {
  CHECK(PauliString{}.to_string() == "1");
  CHECK(PauliString{{3, Letter::Z}, {0, Letter::X}}.to_string() == "X0.Z3");
}
