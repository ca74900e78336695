#pragma once

// Sparse Pauli-string algebra on an infinite 1-D spin-1/2 lattice.
//
// A PauliString stores only non-identity letters, keyed by (arbitrary
// integer) site. A LocalOperator is a finite complex combination of
// PauliStrings kept in canonical form: terms ordered lexicographically by
// (support, letters), duplicate strings merged, exact-zero coefficients
// removed. The canonical order fixes the floating-point summation order,
// so every derived quantity is reproducible bit-for-bit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spinlab/errors.hpp"
#include "spinlab/util.hpp"

namespace spinlab {

enum class Letter : std::uint8_t { X = 1, Y = 2, Z = 3 };

inline char letter_char(Letter l) {
  switch (l) {
    case Letter::X: return 'X';
    case Letter::Y: return 'Y';
    default: return 'Z';
  }
}

/// A product of single-site Pauli matrices, one letter per listed site.
/// Sites are sorted ascending; identity letters are never stored.
struct PauliString {
  std::vector<std::pair<int, Letter>> letters;  // sorted by site

  PauliString() = default;
  PauliString(std::initializer_list<std::pair<int, Letter>> ls) : letters(ls) {
    std::sort(letters.begin(), letters.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  bool is_identity() const { return letters.empty(); }
  std::size_t size() const { return letters.size(); }

  std::vector<int> support() const {
    std::vector<int> s;
    s.reserve(letters.size());
    for (const auto& [site, l] : letters) s.push_back(site);
    return s;
  }

  bool operator==(const PauliString& o) const { return letters == o.letters; }

  /// Lexicographic by (support, letters): site sequences compared first,
  /// then the letter sequences. This is the canonical term order.
  bool operator<(const PauliString& o) const {
    const std::size_t n = std::min(letters.size(), o.letters.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (letters[i].first != o.letters[i].first)
        return letters[i].first < o.letters[i].first;
    }
    if (letters.size() != o.letters.size()) return letters.size() < o.letters.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (letters[i].second != o.letters[i].second)
        return letters[i].second < o.letters[i].second;
    }
    return false;
  }

  std::string to_string() const {
    if (letters.empty()) return "1";
    std::string s;
    for (const auto& [site, l] : letters) {
      if (!s.empty()) s += '.';
      s += letter_char(l);
      s += std::to_string(site);
    }
    return s;
  }
};

/// sigma_a * sigma_b = phase * sigma_c on one site; returns (c, phase) with
/// c = 0 meaning identity. Cyclic rule: XY = iZ, YZ = iX, ZX = iY.
inline std::pair<int, cplx> letter_product(int a, int b) {
  if (a == 0) return {b, cplx(1, 0)};
  if (b == 0) return {a, cplx(1, 0)};
  if (a == b) return {0, cplx(1, 0)};
  const int c = 6 - a - b;
  const bool cyclic = (b == a % 3 + 1);
  return {c, cyclic ? cplx(0, 1) : cplx(0, -1)};
}

/// Product of two Pauli strings: always a single string times a phase
/// in {±1, ±i} (the algebra closes).
inline std::pair<PauliString, cplx> string_product(const PauliString& p, const PauliString& q) {
  PauliString r;
  r.letters.reserve(p.letters.size() + q.letters.size());
  cplx phase(1, 0);
  std::size_t i = 0, j = 0;
  while (i < p.letters.size() || j < q.letters.size()) {
    if (j >= q.letters.size() ||
        (i < p.letters.size() && p.letters[i].first < q.letters[j].first)) {
      r.letters.push_back(p.letters[i++]);
    } else if (i >= p.letters.size() || q.letters[j].first < p.letters[i].first) {
      r.letters.push_back(q.letters[j++]);
    } else {
      const int site = p.letters[i].first;
      auto [c, ph] = letter_product(static_cast<int>(p.letters[i].second),
                                    static_cast<int>(q.letters[j].second));
      phase *= ph;
      if (c != 0) r.letters.emplace_back(site, static_cast<Letter>(c));
      ++i;
      ++j;
    }
  }
  return {std::move(r), phase};
}

/// Whether two strings commute: they do iff the number of sites where they
/// carry different non-identity letters is even.
inline bool strings_commute(const PauliString& p, const PauliString& q) {
  int anti = 0;
  std::size_t i = 0, j = 0;
  while (i < p.letters.size() && j < q.letters.size()) {
    if (p.letters[i].first < q.letters[j].first) {
      ++i;
    } else if (q.letters[j].first < p.letters[i].first) {
      ++j;
    } else {
      if (p.letters[i].second != q.letters[j].second) ++anti;
      ++i;
      ++j;
    }
  }
  return (anti % 2) == 0;
}

/// Finite complex combination of Pauli strings in canonical form.
/// Immutable by convention after construction: all algebra returns new values.
class LocalOperator {
 public:
  using TermMap = std::map<PauliString, cplx>;

  LocalOperator() = default;

  static LocalOperator zero() { return LocalOperator(); }

  static LocalOperator identity(cplx c = cplx(1, 0)) {
    LocalOperator a;
    if (c != cplx(0, 0)) a.terms_[PauliString{}] = c;
    a.refresh_support();
    return a;
  }

  static LocalOperator term(PauliString p, cplx c) {
    LocalOperator a;
    if (c != cplx(0, 0)) a.terms_[std::move(p)] = c;
    a.refresh_support();
    return a;
  }

  static LocalOperator single(int site, Letter l, cplx c = cplx(1, 0)) {
    return term(PauliString{{site, l}}, c);
  }

  static LocalOperator sigma_x(int site) { return single(site, Letter::X); }
  static LocalOperator sigma_y(int site) { return single(site, Letter::Y); }
  static LocalOperator sigma_z(int site) { return single(site, Letter::Z); }
  /// sigma^± = (sigma^1 ± i sigma^2)/2.
  static LocalOperator sigma_plus(int site) {
    LocalOperator a;
    a.terms_[PauliString{{site, Letter::X}}] = cplx(0.5, 0);
    a.terms_[PauliString{{site, Letter::Y}}] = cplx(0, 0.5);
    a.refresh_support();
    return a;
  }
  static LocalOperator sigma_minus(int site) {
    LocalOperator a;
    a.terms_[PauliString{{site, Letter::X}}] = cplx(0.5, 0);
    a.terms_[PauliString{{site, Letter::Y}}] = cplx(0, -0.5);
    a.refresh_support();
    return a;
  }

  /// Takes ownership of a raw accumulation map and canonicalizes it
  /// (drops exact zeros, caches the support).
  static LocalOperator from_map(TermMap&& m) {
    LocalOperator a;
    a.terms_ = std::move(m);
    a.drop_zeros();
    a.refresh_support();
    return a;
  }

  const TermMap& terms() const { return terms_; }
  std::size_t num_terms() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  cplx coeff(const PauliString& p) const {
    auto it = terms_.find(p);
    return it == terms_.end() ? cplx(0, 0) : it->second;
  }

  /// Union of term supports, sorted ascending (cached).
  const std::vector<int>& support() const { return support_; }

  bool has_empty_support() const { return support_.empty(); }

  /// Diameter of the support; 0 for empty support by convention.
  int diameter() const {
    return support_.empty() ? 0 : support_.back() - support_.front();
  }

  /// Hermitian iff every coefficient is real (strings are Hermitian).
  bool is_hermitian(double tol = 0.0) const {
    for (const auto& [p, c] : terms_)
      if (std::abs(c.imag()) > tol) return false;
    return true;
  }

  /// Sum of |coefficients|: an exact upper bound on the operator norm.
  double coeff_l1() const {
    double s = 0;
    for (const auto& [p, c] : terms_) s += std::abs(c);
    return s;
  }

  /// sqrt(sum |c|^2): the normalized Frobenius norm ‖A‖_F / 2^{n/2}
  /// (Pauli strings are orthogonal); a lower bound on the operator norm.
  double coeff_l2() const {
    double s = 0;
    for (const auto& [p, c] : terms_) s += std::norm(c);
    return std::sqrt(s);
  }

  /// Drops terms with |coefficient| <= eps (no-op for eps <= 0).
  LocalOperator pruned(double eps) const {
    if (eps <= 0) return *this;
    TermMap m;
    for (const auto& [p, c] : terms_)
      if (std::abs(c) > eps) m.emplace(p, c);
    return from_map(std::move(m));
  }

  LocalOperator operator+(const LocalOperator& o) const {
    TermMap m = terms_;
    for (const auto& [p, c] : o.terms_) m[p] += c;
    return from_map(std::move(m));
  }

  LocalOperator operator-(const LocalOperator& o) const {
    TermMap m = terms_;
    for (const auto& [p, c] : o.terms_) m[p] -= c;
    return from_map(std::move(m));
  }

  LocalOperator operator*(cplx s) const {
    TermMap m;
    if (s != cplx(0, 0))
      for (const auto& [p, c] : terms_) m.emplace(p, c * s);
    return from_map(std::move(m));
  }

  LocalOperator operator-() const { return (*this) * cplx(-1, 0); }

  bool operator==(const LocalOperator& o) const { return terms_ == o.terms_; }

 private:
  void drop_zeros() {
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (it->second == cplx(0, 0))
        it = terms_.erase(it);
      else
        ++it;
    }
  }

  void refresh_support() {
    std::vector<int> s;
    for (const auto& [p, c] : terms_)
      for (const auto& [site, l] : p.letters) s.push_back(site);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    support_ = std::move(s);
  }

  TermMap terms_;
  std::vector<int> support_;
};

inline LocalOperator operator*(cplx s, const LocalOperator& a) { return a * s; }

/// Accumulates c * A * B into a raw term map (used by all product kernels).
inline void add_product_into(LocalOperator::TermMap& dest, cplx scale, const LocalOperator& a,
                             const LocalOperator& b) {
  if (scale == cplx(0, 0)) return;
  for (const auto& [p, cp] : a.terms()) {
    for (const auto& [q, cq] : b.terms()) {
      auto [r, phase] = string_product(p, q);
      dest[std::move(r)] += scale * cp * cq * phase;
    }
  }
}

inline LocalOperator multiply(const LocalOperator& a, const LocalOperator& b) {
  LocalOperator::TermMap m;
  add_product_into(m, cplx(1, 0), a, b);
  return LocalOperator::from_map(std::move(m));
}

/// AB - BA. Uses QP = conj(phase(PQ))·R for Pauli strings, so each string
/// pair is multiplied once and commuting pairs contribute exactly zero.
inline LocalOperator commutator(const LocalOperator& a, const LocalOperator& b) {
  LocalOperator::TermMap m;
  for (const auto& [p, cp] : a.terms()) {
    for (const auto& [q, cq] : b.terms()) {
      auto [r, phase] = string_product(p, q);
      // PQ = phase·R and QP = conj(phase)·R, so [P,Q] = (phase - conj(phase))·R.
      const cplx diff = phase - std::conj(phase);
      if (diff != cplx(0, 0)) m[std::move(r)] += cp * cq * diff;
    }
  }
  return LocalOperator::from_map(std::move(m));
}

/// {A,B} = AB + BA.
inline LocalOperator anticommutator(const LocalOperator& a, const LocalOperator& b) {
  LocalOperator::TermMap m;
  for (const auto& [p, cp] : a.terms()) {
    for (const auto& [q, cq] : b.terms()) {
      auto [r, phase] = string_product(p, q);
      const cplx sum = phase + std::conj(phase);
      if (sum != cplx(0, 0)) m[std::move(r)] += cp * cq * sum;
    }
  }
  return LocalOperator::from_map(std::move(m));
}

/// Hermitian adjoint: Pauli strings are self-adjoint, so only coefficients
/// conjugate. (AB)† = B†A† holds exactly on this representation.
inline LocalOperator adjoint(const LocalOperator& a) {
  LocalOperator::TermMap m;
  for (const auto& [p, c] : a.terms()) m.emplace(p, std::conj(c));
  return LocalOperator::from_map(std::move(m));
}

/// Relabels every site through f (must be injective on the support).
inline LocalOperator remap_sites(const LocalOperator& a, const std::function<int(int)>& f) {
  LocalOperator::TermMap m;
  for (const auto& [p, c] : a.terms()) {
    PauliString q;
    q.letters.reserve(p.letters.size());
    for (const auto& [site, l] : p.letters) q.letters.emplace_back(f(site), l);
    std::sort(q.letters.begin(), q.letters.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    m[std::move(q)] += c;
  }
  return LocalOperator::from_map(std::move(m));
}

/// Space translation: supp(result) = supp(A) + x. Group law and norm
/// preservation are exact.
inline LocalOperator translate(const LocalOperator& a, int x) {
  if (x == 0) return a;
  return remap_sites(a, [x](int s) { return s + x; });
}

/// Support geometry report for a pair of observables (ℓ1 metric, D = 1).
struct SupportGeometry {
  std::vector<int> supp_a;
  std::vector<int> supp_b;
  double dist = 0.0;  // +infinity when either support is empty
  int diam_a = 0;
  int diam_b = 0;
  bool empty_a = false;
  bool empty_b = false;
};

inline double support_distance(const std::vector<int>& sa, const std::vector<int>& sb) {
  if (sa.empty() || sb.empty()) return std::numeric_limits<double>::infinity();
  // Both sorted: minimal |x - y| via a merge walk.
  long best = std::numeric_limits<long>::max();
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const long d = static_cast<long>(sa[i]) - static_cast<long>(sb[j]);
    best = std::min(best, std::labs(d));
    if (d < 0)
      ++i;
    else if (d > 0)
      ++j;
    else
      return 0.0;
  }
  return static_cast<double>(best);
}

inline SupportGeometry geometry(const LocalOperator& a, const LocalOperator& b) {
  SupportGeometry g;
  g.supp_a = a.support();
  g.supp_b = b.support();
  g.empty_a = g.supp_a.empty();
  g.empty_b = g.supp_b.empty();
  g.diam_a = a.diameter();
  g.diam_b = b.diameter();
  g.dist = support_distance(g.supp_a, g.supp_b);
  return g;
}

/// Total magnetization (sum of sigma^z) over an explicit site list.
inline LocalOperator magnetization(const std::vector<int>& sites) {
  LocalOperator::TermMap m;
  for (int s : sites) m[PauliString{{s, Letter::Z}}] += cplx(1, 0);
  return LocalOperator::from_map(std::move(m));
}

}  // namespace spinlab
