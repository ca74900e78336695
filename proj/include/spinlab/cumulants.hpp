#pragma once

// Partition combinatorics and cumulant calculus.
//
// Set partitions are enumerated by the first-block recursion (choose the
// block containing the least element, recurse on the rest); non-crossing
// partitions by the segment recursion (the complement of the first block
// splits into independent gaps), which generates exactly the non-crossing
// family by construction. Classical (Ursell) joint cumulants come from the
// closed-form Möbius sum over all partitions; free cumulants from the
// defining recursion kappa_n = omega_n - sum over proper non-crossing
// partitions of products of lower cumulants, memoized per index subset.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "spinlab/dynamics.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/pauli.hpp"
#include "spinlab/states.hpp"
#include "spinlab/util.hpp"

namespace spinlab {

inline constexpr int kMaxArity = 10;

/// Partition of {0..n-1}: disjoint blocks covering the range, each block
/// ascending, blocks ordered by least element.
struct Partition {
  std::vector<std::vector<int>> blocks;

  std::size_t num_blocks() const { return blocks.size(); }
  bool operator==(const Partition& o) const { return blocks == o.blocks; }
};

/// No four positions i < j < k < l with {i,k} in one block and {j,l} in
/// another (exhaustive quadruple scan).
inline bool is_noncrossing(const Partition& p) {
  int n = 0;
  for (const auto& b : p.blocks)
    for (int e : b) n = std::max(n, e + 1);
  std::vector<int> id(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    for (int e : p.blocks[k]) id[static_cast<std::size_t>(e)] = static_cast<int>(k);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        for (int l = k + 1; l < n; ++l)
          if (id[i] == id[k] && id[j] == id[l] && id[i] != id[j]) return false;
  return true;
}

enum class PartitionKind { All, NonCrossing };

namespace detail {

inline void check_arity(int n) {
  if (n < 1) throw InvalidInput("arity must be at least 1");
  if (n > kMaxArity)
    throw ArityTooLarge("arity " + std::to_string(n) + " exceeds the cap " +
                        std::to_string(kMaxArity));
}

/// All partitions of the ordered element list, by the first-block recursion.
inline void enumerate_all_rec(const std::vector<int>& elems,
                              std::vector<std::vector<int>>& stack,
                              std::vector<Partition>& out) {
  if (elems.empty()) {
    out.push_back(Partition{stack});
    return;
  }
  const int head = elems.front();
  const std::size_t m = elems.size() - 1;
  // every subset of the remaining elements can join the head's block
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<int> block = {head};
    std::vector<int> rest;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (std::size_t{1} << i))
        block.push_back(elems[i + 1]);
      else
        rest.push_back(elems[i + 1]);
    }
    stack.push_back(std::move(block));
    enumerate_all_rec(rest, stack, out);
    stack.pop_back();
  }
}

/// Non-crossing partitions of a contiguous position segment: the first
/// block takes positions within the segment; the gaps between consecutive
/// chosen positions close off and recurse independently.
inline void enumerate_nc_rec(const std::vector<int>& elems,
                             std::vector<std::vector<int>>& stack,
                             std::vector<Partition>& out);

inline void enumerate_nc_gaps(const std::vector<std::vector<int>>& gaps, std::size_t gi,
                              std::vector<std::vector<int>>& stack, std::vector<Partition>& out) {
  if (gi == gaps.size()) {
    // all gaps resolved: canonicalize block order by least element
    Partition p{stack};
    std::sort(p.blocks.begin(), p.blocks.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    out.push_back(std::move(p));
    return;
  }
  std::vector<Partition> sub;
  std::vector<std::vector<int>> substack;
  enumerate_nc_rec(gaps[gi], substack, sub);
  for (const Partition& s : sub) {
    const std::size_t mark = stack.size();
    for (const auto& b : s.blocks) stack.push_back(b);
    enumerate_nc_gaps(gaps, gi + 1, stack, out);
    stack.resize(mark);
  }
}

inline void enumerate_nc_rec(const std::vector<int>& elems, std::vector<std::vector<int>>& stack,
                             std::vector<Partition>& out) {
  if (elems.empty()) {
    out.push_back(Partition{stack});
    return;
  }
  const std::size_t m = elems.size() - 1;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<int> block = {elems[0]};
    std::vector<std::vector<int>> gaps;
    std::vector<int> gap;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (std::size_t{1} << i)) {
        block.push_back(elems[i + 1]);
        if (!gap.empty()) {
          gaps.push_back(std::move(gap));
          gap.clear();
        }
      } else {
        gap.push_back(elems[i + 1]);
      }
    }
    if (!gap.empty()) gaps.push_back(std::move(gap));
    stack.push_back(std::move(block));
    enumerate_nc_gaps(gaps, 0, stack, out);
    stack.pop_back();
  }
}

}  // namespace detail

/// Complete, duplicate-free, canonically ordered partition list of {0..n-1}.
inline std::vector<Partition> enumerate_partitions(int n, PartitionKind kind) {
  detail::check_arity(n);
  std::vector<int> elems(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) elems[static_cast<std::size_t>(i)] = i;
  std::vector<Partition> out;
  std::vector<std::vector<int>> stack;
  if (kind == PartitionKind::All)
    detail::enumerate_all_rec(elems, stack, out);
  else
    detail::enumerate_nc_rec(elems, stack, out);
  return out;
}

/// Möbius function against the one-block partition:
/// mu(pi, top) = (-1)^(|pi|-1) (|pi|-1)!.
inline long long mobius_to_top(const Partition& p) {
  long long f = 1;
  for (std::size_t k = 2; k < p.num_blocks(); ++k) f *= static_cast<long long>(k);
  return (p.num_blocks() % 2 == 1) ? f : -f;
}

/// Joint moment source: maps an ordered index tuple (i_1 < ... < i_k after
/// order-preserving restriction) to omega(A_{i_1} ... A_{i_k}).
using MomentFunctional = std::function<cplx(const std::vector<int>&)>;

/// Moments of an operator tuple in a product Gibbs state.
inline MomentFunctional make_moment_functional(ProductGibbsState state,
                                               std::vector<LocalOperator> ops) {
  return [state, ops = std::move(ops)](const std::vector<int>& idx) {
    std::vector<const LocalOperator*> ptrs;
    ptrs.reserve(idx.size());
    for (int i : idx) {
      if (i < 0 || static_cast<std::size_t>(i) >= ops.size())
        throw InvalidInput("moment index out of range");
      ptrs.push_back(&ops[static_cast<std::size_t>(i)]);
    }
    return expect_product(state, ptrs);
  };
}

/// Moments from an explicit table keyed by sorted index tuples.
/// Missing entries raise IncompleteTable.
inline MomentFunctional make_table_functional(std::map<std::vector<int>, cplx> table) {
  return [table = std::move(table)](const std::vector<int>& idx) {
    const auto it = table.find(idx);
    if (it == table.end()) {
      std::string key;
      for (int i : idx) key += std::to_string(i) + " ";
      throw IncompleteTable("moment table has no entry for indices [ " + key + "]");
    }
    return it->second;
  };
}

namespace detail {

inline std::vector<int> restrict_indices(const std::vector<int>& idx,
                                         const std::vector<int>& positions) {
  std::vector<int> out;
  out.reserve(positions.size());
  for (int p : positions) out.push_back(idx[static_cast<std::size_t>(p)]);
  return out;
}

inline cplx free_cumulant_rec(const std::vector<int>& idx, const MomentFunctional& m,
                              std::map<std::vector<int>, cplx>& memo) {
  const auto hit = memo.find(idx);
  if (hit != memo.end()) return hit->second;
  const int n = static_cast<int>(idx.size());
  cplx value = m(idx);
  if (n > 1) {
    for (const Partition& p : enumerate_partitions(n, PartitionKind::NonCrossing)) {
      if (p.num_blocks() == 1) continue;  // the top partition is kappa itself
      cplx prod(1, 0);
      for (const auto& block : p.blocks)
        prod *= free_cumulant_rec(restrict_indices(idx, block), m, memo);
      value -= prod;
    }
  }
  memo.emplace(idx, value);
  return value;
}

}  // namespace detail

/// Classical (Ursell) joint cumulant of the variables listed in `idx`, by
/// the closed-form Möbius sum over all set partitions.
inline cplx classical_cumulant(const MomentFunctional& m, const std::vector<int>& idx) {
  detail::check_arity(static_cast<int>(idx.size()));
  const int n = static_cast<int>(idx.size());
  cplx total(0, 0);
  for (const Partition& p : enumerate_partitions(n, PartitionKind::All)) {
    cplx prod(1, 0);
    for (const auto& block : p.blocks) prod *= m(detail::restrict_indices(idx, block));
    total += static_cast<double>(mobius_to_top(p)) * prod;
  }
  return total;
}

/// Free joint cumulant by the defining non-crossing recursion (memoized).
inline cplx free_cumulant(const MomentFunctional& m, const std::vector<int>& idx) {
  detail::check_arity(static_cast<int>(idx.size()));
  std::map<std::vector<int>, cplx> memo;
  return detail::free_cumulant_rec(idx, m, memo);
}

inline std::vector<int> iota_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

inline cplx classical_cumulant(const MomentFunctional& m, int n) {
  return classical_cumulant(m, iota_indices(n));
}
inline cplx free_cumulant(const MomentFunctional& m, int n) {
  return free_cumulant(m, iota_indices(n));
}

enum class CumulantKind { Classical, Free };

/// Cumulant table for every nonempty subset of {0..n-1}.
inline std::map<std::vector<int>, cplx> cumulant_table(const MomentFunctional& m, int n,
                                                       CumulantKind kind) {
  detail::check_arity(n);
  std::map<std::vector<int>, cplx> out;
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) idx.push_back(i);
    out[idx] = (kind == CumulantKind::Classical) ? classical_cumulant(m, idx)
                                                 : free_cumulant(m, idx);
  }
  return out;
}

/// Moment of the tuple `idx` reconstructed from a cumulant table:
/// omega = sum over partitions (of the matching kind) of block products.
/// The table must contain every restriction that appears.
inline cplx cumulants_to_moments(const std::map<std::vector<int>, cplx>& kappa,
                                 const std::vector<int>& idx, CumulantKind kind) {
  detail::check_arity(static_cast<int>(idx.size()));
  const int n = static_cast<int>(idx.size());
  const PartitionKind pk =
      (kind == CumulantKind::Classical) ? PartitionKind::All : PartitionKind::NonCrossing;
  cplx total(0, 0);
  for (const Partition& p : enumerate_partitions(n, pk)) {
    cplx prod(1, 0);
    for (const auto& block : p.blocks) {
      const std::vector<int> sub = detail::restrict_indices(idx, block);
      const auto it = kappa.find(sub);
      if (it == kappa.end()) {
        std::string key;
        for (int i : sub) key += std::to_string(i) + " ";
        throw IncompleteTable("cumulant table has no entry for indices [ " + key + "]");
      }
      prod *= it->second;
    }
    total += prod;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Cumulant decay scans.
// ---------------------------------------------------------------------------

/// One spatial configuration of the scan: operator i is translated by
/// positions[i] and evolved for times[i].
struct DecayConfiguration {
  std::vector<int> positions;
  std::vector<double> times;
};

struct DecayPoint {
  int z = 0;               // max over i of min over j != i of support distance
  double abs_cumulant = 0;
};

struct DecayScan {
  int arity = 0;
  std::vector<DecayPoint> points;
  LineFit log_fit;  // log |c| against z over points above the floor
};

/// Scans |c_n| (classical) of translated, individually evolved observables
/// against the separation scale z. Negative times are allowed only for
/// jump-free generators (reversible dynamics).
inline DecayScan cumulant_decay_scan(const ProductGibbsState& state,
                                     const LindbladGenerator& gen, const EvolverConfig& cfg,
                                     const std::vector<LocalOperator>& ops,
                                     const std::vector<DecayConfiguration>& schedule,
                                     double floor = 1e-15) {
  const int n = static_cast<int>(ops.size());
  if (n < 2) throw InvalidInput("decay scan needs at least two observables");
  detail::check_arity(n);

  DecayScan scan;
  scan.arity = n;
  std::vector<double> zs, logs;
  for (const DecayConfiguration& conf : schedule) {
    if (conf.positions.size() != ops.size() || conf.times.size() != ops.size())
      throw InvalidInput("decay configuration must give one position and time per observable");
    std::vector<LocalOperator> placed;
    placed.reserve(ops.size());
    for (std::size_t i = 0; i < ops.size(); ++i)
      placed.push_back(translate(ops[i], conf.positions[i]));

    int z = 0;
    for (std::size_t i = 0; i < placed.size(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < placed.size(); ++j)
        if (j != i)
          nearest = std::min(nearest, support_distance(placed[i].support(), placed[j].support()));
      z = std::max(z, static_cast<int>(nearest));
    }

    std::vector<LocalOperator> evolved;
    evolved.reserve(placed.size());
    for (std::size_t i = 0; i < placed.size(); ++i) {
      const double t = conf.times[i];
      if (t >= 0) {
        evolved.push_back(evolve_lindblad(placed[i], t, Direction::Forward, gen, cfg));
      } else {
        if (!gen.jumps().empty())
          throw InvalidInput("negative times need reversible (jump-free) dynamics");
        evolved.push_back(evolve_lindblad(placed[i], -t, Direction::Backward, gen, cfg));
      }
    }

    const MomentFunctional m = make_moment_functional(state, std::move(evolved));
    const double c = std::abs(classical_cumulant(m, n));
    scan.points.push_back(DecayPoint{z, c});
    if (c > floor) {
      zs.push_back(static_cast<double>(z));
      logs.push_back(std::log(c));
    }
  }
  if (zs.size() >= 2) scan.log_fit = fit_line(zs, logs);
  return scan;
}

}  // namespace spinlab
