// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>
#include <variant>

#include "txpar/core.hpp"

/// Read/write set machinery: the result type of the static analyses and
/// the Bernstein-style disjointness test behind strong swappability.
namespace txpar {

/// All keys of one mapping at one address. Emitted by the account
/// analysis when an index expression does not reduce to a constant.
struct MappingAll {
  Address addr;
  std::string base;

  auto operator<=>(const MappingAll&) const = default;
};

/// The account balance of any address. Emitted when a send recipient is
/// not statically known.
struct AnyBalance {
  auto operator<=>(const AnyBalance&) const = default;
};

/// Element of a read/write set: a concrete observable or a symbolic
/// widening of a whole mapping / all balances.
using ObsPattern = std::variant<Observable, MappingAll, AnyBalance>;

inline std::string to_string(const ObsPattern& p) {
  struct Visitor {
    std::string operator()(const Observable& o) const { return to_string(o); }
    std::string operator()(const MappingAll& m) const { return m.addr.id + "." + m.base + "[*]"; }
    std::string operator()(const AnyBalance&) const { return "*.balance"; }
  };
  return std::visit(Visitor{}, p);
}

namespace detail {

inline bool is_plain_balance(const Observable& o) {
  const auto* key = std::get_if<AccountKey>(&o);
  return key != nullptr && key->base == "balance" && key->indices.empty();
}

}  // namespace detail

namespace detail {

inline bool exact_meets_mapping(const Observable& o, const MappingAll& m) {
  const auto* key = std::get_if<AccountKey>(&o);
  return key != nullptr && key->addr == m.addr && key->base == m.base;
}

}  // namespace detail

/// Whether two set elements may denote a common observable. Symbolic
/// elements overlap every concrete key of their mapping and the widened
/// set of the same mapping.
inline bool patterns_overlap(const ObsPattern& a, const ObsPattern& b) {
  const auto* exact_a = std::get_if<Observable>(&a);
  const auto* exact_b = std::get_if<Observable>(&b);
  const auto* wild_a = std::get_if<MappingAll>(&a);
  const auto* wild_b = std::get_if<MappingAll>(&b);

  if (exact_a && exact_b) return *exact_a == *exact_b;
  if (exact_a && wild_b) return detail::exact_meets_mapping(*exact_a, *wild_b);
  if (wild_a && exact_b) return detail::exact_meets_mapping(*exact_b, *wild_a);
  if (wild_a && wild_b) return *wild_a == *wild_b;
  // One side is AnyBalance.
  if (exact_a) return detail::is_plain_balance(*exact_a);
  if (exact_b) return detail::is_plain_balance(*exact_b);
  if (wild_a) return wild_a->base == "balance";
  if (wild_b) return wild_b->base == "balance";
  return true;
}

/// Pair of safe approximations (reads, writes) for one transaction.
/// `top` marks the trivially safe pair (all observables); it is produced
/// when the analysis cannot resolve the called function and makes the
/// transaction conservatively dependent on everything.
struct RwSets {
  std::set<ObsPattern> reads;
  std::set<ObsPattern> writes;
  bool top = false;

  void add_read(ObsPattern p) { reads.insert(std::move(p)); }
  void add_write(ObsPattern p) { writes.insert(std::move(p)); }

  bool operator==(const RwSets&) const = default;
};

inline bool pattern_sets_disjoint(const std::set<ObsPattern>& a, const std::set<ObsPattern>& b) {
  for (const ObsPattern& pa : a)
    for (const ObsPattern& pb : b)
      if (patterns_overlap(pa, pb)) return false;
  return true;
}

/// Bernstein-style condition: (Ra ∪ Wa) ∩ Wb = ∅ = (Rb ∪ Wb) ∩ Wa, with
/// symbolic elements counted as overlapping their mapping. Top sets are
/// never swappable with anything.
inline bool strong_swap(const RwSets& a, const RwSets& b) {
  if (a.top || b.top) return false;
  return pattern_sets_disjoint(a.reads, b.writes) && pattern_sets_disjoint(a.writes, b.writes) &&
         pattern_sets_disjoint(b.reads, a.writes);
}

}  // namespace txpar
