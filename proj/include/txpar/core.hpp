// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

/// Platform-agnostic state model: observables, values, blockchain states
/// and state updates, plus the operations shared by every platform
/// (update application, state difference, observational equivalence).
namespace txpar {

/// Opaque account/user address. Strong type so addresses never mix with
/// plain strings in value positions.
struct Address {
  std::string id;

  Address() = default;
  explicit Address(std::string s) : id(std::move(s)) {}

  auto operator<=>(const Address&) const = default;
};

/// A value bound to an observable: 64-bit integer, boolean, address or
/// string. Equality is structural across the variant.
using Value = std::variant<std::int64_t, bool, Address, std::string>;

inline Value int_value(std::int64_t v) { return Value{v}; }
inline Value bool_value(bool v) { return Value{v}; }
inline Value addr_value(std::string a) { return Value{Address{std::move(a)}}; }
inline Value str_value(std::string s) { return Value{std::move(s)}; }

/// Truthiness used by guards: zero, false and empty strings are falsy.
inline bool is_truthy(const Value& v) {
  struct Visitor {
    bool operator()(std::int64_t i) const { return i != 0; }
    bool operator()(bool b) const { return b; }
    bool operator()(const Address& a) const { return !a.id.empty(); }
    bool operator()(const std::string& s) const { return !s.empty(); }
  };
  return std::visit(Visitor{}, v);
}

inline std::string to_string(const Value& v) {
  struct Visitor {
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const Address& a) const { return a.id; }
    std::string operator()(const std::string& s) const { return "\"" + s + "\""; }
  };
  return std::visit(Visitor{}, v);
}

/// Reference to the i-th output of a transaction. Output indices are 1-based.
struct OutputRef {
  std::string tx_id;
  std::uint32_t index = 0;

  auto operator<=>(const OutputRef&) const = default;
};

/// A key in an account's key-value store: a base name plus zero or more
/// index values, e.g. balance, owner[1], approvals[A][B]. The (base,
/// indices) pair is the identity, so distinct keys never collide even if
/// they render to similar strings.
struct AccountKey {
  Address addr;
  std::string base;
  std::vector<Value> indices;

  auto operator<=>(const AccountKey&) const = default;
};

/// An atomically readable/writable unit of blockchain state: a UTXO
/// output reference or an account key. The variant order fixes the
/// canonical total order (platform tag first, then fields).
using Observable = std::variant<OutputRef, AccountKey>;

inline Observable output_obs(std::string tx_id, std::uint32_t index) {
  return OutputRef{std::move(tx_id), index};
}

inline Observable account_obs(Address addr, std::string base, std::vector<Value> indices = {}) {
  return AccountKey{std::move(addr), std::move(base), std::move(indices)};
}

/// The distinguished "balance" key every account binds.
inline Observable balance_obs(const Address& addr) {
  return AccountKey{addr, "balance", {}};
}

inline std::string to_string(const Observable& obs) {
  struct Visitor {
    std::string operator()(const OutputRef& r) const {
      return "(" + r.tx_id + "," + std::to_string(r.index) + ")";
    }
    std::string operator()(const AccountKey& k) const {
      std::string out = k.addr.id + "." + k.base;
      for (const Value& idx : k.indices) out += "[" + to_string(idx) + "]";
      return out;
    }
  };
  return std::visit(Visitor{}, obs);
}

/// Finite partial map recording new values for changed observables;
/// applied by override. Iteration follows the canonical observable order.
class StateUpdate {
public:
  using Map = std::map<Observable, Value>;

  StateUpdate() = default;
  explicit StateUpdate(Map bindings) : bindings_(std::move(bindings)) {}

  bool empty() const { return bindings_.empty(); }
  std::size_t size() const { return bindings_.size(); }
  const Map& bindings() const { return bindings_; }

  void bind(Observable obs, Value v) { bindings_.insert_or_assign(std::move(obs), std::move(v)); }

  std::optional<Value> get(const Observable& obs) const {
    auto it = bindings_.find(obs);
    if (it == bindings_.end()) return std::nullopt;
    return it->second;
  }

  bool binds(const Observable& obs) const { return bindings_.count(obs) != 0; }

  bool operator==(const StateUpdate&) const = default;

private:
  Map bindings_;
};

/// Immutable partial map from observables to values. Lookup of an unbound
/// observable is a distinguished empty result, never an arbitrary value.
/// Copies share the underlying map, so snapshots are O(1) and safe to
/// hand to concurrent readers; every mutation builds a fresh map.
class BlockchainState {
public:
  using Map = std::map<Observable, Value>;

  BlockchainState() : bindings_(empty_map()) {}
  explicit BlockchainState(Map bindings)
      : bindings_(std::make_shared<const Map>(std::move(bindings))) {}

  std::optional<Value> get(const Observable& obs) const {
    auto it = bindings_->find(obs);
    if (it == bindings_->end()) return std::nullopt;
    return it->second;
  }

  bool bound(const Observable& obs) const { return bindings_->count(obs) != 0; }
  const Map& bindings() const { return *bindings_; }
  std::size_t size() const { return bindings_->size(); }

  /// New state with one extra/overridden binding.
  BlockchainState with(Observable obs, Value v) const {
    Map next = *bindings_;
    next.insert_or_assign(std::move(obs), std::move(v));
    return BlockchainState(std::move(next));
  }

  bool operator==(const BlockchainState& other) const {
    return bindings_ == other.bindings_ || *bindings_ == *other.bindings_;
  }

private:
  static std::shared_ptr<const Map> empty_map() {
    static const std::shared_ptr<const Map> kEmpty = std::make_shared<const Map>();
    return kEmpty;
  }

  std::shared_ptr<const Map> bindings_;
};

/// Applies an update by override: bindings in `update` win, everything
/// else is carried over from `state`. Inputs are left untouched.
inline BlockchainState apply_update(const BlockchainState& state, const StateUpdate& update) {
  if (update.empty()) return state;
  BlockchainState::Map next = state.bindings();
  for (const auto& [obs, v] : update.bindings()) next.insert_or_assign(obs, v);
  return BlockchainState(std::move(next));
}

/// The update binding exactly the observables `after` binds to a value
/// different from (or absent in) `before`. Satisfies
/// apply_update(before, state_diff(after, before)) == after whenever
/// `after` binds everything `before` does.
inline StateUpdate state_diff(const BlockchainState& after, const BlockchainState& before) {
  StateUpdate diff;
  for (const auto& [obs, v] : after.bindings()) {
    auto prev = before.get(obs);
    if (!prev.has_value() || *prev != v) diff.bind(obs, v);
  }
  return diff;
}

/// Observational equivalence on a set of observables: the states agree on
/// every observable in `q`, where an unbound observable only matches an
/// unbound one.
inline bool obs_equiv(const BlockchainState& s1, const BlockchainState& s2,
                      const std::set<Observable>& q) {
  return std::all_of(q.begin(), q.end(),
                     [&](const Observable& obs) { return s1.get(obs) == s2.get(obs); });
}

}  // namespace txpar
