// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "txpar/core.hpp"
#include "txpar/rw.hpp"

/// UTXO-style platform: output scripts, transactions spending previous
/// outputs, the set-of-unspent-outputs state and its transition function,
/// and the least read/write approximations derived from inputs/outputs.
///
/// States bind output references to 0 (spent) or 1 (unspent); references
/// never created are unbound.
namespace txpar::utxo {

/// Symbolic signature: the signer's key and the id of the signed
/// transaction (sans witnesses). Verification is structural comparison.
struct Signature {
  Address key;
  std::string tx_id;

  auto operator<=>(const Signature&) const = default;
};

struct ScriptVal;
using ScriptSeq = std::vector<ScriptVal>;

/// Script-level value: integer, bitstring, symbolic signature, or a
/// sequence (the shape of a witness).
struct ScriptVal {
  std::variant<std::int64_t, std::string, Signature, ScriptSeq> v;

  ScriptVal() : v(std::int64_t{0}) {}
  ScriptVal(std::int64_t i) : v(i) {}
  ScriptVal(std::string s) : v(std::move(s)) {}
  ScriptVal(Signature sig) : v(std::move(sig)) {}
  ScriptVal(ScriptSeq seq) : v(std::move(seq)) {}

  bool operator==(const ScriptVal&) const = default;
};

inline bool is_truthy(const ScriptVal& val) {
  struct Visitor {
    bool operator()(std::int64_t i) const { return i != 0; }
    bool operator()(const std::string& s) const { return !s.empty(); }
    bool operator()(const Signature&) const { return true; }
    bool operator()(const ScriptSeq& seq) const { return !seq.empty(); }
  };
  return std::visit(Visitor{}, val.v);
}

/// Canonical byte encoding used by size() and hash(). A singleton
/// sequence encodes as its element, so hashing a one-value witness equals
/// hashing the value.
inline std::string encode(const ScriptVal& val) {
  struct Visitor {
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const Signature& sig) const {
      return std::string("\x01") + sig.key.id + '\x00' + sig.tx_id;
    }
    std::string operator()(const ScriptSeq& seq) const {
      std::string out;
      for (const ScriptVal& e : seq) out += encode(e);
      return out;
    }
  };
  return std::visit(Visitor{}, val.v);
}

/// Hash function over script values. Pluggable; the default is a byte sum
/// mod 256, small enough that preimages are findable by search in tests.
using HashFn = std::function<std::int64_t(const ScriptVal&)>;

inline std::int64_t default_hash(const ScriptVal& val) {
  const std::string bytes = encode(val);
  std::int64_t sum = 0;
  for (unsigned char c : bytes) sum += c;
  return sum % 256;
}

struct Script;
using ScriptPtr = std::shared_ptr<const Script>;

/// Output script expression. Finite, loop-free, so evaluation always
/// terminates.
struct Script {
  enum class Op {
    Const,   // constant value
    Add, Sub, Eq, Lt,
    If,      // if(args[0], args[1], args[2])
    At,      // args[0] at `index` (1-based)
    Wit,     // witness sequence of the redeeming input
    Size,    // byte length of encode(args[0])
    Hash,    // hash(args[0])
    Versig,  // versig(args[0]=key, args[1]=signature)
  };

  Op op = Op::Const;
  ScriptVal constant;
  std::vector<ScriptPtr> args;
  std::uint32_t index = 0;  // for Op::At
};

namespace script {

inline ScriptPtr make(Script s) { return std::make_shared<const Script>(std::move(s)); }
inline ScriptPtr constant(ScriptVal v) { return make({Script::Op::Const, std::move(v), {}, 0}); }
inline ScriptPtr add(ScriptPtr a, ScriptPtr b) { return make({Script::Op::Add, {}, {std::move(a), std::move(b)}, 0}); }
inline ScriptPtr sub(ScriptPtr a, ScriptPtr b) { return make({Script::Op::Sub, {}, {std::move(a), std::move(b)}, 0}); }
inline ScriptPtr eq(ScriptPtr a, ScriptPtr b) { return make({Script::Op::Eq, {}, {std::move(a), std::move(b)}, 0}); }
inline ScriptPtr lt(ScriptPtr a, ScriptPtr b) { return make({Script::Op::Lt, {}, {std::move(a), std::move(b)}, 0}); }
inline ScriptPtr branch(ScriptPtr c, ScriptPtr t, ScriptPtr f) {
  return make({Script::Op::If, {}, {std::move(c), std::move(t), std::move(f)}, 0});
}
inline ScriptPtr at(ScriptPtr e, std::uint32_t n) { return make({Script::Op::At, {}, {std::move(e)}, n}); }
inline ScriptPtr wit() { return make({Script::Op::Wit, {}, {}, 0}); }
inline ScriptPtr size(ScriptPtr e) { return make({Script::Op::Size, {}, {std::move(e)}, 0}); }
inline ScriptPtr hash(ScriptPtr e) { return make({Script::Op::Hash, {}, {std::move(e)}, 0}); }
inline ScriptPtr versig(ScriptPtr key, ScriptPtr sig) {
  return make({Script::Op::Versig, {}, {std::move(key), std::move(sig)}, 0});
}
inline ScriptPtr pay_to(const Address& owner) {
  return versig(constant(ScriptVal{owner.id}), wit());
}

}  // namespace script

struct Output {
  ScriptPtr script;
  std::int64_t value = 0;  // non-negative
};

struct Transaction {
  std::string id;
  std::vector<OutputRef> inputs;
  std::vector<ScriptSeq> witnesses;  // one per input
  std::vector<Output> outputs;

  /// The observables this transaction creates: (id, 1..n).
  std::vector<Observable> output_refs() const {
    std::vector<Observable> refs;
    refs.reserve(outputs.size());
    for (std::uint32_t i = 1; i <= outputs.size(); ++i) refs.push_back(output_obs(id, i));
    return refs;
  }
};

/// Resolves output references to the outputs they denote. Validation
/// needs the referenced script and value, which the state alone (a set of
/// marked references) does not carry.
class TxIndex {
public:
  void add(const Transaction& tx) { txs_.insert_or_assign(tx.id, tx); }

  const Transaction* find(const std::string& id) const {
    auto it = txs_.find(id);
    return it == txs_.end() ? nullptr : &it->second;
  }

  /// Null when the reference dangles (unknown tx or index out of range).
  const Output* resolve(const OutputRef& ref) const {
    const Transaction* tx = find(ref.tx_id);
    if (tx == nullptr || ref.index == 0 || ref.index > tx->outputs.size()) return nullptr;
    return &tx->outputs[ref.index - 1];
  }

private:
  std::map<std::string, Transaction> txs_;
};

namespace detail {

inline ScriptVal unwrap_singleton(ScriptVal v) {
  if (const auto* seq = std::get_if<ScriptSeq>(&v.v); seq != nullptr && seq->size() == 1)
    return (*seq)[0];
  return v;
}

inline std::optional<std::int64_t> as_int(const ScriptVal& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v.v)) return *i;
  return std::nullopt;
}

inline bool add_overflows(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return __builtin_add_overflow(a, b, &out);
}

inline bool sub_overflows(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return __builtin_sub_overflow(a, b, &out);
}

}  // namespace detail

/// Evaluates a script against the redeeming transaction and the index of
/// the input being redeemed. Total: a type mismatch in an operator
/// evaluates to 0 rather than aborting.
inline ScriptVal eval_script(const Script& s, const Transaction& rtx, std::uint32_t input_index,
                             const HashFn& hash_fn = default_hash) {
  using Op = Script::Op;
  const ScriptVal falsy{std::int64_t{0}};
  auto eval = [&](const ScriptPtr& p) { return eval_script(*p, rtx, input_index, hash_fn); };

  switch (s.op) {
    case Op::Const:
      return s.constant;
    case Op::Add:
    case Op::Sub: {
      auto a = detail::as_int(eval(s.args[0]));
      auto b = detail::as_int(eval(s.args[1]));
      if (!a || !b) return falsy;
      std::int64_t out = 0;
      const bool bad = s.op == Op::Add ? detail::add_overflows(*a, *b, out)
                                       : detail::sub_overflows(*a, *b, out);
      return bad ? falsy : ScriptVal{out};
    }
    case Op::Eq:
      return ScriptVal{std::int64_t{eval(s.args[0]) == eval(s.args[1]) ? 1 : 0}};
    case Op::Lt: {
      auto a = detail::as_int(eval(s.args[0]));
      auto b = detail::as_int(eval(s.args[1]));
      if (!a || !b) return falsy;
      return ScriptVal{std::int64_t{*a < *b ? 1 : 0}};
    }
    case Op::If:
      return is_truthy(eval(s.args[0])) ? eval(s.args[1]) : eval(s.args[2]);
    case Op::At: {
      ScriptVal seq = eval(s.args[0]);
      const auto* elems = std::get_if<ScriptSeq>(&seq.v);
      if (elems == nullptr || s.index == 0 || s.index > elems->size()) return falsy;
      return (*elems)[s.index - 1];
    }
    case Op::Wit: {
      if (input_index == 0 || input_index > rtx.witnesses.size()) return falsy;
      return ScriptVal{rtx.witnesses[input_index - 1]};
    }
    case Op::Size:
      return ScriptVal{static_cast<std::int64_t>(encode(eval(s.args[0])).size())};
    case Op::Hash:
      return ScriptVal{hash_fn(eval(s.args[0]))};
    case Op::Versig: {
      const ScriptVal key = detail::unwrap_singleton(eval(s.args[0]));
      const ScriptVal sig = detail::unwrap_singleton(eval(s.args[1]));
      const auto* signature = std::get_if<Signature>(&sig.v);
      if (signature == nullptr) return falsy;
      std::string key_id;
      if (const auto* bytes = std::get_if<std::string>(&key.v)) key_id = *bytes;
      else return falsy;
      const bool ok = signature->key.id == key_id && signature->tx_id == rtx.id;
      return ScriptVal{std::int64_t{ok ? 1 : 0}};
    }
  }
  return falsy;
}

/// A transaction is valid in a state when all its inputs are unspent,
/// every referenced script accepts the matching witness, and the input
/// value covers the output value. Dangling references and duplicate
/// inputs are validity failures, never exceptions.
inline bool validate(const BlockchainState& state, const Transaction& tx, const TxIndex& index,
                     const HashFn& hash_fn = default_hash) {
  if (tx.witnesses.size() != tx.inputs.size()) return false;
  std::int64_t in_value = 0;
  std::set<OutputRef> seen;
  for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
    const OutputRef& ref = tx.inputs[i];
    if (!seen.insert(ref).second) return false;
    auto mark = state.get(Observable{ref});
    if (mark != std::optional<Value>(int_value(1))) return false;
    const Output* out = index.resolve(ref);
    if (out == nullptr) return false;
    if (!is_truthy(eval_script(*out->script, tx, static_cast<std::uint32_t>(i + 1), hash_fn)))
      return false;
    if (detail::add_overflows(in_value, out->value, in_value)) return false;
  }
  std::int64_t out_value = 0;
  for (const Output& out : tx.outputs) {
    if (out.value < 0) return false;
    if (detail::add_overflows(out_value, out.value, out_value)) return false;
  }
  return in_value >= out_value;
}

/// State transition: a valid transaction marks its inputs spent and its
/// outputs unspent; an invalid one leaves the state unchanged.
inline BlockchainState apply(const BlockchainState& state, const Transaction& tx,
                             const TxIndex& index, const HashFn& hash_fn = default_hash) {
  if (!validate(state, tx, index, hash_fn)) return state;
  BlockchainState::Map next = state.bindings();
  for (const OutputRef& ref : tx.inputs) next.insert_or_assign(Observable{ref}, int_value(0));
  for (std::uint32_t i = 1; i <= tx.outputs.size(); ++i)
    next.insert_or_assign(output_obs(tx.id, i), int_value(1));
  return BlockchainState(std::move(next));
}

/// The synthetic state binding exactly the transaction's inputs as
/// unspent: the canonical candidate for the consistency semi-decision.
inline BlockchainState synthetic_input_state(const Transaction& tx) {
  BlockchainState::Map m;
  for (const OutputRef& ref : tx.inputs) m.insert_or_assign(Observable{ref}, int_value(1));
  return BlockchainState(std::move(m));
}

/// Semi-decides consistency: true iff the transaction validates in the
/// synthetic input-binding state or in one of the supplied candidates.
/// Sound but not proven complete for adversarial scripts.
inline bool consistent(const Transaction& tx, const TxIndex& index,
                       const std::vector<BlockchainState>& candidates = {},
                       const HashFn& hash_fn = default_hash) {
  if (validate(synthetic_input_state(tx), tx, index, hash_fn)) return true;
  for (const BlockchainState& state : candidates)
    if (validate(state, tx, index, hash_fn)) return true;
  return false;
}

/// Least safe approximations for a consistent transaction: W = in ∪ out,
/// R = in. Inconsistent transactions are identities everywhere, so both
/// sets collapse to empty.
inline RwSets rw_sets(const Transaction& tx, bool is_consistent) {
  RwSets sets;
  if (!is_consistent) return sets;
  for (const OutputRef& ref : tx.inputs) {
    sets.add_read(Observable{ref});
    sets.add_write(Observable{ref});
  }
  for (const Observable& obs : tx.output_refs()) sets.add_write(obs);
  return sets;
}

/// Fast-path sufficient condition for strong swappability, specific to
/// UTXO platforms: the state validates `tx` and also validates the
/// sequence tx2 tx. Meaningful on reachable states.
inline bool contextual_pswap(const Transaction& tx, const Transaction& tx2,
                             const BlockchainState& state, const TxIndex& index,
                             const HashFn& hash_fn = default_hash) {
  if (tx.id == tx2.id) return false;
  if (!validate(state, tx, index, hash_fn)) return false;
  if (!validate(state, tx2, index, hash_fn)) return false;
  return validate(apply(state, tx2, index, hash_fn), tx, index, hash_fn);
}

}  // namespace txpar::utxo
