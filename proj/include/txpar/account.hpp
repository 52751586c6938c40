// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "txpar/core.hpp"
#include "txpar/rw.hpp"

/// Account-style platform: contracts as named functions over a loop-free
/// statement language, key-value account state with mandatory balances,
/// transaction validity/application, and the per-transaction read/write
/// analysis that feeds strong swappability.
namespace txpar::account {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// A storage key before evaluation: base name plus index expressions
/// (models mappings like owner[id] or approvals[from][sender]).
struct KeyExpr {
  std::string base;
  std::vector<ExprPtr> indices;
};

struct Expr {
  enum class Kind {
    Const,   // literal value
    Name,    // formal parameter, or the special names sender / value
    Lookup,  // storage read self.key
    Add, Sub, Eq, Ne, Lt, And, Or, Not,
  };

  Kind kind = Kind::Const;
  Value constant;
  std::string name;
  KeyExpr key;
  std::vector<ExprPtr> args;
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class Kind {
    Skip,
    Assign,   // key := expr
    Seq,      // stmts in order
    If,       // cond / then / else
    Require,  // throw on falsy
    Throw,
    Send,     // transfer `amount` from self to `recipient`
  };

  Kind kind = Kind::Skip;
  KeyExpr target;
  ExprPtr expr;      // Assign rhs, If/Require condition, Send amount
  ExprPtr recipient; // Send
  std::vector<StmtPtr> stmts;  // Seq
  StmtPtr then_branch;
  StmtPtr else_branch;
};

namespace ast {

inline ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }
inline ExprPtr constant(Value v) { return make({Expr::Kind::Const, std::move(v), "", {}, {}}); }
inline ExprPtr name(std::string n) { return make({Expr::Kind::Name, {}, std::move(n), {}, {}}); }
inline ExprPtr sender() { return name("sender"); }
inline ExprPtr value() { return name("value"); }
inline ExprPtr lookup(std::string base, std::vector<ExprPtr> indices = {}) {
  return make({Expr::Kind::Lookup, {}, "", KeyExpr{std::move(base), std::move(indices)}, {}});
}
inline ExprPtr binary(Expr::Kind k, ExprPtr a, ExprPtr b) {
  return make({k, {}, "", {}, {std::move(a), std::move(b)}});
}
inline ExprPtr add(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Add, std::move(a), std::move(b)); }
inline ExprPtr sub(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Sub, std::move(a), std::move(b)); }
inline ExprPtr eq(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Eq, std::move(a), std::move(b)); }
inline ExprPtr ne(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Ne, std::move(a), std::move(b)); }
inline ExprPtr lt(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Lt, std::move(a), std::move(b)); }
inline ExprPtr both(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::And, std::move(a), std::move(b)); }
inline ExprPtr either(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Or, std::move(a), std::move(b)); }
inline ExprPtr negate(ExprPtr a) { return make({Expr::Kind::Not, {}, "", {}, {std::move(a)}}); }

inline StmtPtr make(Stmt s) { return std::make_shared<const Stmt>(std::move(s)); }
inline StmtPtr skip() { return make(Stmt{}); }
inline StmtPtr assign(std::string base, std::vector<ExprPtr> indices, ExprPtr rhs) {
  Stmt s;
  s.kind = Stmt::Kind::Assign;
  s.target = KeyExpr{std::move(base), std::move(indices)};
  s.expr = std::move(rhs);
  return make(std::move(s));
}
inline StmtPtr seq(std::vector<StmtPtr> stmts) {
  Stmt s;
  s.kind = Stmt::Kind::Seq;
  s.stmts = std::move(stmts);
  return make(std::move(s));
}
inline StmtPtr cond(ExprPtr c, StmtPtr t, StmtPtr e = skip()) {
  Stmt s;
  s.kind = Stmt::Kind::If;
  s.expr = std::move(c);
  s.then_branch = std::move(t);
  s.else_branch = std::move(e);
  return make(std::move(s));
}
inline StmtPtr require(ExprPtr c) {
  Stmt s;
  s.kind = Stmt::Kind::Require;
  s.expr = std::move(c);
  return make(std::move(s));
}
inline StmtPtr fail() {
  Stmt s;
  s.kind = Stmt::Kind::Throw;
  return make(std::move(s));
}
inline StmtPtr send(ExprPtr amount, ExprPtr recipient) {
  Stmt s;
  s.kind = Stmt::Kind::Send;
  s.expr = std::move(amount);
  s.recipient = std::move(recipient);
  return make(std::move(s));
}

}  // namespace ast

struct Function {
  std::vector<std::string> params;
  StmtPtr body;
};

struct Contract {
  Address address;
  std::map<std::string, Function> functions;
};

/// The single function a plain user address exposes; calling it just
/// moves the attached value.
inline const std::string& user_function_name() {
  static const std::string kName = "transfer";
  return kName;
}

/// Known contracts by address. Addresses not registered here are user
/// addresses carrying only the implicit transfer function.
class ContractRegistry {
public:
  void add(Contract c) { contracts_.insert_or_assign(c.address, std::move(c)); }

  const Contract* find(const Address& addr) const {
    auto it = contracts_.find(addr);
    return it == contracts_.end() ? nullptr : &it->second;
  }

  bool is_contract(const Address& addr) const { return contracts_.count(addr) != 0; }

  const std::map<Address, Contract>& all() const { return contracts_; }

private:
  std::map<Address, Contract> contracts_;
};

struct AccountTransaction {
  Address sender;  // user address
  Address target;
  std::string function;
  std::int64_t value = 0;  // non-negative
  std::vector<Value> args;
};

/// Evaluation environment: sender, value and the formal parameters.
using Env = std::map<std::string, Value>;

/// Statement/expression evaluation either produces a result or fails;
/// failure is a value that callers turn into transaction invalidity.
struct Failure {};

template <typename T>
using Fallible = std::variant<T, Failure>;

namespace detail {

inline bool failed(const Fallible<Value>& r) { return std::holds_alternative<Failure>(r); }

inline std::optional<std::int64_t> as_int(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::nullopt;
}

inline std::optional<Address> as_address(const Value& v) {
  if (const auto* a = std::get_if<Address>(&v)) return *a;
  return std::nullopt;
}

inline bool add_overflows(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return __builtin_add_overflow(a, b, &out);
}

inline bool sub_overflows(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return __builtin_sub_overflow(a, b, &out);
}

}  // namespace detail

/// Evaluates an expression. Reading an unbound storage key yields the
/// default 0 (mapping semantics); arithmetic overflow and type mismatches
/// fail.
inline Fallible<Value> eval_expr(const Expr& e, const BlockchainState& state, const Env& env,
                                 const Address& self) {
  using Kind = Expr::Kind;
  auto eval = [&](const ExprPtr& p) { return eval_expr(*p, state, env, self); };

  switch (e.kind) {
    case Kind::Const:
      return e.constant;
    case Kind::Name: {
      auto it = env.find(e.name);
      if (it == env.end()) return Failure{};
      return it->second;
    }
    case Kind::Lookup: {
      std::vector<Value> indices;
      indices.reserve(e.key.indices.size());
      for (const ExprPtr& idx : e.key.indices) {
        Fallible<Value> v = eval(idx);
        if (detail::failed(v)) return Failure{};
        indices.push_back(std::get<Value>(std::move(v)));
      }
      auto bound = state.get(account_obs(self, e.key.base, std::move(indices)));
      return bound.value_or(int_value(0));
    }
    case Kind::Add:
    case Kind::Sub: {
      Fallible<Value> a = eval(e.args[0]);
      Fallible<Value> b = eval(e.args[1]);
      if (detail::failed(a) || detail::failed(b)) return Failure{};
      auto ia = detail::as_int(std::get<Value>(a));
      auto ib = detail::as_int(std::get<Value>(b));
      if (!ia || !ib) return Failure{};
      std::int64_t out = 0;
      const bool bad = e.kind == Kind::Add ? detail::add_overflows(*ia, *ib, out)
                                           : detail::sub_overflows(*ia, *ib, out);
      if (bad) return Failure{};
      return int_value(out);
    }
    case Kind::Eq:
    case Kind::Ne: {
      Fallible<Value> a = eval(e.args[0]);
      Fallible<Value> b = eval(e.args[1]);
      if (detail::failed(a) || detail::failed(b)) return Failure{};
      const bool equal = std::get<Value>(a) == std::get<Value>(b);
      return bool_value(e.kind == Kind::Eq ? equal : !equal);
    }
    case Kind::Lt: {
      Fallible<Value> a = eval(e.args[0]);
      Fallible<Value> b = eval(e.args[1]);
      if (detail::failed(a) || detail::failed(b)) return Failure{};
      auto ia = detail::as_int(std::get<Value>(a));
      auto ib = detail::as_int(std::get<Value>(b));
      if (!ia || !ib) return Failure{};
      return bool_value(*ia < *ib);
    }
    case Kind::And:
    case Kind::Or: {
      Fallible<Value> a = eval(e.args[0]);
      if (detail::failed(a)) return Failure{};
      const bool lhs = is_truthy(std::get<Value>(a));
      if (e.kind == Kind::And && !lhs) return bool_value(false);
      if (e.kind == Kind::Or && lhs) return bool_value(true);
      Fallible<Value> b = eval(e.args[1]);
      if (detail::failed(b)) return Failure{};
      return bool_value(is_truthy(std::get<Value>(b)));
    }
    case Kind::Not: {
      Fallible<Value> a = eval(e.args[0]);
      if (detail::failed(a)) return Failure{};
      return bool_value(!is_truthy(std::get<Value>(a)));
    }
  }
  return Failure{};
}

/// Evaluates a statement in contract `self`, producing the new state or a
/// failure. Failure causes: throw, failed require, arithmetic overflow,
/// a send exceeding the contract balance, and a send to an address with
/// no balance binding.
inline Fallible<BlockchainState> eval_stmt(const Stmt& s, const BlockchainState& state,
                                           const Env& env, const Address& self) {
  using Kind = Stmt::Kind;
  switch (s.kind) {
    case Kind::Skip:
      return state;
    case Kind::Assign: {
      std::vector<Value> indices;
      indices.reserve(s.target.indices.size());
      for (const ExprPtr& idx : s.target.indices) {
        Fallible<Value> v = eval_expr(*idx, state, env, self);
        if (detail::failed(v)) return Failure{};
        indices.push_back(std::get<Value>(std::move(v)));
      }
      Fallible<Value> rhs = eval_expr(*s.expr, state, env, self);
      if (detail::failed(rhs)) return Failure{};
      return state.with(account_obs(self, s.target.base, std::move(indices)),
                        std::get<Value>(std::move(rhs)));
    }
    case Kind::Seq: {
      BlockchainState current = state;
      for (const StmtPtr& part : s.stmts) {
        Fallible<BlockchainState> next = eval_stmt(*part, current, env, self);
        if (std::holds_alternative<Failure>(next)) return Failure{};
        current = std::get<BlockchainState>(std::move(next));
      }
      return current;
    }
    case Kind::If: {
      Fallible<Value> c = eval_expr(*s.expr, state, env, self);
      if (detail::failed(c)) return Failure{};
      const Stmt& branch = is_truthy(std::get<Value>(c)) ? *s.then_branch : *s.else_branch;
      return eval_stmt(branch, state, env, self);
    }
    case Kind::Require: {
      Fallible<Value> c = eval_expr(*s.expr, state, env, self);
      if (detail::failed(c) || !is_truthy(std::get<Value>(c))) return Failure{};
      return state;
    }
    case Kind::Throw:
      return Failure{};
    case Kind::Send: {
      Fallible<Value> amount = eval_expr(*s.expr, state, env, self);
      Fallible<Value> to = eval_expr(*s.recipient, state, env, self);
      if (detail::failed(amount) || detail::failed(to)) return Failure{};
      auto n = detail::as_int(std::get<Value>(amount));
      auto recipient = detail::as_address(std::get<Value>(to));
      if (!n || *n < 0 || !recipient) return Failure{};
      auto self_balance = state.get(balance_obs(self));
      auto to_balance = state.get(balance_obs(*recipient));
      if (!self_balance || !to_balance) return Failure{};
      auto from_units = detail::as_int(*self_balance);
      auto to_units = detail::as_int(*to_balance);
      if (!from_units || !to_units || *from_units < *n) return Failure{};
      std::int64_t credited = 0;
      if (detail::add_overflows(*to_units, *n, credited)) return Failure{};
      if (self == *recipient) return state;
      return state.with(balance_obs(self), int_value(*from_units - *n))
          .with(balance_obs(*recipient), int_value(credited));
    }
  }
  return Failure{};
}

namespace detail {

inline const Function* resolve_function(const ContractRegistry& registry,
                                        const BlockchainState& state,
                                        const AccountTransaction& tx) {
  static const Function kUserTransfer{{}, ast::skip()};
  if (const Contract* contract = registry.find(tx.target)) {
    auto it = contract->functions.find(tx.function);
    return it == contract->functions.end() ? nullptr : &it->second;
  }
  // User address: exactly the implicit transfer function, and only for an
  // address the state knows about.
  if (tx.function != user_function_name()) return nullptr;
  if (!state.bound(balance_obs(tx.target))) return nullptr;
  return &kUserTransfer;
}

/// Moves `amount` between balances; empty when a balance binding is
/// missing or arithmetic misbehaves.
inline std::optional<BlockchainState> transfer_value(const BlockchainState& state,
                                                     const Address& from, const Address& to,
                                                     std::int64_t amount) {
  if (from == to) return state;
  auto from_balance = state.get(balance_obs(from));
  auto to_balance = state.get(balance_obs(to));
  if (!from_balance || !to_balance) return std::nullopt;
  auto from_units = as_int(*from_balance);
  auto to_units = as_int(*to_balance);
  if (!from_units || !to_units) return std::nullopt;
  std::int64_t credited = 0;
  if (add_overflows(*to_units, amount, credited)) return std::nullopt;
  return state.with(balance_obs(from), int_value(*from_units - amount))
      .with(balance_obs(to), int_value(credited));
}

/// Shared validity-plus-semantics path: empty result means invalid.
inline std::optional<BlockchainState> try_apply(const BlockchainState& state,
                                                const AccountTransaction& tx,
                                                const ContractRegistry& registry) {
  if (tx.value < 0) return std::nullopt;
  if (registry.is_contract(tx.sender)) return std::nullopt;
  auto sender_balance = state.get(balance_obs(tx.sender));
  if (!sender_balance) return std::nullopt;
  auto sender_units = as_int(*sender_balance);
  if (!sender_units || *sender_units < tx.value) return std::nullopt;

  const Function* fn = resolve_function(registry, state, tx);
  if (fn == nullptr || fn->params.size() != tx.args.size()) return std::nullopt;

  auto funded = transfer_value(state, tx.sender, tx.target, tx.value);
  if (!funded) return std::nullopt;

  Env env{{"sender", Value{tx.sender}}, {"value", int_value(tx.value)}};
  for (std::size_t i = 0; i < fn->params.size(); ++i) env.insert_or_assign(fn->params[i], tx.args[i]);

  Fallible<BlockchainState> result = eval_stmt(*fn->body, *funded, env, tx.target);
  if (std::holds_alternative<Failure>(result)) return std::nullopt;
  return std::get<BlockchainState>(std::move(result));
}

}  // namespace detail

/// Valid when the sender can fund the call and the body terminates in a
/// non-error state. Unknown functions and argument-count mismatches are
/// invalid, not errors.
inline bool validate(const BlockchainState& state, const AccountTransaction& tx,
                     const ContractRegistry& registry) {
  return detail::try_apply(state, tx, registry).has_value();
}

/// Invalid transactions have no effect on the state.
inline BlockchainState apply(const BlockchainState& state, const AccountTransaction& tx,
                             const ContractRegistry& registry) {
  auto next = detail::try_apply(state, tx, registry);
  return next ? std::move(*next) : state;
}

// ---------------------------------------------------------------------------
// Static read/write analysis.
//
// Abstractly interprets the called body with the transaction's concrete
// arguments bound: every storage lookup goes into R, every assignment
// target into W, both branches of conditionals are collected, and balance
// observables are added for the value transfer and for sends. Index
// expressions that do not fold to constants widen to the whole mapping.

namespace detail {

/// Constant folding under the environment only; lookups never fold.
inline std::optional<Value> fold_const(const Expr& e, const Env& env) {
  using Kind = Expr::Kind;
  switch (e.kind) {
    case Kind::Const:
      return e.constant;
    case Kind::Name: {
      auto it = env.find(e.name);
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case Kind::Lookup:
      return std::nullopt;
    case Kind::Add:
    case Kind::Sub: {
      auto a = fold_const(*e.args[0], env);
      auto b = fold_const(*e.args[1], env);
      if (!a || !b) return std::nullopt;
      auto ia = as_int(*a);
      auto ib = as_int(*b);
      if (!ia || !ib) return std::nullopt;
      std::int64_t out = 0;
      const bool bad = e.kind == Kind::Add ? add_overflows(*ia, *ib, out)
                                           : sub_overflows(*ia, *ib, out);
      if (bad) return std::nullopt;
      return int_value(out);
    }
    case Kind::Eq:
    case Kind::Ne: {
      auto a = fold_const(*e.args[0], env);
      auto b = fold_const(*e.args[1], env);
      if (!a || !b) return std::nullopt;
      return bool_value(e.kind == Kind::Eq ? *a == *b : *a != *b);
    }
    case Kind::Lt: {
      auto a = fold_const(*e.args[0], env);
      auto b = fold_const(*e.args[1], env);
      if (!a || !b) return std::nullopt;
      auto ia = as_int(*a);
      auto ib = as_int(*b);
      if (!ia || !ib) return std::nullopt;
      return bool_value(*ia < *ib);
    }
    case Kind::And:
    case Kind::Or: {
      auto a = fold_const(*e.args[0], env);
      auto b = fold_const(*e.args[1], env);
      if (!a || !b) return std::nullopt;
      const bool lhs = is_truthy(*a);
      const bool rhs = is_truthy(*b);
      return bool_value(e.kind == Kind::And ? (lhs && rhs) : (lhs || rhs));
    }
    case Kind::Not: {
      auto a = fold_const(*e.args[0], env);
      if (!a) return std::nullopt;
      return bool_value(!is_truthy(*a));
    }
  }
  return std::nullopt;
}

/// The pattern a key expression denotes under the argument binding:
/// exact when all indices fold, the whole mapping otherwise.
inline ObsPattern key_pattern(const KeyExpr& key, const Env& env, const Address& self) {
  std::vector<Value> indices;
  indices.reserve(key.indices.size());
  for (const ExprPtr& idx : key.indices) {
    auto v = fold_const(*idx, env);
    if (!v) return MappingAll{self, key.base};
    indices.push_back(std::move(*v));
  }
  return account_obs(self, key.base, std::move(indices));
}

inline void collect_expr_reads(const Expr& e, const Env& env, const Address& self, RwSets& out);

inline void collect_key_reads(const KeyExpr& key, const Env& env, const Address& self,
                              RwSets& out) {
  for (const ExprPtr& idx : key.indices) collect_expr_reads(*idx, env, self, out);
}

inline void collect_expr_reads(const Expr& e, const Env& env, const Address& self, RwSets& out) {
  if (e.kind == Expr::Kind::Lookup) {
    collect_key_reads(e.key, env, self, out);
    out.add_read(key_pattern(e.key, env, self));
    return;
  }
  for (const ExprPtr& arg : e.args) collect_expr_reads(*arg, env, self, out);
}

inline void add_send_balances(const Expr& recipient, const Env& env, const Address& self,
                              RwSets& out) {
  out.add_read(balance_obs(self));
  out.add_write(balance_obs(self));
  auto to = fold_const(recipient, env);
  if (to) {
    if (auto addr = as_address(*to)) {
      out.add_read(balance_obs(*addr));
      out.add_write(balance_obs(*addr));
      return;
    }
    // A constant that is not an address always fails at run time and
    // writes nothing more than the already-collected reads justify.
    return;
  }
  out.add_read(AnyBalance{});
  out.add_write(AnyBalance{});
}

inline void collect_stmt(const Stmt& s, const Env& env, const Address& self, RwSets& out) {
  using Kind = Stmt::Kind;
  switch (s.kind) {
    case Kind::Skip:
    case Kind::Throw:
      return;
    case Kind::Assign:
      collect_key_reads(s.target, env, self, out);
      collect_expr_reads(*s.expr, env, self, out);
      out.add_write(key_pattern(s.target, env, self));
      return;
    case Kind::Seq:
      for (const StmtPtr& part : s.stmts) collect_stmt(*part, env, self, out);
      return;
    case Kind::If:
      collect_expr_reads(*s.expr, env, self, out);
      collect_stmt(*s.then_branch, env, self, out);
      collect_stmt(*s.else_branch, env, self, out);
      return;
    case Kind::Require:
      collect_expr_reads(*s.expr, env, self, out);
      return;
    case Kind::Send:
      collect_expr_reads(*s.expr, env, self, out);
      collect_expr_reads(*s.recipient, env, self, out);
      add_send_balances(*s.recipient, env, self, out);
      return;
  }
}

}  // namespace detail

/// Safe over-approximation of the observables a transaction reads and
/// writes, specialised to its concrete arguments. An unresolvable call
/// yields the trivially safe pair, flagged via `top`.
inline RwSets analyze_rw(const AccountTransaction& tx, const ContractRegistry& registry) {
  RwSets out;
  const Function* fn = nullptr;
  if (const Contract* contract = registry.find(tx.target)) {
    auto it = contract->functions.find(tx.function);
    if (it != contract->functions.end()) fn = &it->second;
  } else if (tx.function == user_function_name()) {
    static const Function kUserTransfer{{}, ast::skip()};
    fn = &kUserTransfer;
  }
  if (fn == nullptr || fn->params.size() != tx.args.size() || tx.value < 0 ||
      registry.is_contract(tx.sender)) {
    out.top = true;
    return out;
  }

  Env env{{"sender", Value{tx.sender}}, {"value", int_value(tx.value)}};
  for (std::size_t i = 0; i < fn->params.size(); ++i) env.insert_or_assign(fn->params[i], tx.args[i]);

  if (tx.value > 0) {
    out.add_read(balance_obs(tx.sender));
    out.add_read(balance_obs(tx.target));
    out.add_write(balance_obs(tx.sender));
    out.add_write(balance_obs(tx.target));
  }
  detail::collect_stmt(*fn->body, env, tx.target, out);
  return out;
}

}  // namespace txpar::account
