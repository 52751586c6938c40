// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "txpar/account.hpp"
#include "txpar/core.hpp"
#include "txpar/rw.hpp"
#include "txpar/utxo.hpp"

/// Platform-tagged transactions, the abstract platform interface and the
/// serial blockchain semantics (left fold of the transition function).
namespace txpar {

using Transaction = std::variant<utxo::Transaction, account::AccountTransaction>;

/// Ordered sequence of transactions; may be empty.
using Blockchain = std::vector<Transaction>;

/// Short display label for a transaction (used in nets, DOT and reports).
inline std::string tx_label(const Transaction& tx) {
  struct Visitor {
    std::string operator()(const utxo::Transaction& t) const { return t.id; }
    std::string operator()(const account::AccountTransaction& t) const {
      return t.sender.id + ">" + t.target.id + "." + t.function;
    }
  };
  return std::visit(Visitor{}, tx);
}

/// State transition function of a platform. `apply` is total: invalid
/// transactions (including ones from the other platform) are identities.
class PlatformSemantics {
public:
  virtual ~PlatformSemantics() = default;
  virtual BlockchainState apply(const BlockchainState& state, const Transaction& tx) const = 0;
  virtual BlockchainState initial_state() const = 0;
};

/// Iterates the transition function over the block; the empty block is
/// the identity.
inline BlockchainState exec_serial(const Blockchain& block, const BlockchainState& state,
                                   const PlatformSemantics& platform) {
  BlockchainState current = state;
  for (const Transaction& tx : block) current = platform.apply(current, tx);
  return current;
}

/// UTXO platform instance: the transaction index resolving output
/// references plus the hash function scripts use. The initial state marks
/// every genesis output unspent.
class UtxoPlatform final : public PlatformSemantics {
public:
  UtxoPlatform() = default;
  explicit UtxoPlatform(utxo::HashFn hash_fn) : hash_fn_(std::move(hash_fn)) {}

  /// Registers a transaction so its outputs are resolvable.
  void index(const utxo::Transaction& tx) { index_.add(tx); }

  /// Registers a genesis (coinbase-like) transaction: indexed, and its
  /// outputs become part of the initial UTXO.
  void add_genesis(const utxo::Transaction& tx) {
    index_.add(tx);
    genesis_.push_back(tx);
  }

  const utxo::TxIndex& tx_index() const { return index_; }
  const utxo::HashFn& hash_fn() const { return hash_fn_; }

  BlockchainState apply(const BlockchainState& state, const Transaction& tx) const override {
    if (const auto* t = std::get_if<utxo::Transaction>(&tx))
      return utxo::apply(state, *t, index_, hash_fn_);
    return state;
  }

  BlockchainState initial_state() const override {
    BlockchainState::Map m;
    for (const utxo::Transaction& tx : genesis_)
      for (const Observable& obs : tx.output_refs()) m.insert_or_assign(obs, int_value(1));
    return BlockchainState(std::move(m));
  }

  RwSets rw_sets(const utxo::Transaction& tx) const {
    return utxo::rw_sets(tx, utxo::consistent(tx, index_, {}, hash_fn_));
  }

private:
  utxo::TxIndex index_;
  std::vector<utxo::Transaction> genesis_;
  utxo::HashFn hash_fn_ = utxo::default_hash;
};

/// Account platform instance: the contract registry plus the genesis
/// balances and storage forming the initial state.
class AccountPlatform final : public PlatformSemantics {
public:
  void add_contract(account::Contract c) { registry_.add(std::move(c)); }

  void set_genesis_balance(const Address& addr, std::int64_t units) {
    genesis_.insert_or_assign(balance_obs(addr), int_value(units));
  }

  void set_genesis_storage(Observable obs, Value v) {
    genesis_.insert_or_assign(std::move(obs), std::move(v));
  }

  const account::ContractRegistry& registry() const { return registry_; }

  BlockchainState apply(const BlockchainState& state, const Transaction& tx) const override {
    if (const auto* t = std::get_if<account::AccountTransaction>(&tx))
      return account::apply(state, *t, registry_);
    return state;
  }

  BlockchainState initial_state() const override { return BlockchainState(genesis_); }

  RwSets rw_sets(const account::AccountTransaction& tx) const {
    return account::analyze_rw(tx, registry_);
  }

private:
  account::ContractRegistry registry_;
  BlockchainState::Map genesis_;
};

/// Per-transaction analysis entry point shared by both platforms; used by
/// the relation builder and the CLI.
inline RwSets analyze_transaction(const Transaction& tx, const PlatformSemantics& platform) {
  if (const auto* up = dynamic_cast<const UtxoPlatform*>(&platform)) {
    if (const auto* t = std::get_if<utxo::Transaction>(&tx)) return up->rw_sets(*t);
  } else if (const auto* ap = dynamic_cast<const AccountPlatform*>(&platform)) {
    if (const auto* t = std::get_if<account::AccountTransaction>(&tx)) return ap->rw_sets(*t);
  }
  RwSets top;
  top.top = true;  // cross-platform or unknown: conservatively dependent
  return top;
}

}  // namespace txpar
