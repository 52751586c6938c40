// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "txpar/blockfile.hpp"
#include "txpar/platform.hpp"

namespace txpar::test {

inline std::string fixture_path(const std::string& name) {
  return std::string(TXPAR_FIXTURE_DIR) + "/" + name;
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return Json::parse(in);
}

inline LoadedBlock load_fixture(const std::string& name) {
  return load_block(parse_block_file(read_json(fixture_path(name))));
}

inline std::set<Observable> obs_set(std::initializer_list<Observable> list) {
  return {list};
}

inline std::set<ObsPattern> patterns(std::initializer_list<Observable> list) {
  std::set<ObsPattern> out;
  for (const Observable& obs : list) out.insert(obs);
  return out;
}

// --- randomized block generators --------------------------------------------

/// Random UTXO platform + block: a coinbase pool of outputs, then
/// transactions spending random subsets (some invalid by construction:
/// double spends, overspends, failing scripts).
struct RandomUtxo {
  UtxoPlatform platform;
  Blockchain block;
};

inline RandomUtxo random_utxo_block(std::mt19937& rng, std::size_t max_txs = 32) {
  RandomUtxo out;
  std::uniform_int_distribution<int> coin_outputs(3, 8);
  std::uniform_int_distribution<int> tx_count(1, static_cast<int>(max_txs));
  std::uniform_int_distribution<int> pick(0, 99);

  utxo::Transaction coinbase;
  coinbase.id = "G";
  const int pool = coin_outputs(rng);
  for (int i = 0; i < pool; ++i)
    coinbase.outputs.push_back({utxo::script::constant(utxo::ScriptVal{std::int64_t{1}}), 20});
  out.platform.add_genesis(coinbase);

  std::vector<OutputRef> spendable;
  for (std::uint32_t i = 1; i <= coinbase.outputs.size(); ++i) spendable.push_back({"G", i});

  const int n = tx_count(rng);
  for (int t = 0; t < n; ++t) {
    utxo::Transaction tx;
    tx.id = "T" + std::to_string(t + 1);
    std::uniform_int_distribution<std::size_t> which(0, spendable.size() - 1);
    const std::size_t input_count = 1 + static_cast<std::size_t>(pick(rng) % 2);
    std::set<OutputRef> chosen;
    for (std::size_t k = 0; k < input_count; ++k) chosen.insert(spendable[which(rng)]);
    std::int64_t budget = 0;
    for (const OutputRef& ref : chosen) {
      tx.inputs.push_back(ref);
      tx.witnesses.push_back({});
      budget += 20;
    }
    // Occasionally overspend so the block carries invalid transactions.
    const std::int64_t spend = pick(rng) < 15 ? budget + 5 : budget;
    const int outs = 1 + pick(rng) % 2;
    for (int k = 0; k < outs; ++k)
      tx.outputs.push_back({utxo::script::constant(utxo::ScriptVal{std::int64_t{pick(rng) < 10 ? 0 : 1}}),
                            spend / outs});
    out.platform.index(tx);
    out.block.emplace_back(tx);
    for (std::uint32_t i = 1; i <= tx.outputs.size(); ++i) spendable.push_back({tx.id, i});
  }
  return out;
}

/// Random account platform + block: a couple of contracts over a small
/// key set, plus plain transfers. Covers guarded writes, sends, mapping
/// indices from arguments, and invalid transactions.
struct RandomAccount {
  std::shared_ptr<AccountPlatform> platform;
  Blockchain block;
};

inline RandomAccount random_account_block(std::mt19937& rng, std::size_t max_txs = 32) {
  namespace ast = account::ast;
  RandomAccount out;
  out.platform = std::make_shared<AccountPlatform>();
  const std::vector<Address> users = {Address{"A"}, Address{"B"}, Address{"C"}, Address{"D"}};
  const std::vector<Address> contracts = {Address{"K1"}, Address{"K2"}};
  const std::vector<std::string> keys = {"u", "v", "w"};
  std::uniform_int_distribution<int> pick(0, 99);

  for (const Address& addr : contracts) {
    account::Contract contract;
    contract.address = addr;
    // set_<key>(n): key := n, guarded by a cheap condition on another key.
    for (const std::string& key : keys) {
      account::Function set_fn;
      set_fn.params = {"n"};
      set_fn.body = ast::assign(key, {}, ast::name("n"));
      contract.functions.insert_or_assign("set_" + key, std::move(set_fn));

      account::Function bump_fn;
      bump_fn.params = {};
      bump_fn.body = ast::cond(ast::lt(ast::lookup(key), ast::constant(int_value(5))),
                               ast::assign(key, {}, ast::add(ast::lookup(key), ast::constant(int_value(1)))),
                               ast::fail());
      contract.functions.insert_or_assign("bump_" + key, std::move(bump_fn));
    }
    // mark(who): slot[who] := 1 (mapping indexed by an argument).
    account::Function mark_fn;
    mark_fn.params = {"who"};
    mark_fn.body = ast::assign("slot", {ast::name("who")}, ast::constant(int_value(1)));
    contract.functions.insert_or_assign("mark", std::move(mark_fn));
    // pay(who): forward the attached value.
    account::Function pay_fn;
    pay_fn.params = {"who"};
    pay_fn.body = ast::send(ast::value(), ast::name("who"));
    contract.functions.insert_or_assign("pay", std::move(pay_fn));
    out.platform->add_contract(std::move(contract));
  }
  for (const Address& user : users) out.platform->set_genesis_balance(user, 50);
  for (const Address& contract : contracts) out.platform->set_genesis_balance(contract, 5);

  std::uniform_int_distribution<int> tx_count(1, static_cast<int>(max_txs));
  const int n = tx_count(rng);
  for (int t = 0; t < n; ++t) {
    account::AccountTransaction tx;
    tx.sender = users[static_cast<std::size_t>(pick(rng)) % users.size()];
    const int shape = pick(rng);
    if (shape < 20) {  // plain transfer between users
      tx.target = users[static_cast<std::size_t>(pick(rng)) % users.size()];
      tx.function = account::user_function_name();
      tx.value = pick(rng) % 4;
    } else {
      tx.target = contracts[static_cast<std::size_t>(pick(rng)) % contracts.size()];
      const std::string key = keys[static_cast<std::size_t>(pick(rng)) % keys.size()];
      if (shape < 45) {
        tx.function = "set_" + key;
        tx.args = {int_value(pick(rng) % 7)};
      } else if (shape < 70) {
        tx.function = "bump_" + key;
      } else if (shape < 85) {
        tx.function = "mark";
        tx.args = {Value{users[static_cast<std::size_t>(pick(rng)) % users.size()]}};
      } else {
        tx.function = "pay";
        tx.value = 1 + pick(rng) % 3;
        tx.args = {Value{users[static_cast<std::size_t>(pick(rng)) % users.size()]}};
      }
    }
    out.block.emplace_back(std::move(tx));
  }
  return out;
}

}  // namespace txpar::test
