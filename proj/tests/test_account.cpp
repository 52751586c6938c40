// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "txpar/account.hpp"
#include "txpar/platform.hpp"
#include "txpar/swap.hpp"

using namespace txpar;
namespace ast = account::ast;

namespace {

const Address kUserA{"A"};
const Address kUserB{"B"};
const Address kContract{"cA"};

/// The three-function contract used across the statement-level cases:
/// set (x := 1), maybe_pay (send 1 to B when x = 0), forward (send the
/// attached value to the given address).
AccountPlatform make_calls_platform() {
  AccountPlatform platform;
  account::Contract contract;
  contract.address = kContract;
  account::Function set;
  set.body = ast::assign("x", {}, ast::constant(int_value(1)));
  contract.functions.insert_or_assign("set", std::move(set));
  account::Function maybe_pay;
  maybe_pay.body = ast::cond(ast::eq(ast::lookup("x"), ast::constant(int_value(0))),
                             ast::send(ast::constant(int_value(1)), ast::constant(Value{kUserB})));
  contract.functions.insert_or_assign("maybe_pay", std::move(maybe_pay));
  account::Function forward;
  forward.params = {"y"};
  forward.body = ast::send(ast::value(), ast::name("y"));
  contract.functions.insert_or_assign("forward", std::move(forward));
  platform.add_contract(std::move(contract));
  platform.set_genesis_balance(kUserA, 10);
  platform.set_genesis_balance(kUserB, 0);
  platform.set_genesis_balance(kContract, 0);
  return platform;
}

std::int64_t balance(const BlockchainState& state, const Address& addr) {
  auto v = state.get(balance_obs(addr));
  REQUIRE(v.has_value());
  return std::get<std::int64_t>(*v);
}

}  // namespace

TEST_CASE("statement semantics") {
  const AccountPlatform platform = make_calls_platform();
  const BlockchainState sigma0 = platform.initial_state();

  SUBCASE("assignment binds the key") {
    const account::Env env{{"sender", Value{kUserA}}, {"value", int_value(0)}};
    auto result = account::eval_stmt(*ast::assign("x", {}, ast::constant(int_value(1))), sigma0,
                                     env, kContract);
    REQUIRE(std::holds_alternative<BlockchainState>(result));
    CHECK(std::get<BlockchainState>(result).get(account_obs(kContract, "x")) ==
          Value{int_value(1)});
  }
  SUBCASE("throw fails") {
    const account::Env env{{"sender", Value{kUserA}}, {"value", int_value(0)}};
    CHECK(std::holds_alternative<account::Failure>(
        account::eval_stmt(*ast::fail(), sigma0, env, kContract)));
  }
  SUBCASE("send moves units between balances") {
    // Contract already funded with 1 unit, as after a value-1 call.
    const BlockchainState funded =
        sigma0.with(balance_obs(kContract), int_value(1)).with(balance_obs(kUserA), int_value(9));
    const account::Env env{
        {"sender", Value{kUserA}}, {"value", int_value(1)}, {"y", Value{kUserB}}};
    auto result = account::eval_stmt(*ast::send(ast::value(), ast::name("y")), funded, env,
                                     kContract);
    REQUIRE(std::holds_alternative<BlockchainState>(result));
    const BlockchainState& next = std::get<BlockchainState>(result);
    CHECK(balance(next, kContract) == 0);
    CHECK(balance(next, kUserB) == 1);
    CHECK(balance(next, kUserA) == 9);
  }
  SUBCASE("send beyond the contract balance fails") {
    const account::Env env{{"sender", Value{kUserA}}, {"value", int_value(0)}};
    CHECK(std::holds_alternative<account::Failure>(account::eval_stmt(
        *ast::send(ast::constant(int_value(1)), ast::constant(Value{kUserB})), sigma0, env,
        kContract)));
  }
  SUBCASE("unbound keys read as 0") {
    const account::Env env{{"sender", Value{kUserA}}, {"value", int_value(0)}};
    auto result = account::eval_expr(*ast::lookup("never_written"), sigma0, env, kContract);
    REQUIRE(std::holds_alternative<Value>(result));
    CHECK(std::get<Value>(result) == Value{int_value(0)});
  }
  SUBCASE("arithmetic overflow fails") {
    const account::Env env{{"sender", Value{kUserA}}, {"value", int_value(0)}};
    const auto big = ast::constant(int_value(std::numeric_limits<std::int64_t>::max()));
    CHECK(std::holds_alternative<account::Failure>(account::eval_stmt(
        *ast::assign("x", {}, ast::add(big, ast::constant(int_value(1)))), sigma0, env,
        kContract)));
  }
}

TEST_CASE("transaction validity and application") {
  const AccountPlatform platform = make_calls_platform();
  const BlockchainState sigma0 = platform.initial_state();
  const account::AccountTransaction t0{kUserA, kContract, "set", 0, {}};
  const account::AccountTransaction t1{kUserA, kContract, "maybe_pay", 1, {}};
  const account::AccountTransaction t2{kUserA, kContract, "forward", 1, {Value{kUserB}}};

  CHECK(account::validate(sigma0, t0, platform.registry()));

  SUBCASE("insufficient balance is invalid") {
    const BlockchainState broke = sigma0.with(balance_obs(kUserA), int_value(0));
    CHECK_FALSE(account::validate(broke, t1, platform.registry()));
    CHECK(account::apply(broke, t1, platform.registry()) == broke);
  }
  SUBCASE("unknown function and arity mismatch are invalid") {
    CHECK_FALSE(account::validate(sigma0, {kUserA, kContract, "missing", 0, {}},
                                  platform.registry()));
    CHECK_FALSE(account::validate(sigma0, {kUserA, kContract, "forward", 1, {}},
                                  platform.registry()));
  }
  SUBCASE("failed guard is invalid") {
    AccountPlatform guarded = make_calls_platform();
    account::Contract extra;
    extra.address = Address{"cB"};
    account::Function strict;
    strict.body = ast::require(ast::eq(ast::lookup("x"), ast::constant(int_value(1))));
    extra.functions.insert_or_assign("strict", std::move(strict));
    guarded.add_contract(std::move(extra));
    guarded.set_genesis_balance(Address{"cB"}, 0);
    CHECK_FALSE(account::validate(guarded.initial_state(),
                                  {kUserA, Address{"cB"}, "strict", 0, {}}, guarded.registry()));
  }
  SUBCASE("the three-call block lands on the expected state") {
    const Blockchain block = {Transaction{t0}, Transaction{t1}, Transaction{t2}};
    const BlockchainState final_state = exec_serial(block, sigma0, platform);
    CHECK(final_state.get(account_obs(kContract, "x")) == Value{int_value(1)});
    CHECK(balance(final_state, kUserA) == 8);
    CHECK(balance(final_state, kUserB) == 1);
    CHECK(balance(final_state, kContract) == 1);
  }
  SUBCASE("maybe_pay skips its branch once x is set") {
    const BlockchainState sigma1 = account::apply(sigma0, t0, platform.registry());
    const BlockchainState sigma2 = account::apply(sigma1, t1, platform.registry());
    CHECK(balance(sigma2, kUserA) == 9);
    CHECK(balance(sigma2, kContract) == 1);
    CHECK(balance(sigma2, kUserB) == 0);
  }
  SUBCASE("plain transfers between users") {
    const account::AccountTransaction pay{kUserA, kUserB, account::user_function_name(), 3, {}};
    const BlockchainState next = account::apply(sigma0, pay, platform.registry());
    CHECK(balance(next, kUserA) == 7);
    CHECK(balance(next, kUserB) == 3);
  }
}

TEST_CASE("lottery fixture: phases gate each other") {
  const LoadedBlock loaded = test::load_fixture("lottery.json");
  const auto* platform = dynamic_cast<const AccountPlatform*>(loaded.platform.get());
  REQUIRE(platform != nullptr);

  // Committing before joining fails the guard, so the transaction is
  // invalid and leaves the state unchanged.
  const auto& commit = std::get<account::AccountTransaction>(loaded.block[3]);
  CHECK_FALSE(account::validate(loaded.initial, commit, platform->registry()));
  CHECK(account::apply(loaded.initial, commit, platform->registry()) == loaded.initial);

  // The full round ends with a recorded winner.
  const BlockchainState final_state = exec_serial(loaded.block, loaded.initial, *platform);
  CHECK(final_state.get(account_obs(Address{"Lottery"}, "winner")) == Value{Address{"B"}});
  CHECK(final_state.get(account_obs(Address{"Lottery"}, "done")) == Value{int_value(1)});
}

TEST_CASE("token fixture ends with the expected owners") {
  const LoadedBlock loaded = test::load_fixture("erc721.json");
  const BlockchainState final_state = exec_serial(loaded.block, loaded.initial, *loaded.platform);
  CHECK(final_state.get(account_obs(Address{"Token"}, "owner", {int_value(1)})) ==
        Value{Address{"B"}});
  CHECK(final_state.get(account_obs(Address{"Token"}, "owner", {int_value(2)})) ==
        Value{Address{"Q"}});
}

TEST_CASE("read/write analysis reproduces the token sets exactly") {
  const LoadedBlock loaded = test::load_fixture("erc721.json");
  const auto* platform = dynamic_cast<const AccountPlatform*>(loaded.platform.get());
  REQUIRE(platform != nullptr);
  const Address token{"Token"};
  auto obs = [&](const std::string& base, std::initializer_list<Value> idx) {
    return ObsPattern{account_obs(token, base, idx)};
  };
  const Value a{Address{"A"}}, b{Address{"B"}}, p{Address{"P"}}, q{Address{"Q"}};

  const RwSets r1 = analyze_transaction(loaded.block[0], *platform);
  CHECK(r1.reads == std::set<ObsPattern>{obs("exists", {int_value(1)}), obs("owner", {int_value(1)}),
                                         obs("balance", {a}), obs("balance", {p}),
                                         obs("operatorApprovals", {a, a})});
  CHECK(r1.writes == std::set<ObsPattern>{obs("owner", {int_value(1)}), obs("balance", {a}),
                                          obs("balance", {p})});

  const RwSets r2 = analyze_transaction(loaded.block[1], *platform);
  CHECK(r2.reads.empty());
  CHECK(r2.writes == std::set<ObsPattern>{obs("operatorApprovals", {a, b})});

  const RwSets r3 = analyze_transaction(loaded.block[2], *platform);
  CHECK(r3.reads == std::set<ObsPattern>{obs("exists", {int_value(2)}), obs("owner", {int_value(2)}),
                                         obs("balance", {a}), obs("balance", {q}),
                                         obs("operatorApprovals", {a, b})});
  CHECK(r3.writes == std::set<ObsPattern>{obs("owner", {int_value(2)}), obs("balance", {a}),
                                          obs("balance", {q})});

  const RwSets r4 = analyze_transaction(loaded.block[3], *platform);
  CHECK(r4.reads == std::set<ObsPattern>{obs("exists", {int_value(1)}), obs("owner", {int_value(1)}),
                                         obs("balance", {p}), obs("balance", {b}),
                                         obs("operatorApprovals", {p, p})});
  CHECK(r4.writes == std::set<ObsPattern>{obs("owner", {int_value(1)}), obs("balance", {p}),
                                          obs("balance", {b})});
}

TEST_CASE("analysis of value transfers and widening") {
  const AccountPlatform platform = make_calls_platform();

  SUBCASE("a zero-value transfer to a user touches nothing") {
    const account::AccountTransaction tx{kUserA, kUserB, account::user_function_name(), 0, {}};
    const RwSets sets = account::analyze_rw(tx, platform.registry());
    CHECK(sets.reads.empty());
    CHECK(sets.writes.empty());
  }
  SUBCASE("a funded transfer touches both balances") {
    const account::AccountTransaction tx{kUserA, kUserB, account::user_function_name(), 2, {}};
    const RwSets sets = account::analyze_rw(tx, platform.registry());
    CHECK(sets.reads == std::set<ObsPattern>{ObsPattern{balance_obs(kUserA)},
                                             ObsPattern{balance_obs(kUserB)}});
    CHECK(sets.writes == sets.reads);
  }
  SUBCASE("a send to an argument address lands on that balance") {
    const account::AccountTransaction tx{kUserA, kContract, "forward", 1, {Value{kUserB}}};
    const RwSets sets = account::analyze_rw(tx, platform.registry());
    CHECK(sets.writes == std::set<ObsPattern>{ObsPattern{balance_obs(kUserA)},
                                              ObsPattern{balance_obs(kContract)},
                                              ObsPattern{balance_obs(kUserB)}});
  }
  SUBCASE("non-constant mapping indices widen to the whole mapping") {
    AccountPlatform widened = make_calls_platform();
    account::Contract extra;
    extra.address = Address{"cB"};
    account::Function indirect;
    indirect.body = ast::assign("slot", {ast::lookup("pointer")}, ast::constant(int_value(1)));
    extra.functions.insert_or_assign("indirect", std::move(indirect));
    widened.add_contract(std::move(extra));
    const account::AccountTransaction tx{kUserA, Address{"cB"}, "indirect", 0, {}};
    const RwSets sets = account::analyze_rw(tx, widened.registry());
    CHECK(sets.writes == std::set<ObsPattern>{ObsPattern{MappingAll{Address{"cB"}, "slot"}}});
    CHECK(sets.reads == std::set<ObsPattern>{ObsPattern{account_obs(Address{"cB"}, "pointer")}});
    // The widened element overlaps every concrete key of its mapping.
    CHECK(patterns_overlap(MappingAll{Address{"cB"}, "slot"},
                           account_obs(Address{"cB"}, "slot", {int_value(3)})));
    CHECK_FALSE(patterns_overlap(MappingAll{Address{"cB"}, "slot"},
                                 account_obs(Address{"cB"}, "other", {int_value(3)})));
  }
  SUBCASE("a send to a looked-up recipient widens to every balance") {
    AccountPlatform widened = make_calls_platform();
    account::Contract extra;
    extra.address = Address{"cB"};
    account::Function payout;
    payout.body = ast::send(ast::constant(int_value(1)), ast::lookup("beneficiary"));
    extra.functions.insert_or_assign("payout", std::move(payout));
    widened.add_contract(std::move(extra));
    const account::AccountTransaction tx{kUserA, Address{"cB"}, "payout", 0, {}};
    const RwSets sets = account::analyze_rw(tx, widened.registry());
    CHECK(sets.writes.count(ObsPattern{AnyBalance{}}) == 1);
    CHECK(patterns_overlap(AnyBalance{}, balance_obs(kUserB)));
  }
  SUBCASE("unknown functions fall back to the trivially safe pair") {
    const account::AccountTransaction tx{kUserA, kContract, "missing", 0, {}};
    CHECK(account::analyze_rw(tx, platform.registry()).top);
  }
}

namespace {

/// Concretizes pattern sets against the observables a state space ever
/// mentions, so the brute-force safety checker can consume them.
std::set<Observable> concretize(const std::set<ObsPattern>& patterns,
                                const std::vector<BlockchainState>& states,
                                const Transaction& tx, const PlatformSemantics& platform) {
  std::set<Observable> universe;
  for (const BlockchainState& state : states) {
    for (const auto& [obs, v] : state.bindings()) universe.insert(obs);
    const BlockchainState applied = platform.apply(state, tx);
    for (const auto& [obs, v] : applied.bindings()) universe.insert(obs);
  }
  std::set<Observable> out;
  for (const Observable& obs : universe)
    for (const ObsPattern& p : patterns)
      if (patterns_overlap(p, obs)) {
        out.insert(obs);
        break;
      }
  return out;
}

}  // namespace

TEST_CASE("analysis output is safe by brute force on small instances") {
  std::mt19937 rng(101);
  for (int round = 0; round < 25; ++round) {
    test::RandomAccount scenario = test::random_account_block(rng, 4);
    const auto states = reachable_states(scenario.platform->initial_state(), scenario.block,
                                         *scenario.platform, 400);
    for (const Transaction& tx : scenario.block) {
      const RwSets sets = analyze_transaction(tx, *scenario.platform);
      REQUIRE_FALSE(sets.top);
      const auto writes = concretize(sets.writes, states, tx, *scenario.platform);
      const auto reads = concretize(sets.reads, states, tx, *scenario.platform);
      CHECK(check_safe_approx(writes, tx, ApproxMode::Write, states, *scenario.platform, 100000)
                .safe());
      CHECK(check_safe_approx(reads, tx, ApproxMode::Read, states, *scenario.platform, 100000)
                .safe());
    }
  }
}

TEST_CASE("validity subsumes a non-failing body") {
  // Re-runs the funded body by hand for every valid contract call and
  // checks it lands exactly on the platform result without failing.
  std::mt19937 rng(505);
  std::size_t rerun = 0;
  for (int round = 0; round < 20; ++round) {
    test::RandomAccount scenario = test::random_account_block(rng, 12);
    BlockchainState state = scenario.platform->initial_state();
    for (const Transaction& wrapped : scenario.block) {
      const auto& tx = std::get<account::AccountTransaction>(wrapped);
      if (account::validate(state, tx, scenario.platform->registry())) {
        const account::Contract* contract = scenario.platform->registry().find(tx.target);
        if (contract != nullptr) {
          const account::Function& fn = contract->functions.at(tx.function);
          BlockchainState funded = state;
          if (tx.value > 0 && !(tx.sender == tx.target)) {
            const auto debit = std::get<std::int64_t>(*state.get(balance_obs(tx.sender)));
            const auto credit = std::get<std::int64_t>(*state.get(balance_obs(tx.target)));
            funded = funded.with(balance_obs(tx.sender), int_value(debit - tx.value))
                         .with(balance_obs(tx.target), int_value(credit + tx.value));
          }
          account::Env env{{"sender", Value{tx.sender}}, {"value", int_value(tx.value)}};
          for (std::size_t i = 0; i < fn.params.size(); ++i)
            env.insert_or_assign(fn.params[i], tx.args[i]);
          auto result = account::eval_stmt(*fn.body, funded, env, tx.target);
          REQUIRE(std::holds_alternative<BlockchainState>(result));
          CHECK(std::get<BlockchainState>(result) ==
                account::apply(state, tx, scenario.platform->registry()));
          ++rerun;
        }
      }
      state = account::apply(state, tx, scenario.platform->registry());
    }
  }
  CHECK(rerun > 50);
}

TEST_CASE("execution preserves balance invariants and matches the manual semantics") {
  std::mt19937 rng(303);
  for (int round = 0; round < 30; ++round) {
    test::RandomAccount scenario = test::random_account_block(rng, 16);
    BlockchainState state = scenario.platform->initial_state();
    const std::set<Observable> genesis_balances = [&] {
      std::set<Observable> out;
      for (const auto& [obs, v] : state.bindings())
        if (std::get_if<AccountKey>(&obs) != nullptr &&
            std::get<AccountKey>(obs).base == "balance")
          out.insert(obs);
      return out;
    }();

    for (const Transaction& wrapped : scenario.block) {
      const auto& tx = std::get<account::AccountTransaction>(wrapped);
      const bool valid = account::validate(state, tx, scenario.platform->registry());
      const BlockchainState next = account::apply(state, tx, scenario.platform->registry());
      if (!valid) CHECK(next == state);
      for (const Observable& obs : genesis_balances) {
        auto v = next.get(obs);
        REQUIRE(v.has_value());
        CHECK(std::get<std::int64_t>(*v) >= 0);
      }
      state = next;
    }
  }
}
