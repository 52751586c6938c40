// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "txpar/account.hpp"
#include "txpar/exec.hpp"
#include "txpar/net.hpp"
#include "txpar/platform.hpp"
#include "txpar/utxo.hpp"

/// Block file format "txpar-block/1" and the JSON renderings of states,
/// nets and execution traces.
///
/// Value encoding: JSON integers are integer values, booleans are
/// booleans, strings are addresses, and {"str": s} is a string value.
/// Statements, expressions and scripts are operator-first JSON arrays.
namespace txpar {

using Json = nlohmann::ordered_json;

/// Schema violation with the position of the offending element.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& path, const std::string& what)
      : std::runtime_error("at " + path + ": " + what) {}
};

namespace io {

inline Value parse_value(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return int_value(j.get<std::int64_t>());
  if (j.is_boolean()) return bool_value(j.get<bool>());
  if (j.is_string()) return addr_value(j.get<std::string>());
  if (j.is_object() && j.contains("str") && j["str"].is_string() && j.size() == 1)
    return str_value(j["str"].get<std::string>());
  throw ParseError(path, "expected a value (integer, boolean, address string or {\"str\": ...})");
}

inline Json value_to_json(const Value& v) {
  struct Visitor {
    Json operator()(std::int64_t i) const { return Json(i); }
    Json operator()(bool b) const { return Json(b); }
    Json operator()(const Address& a) const { return Json(a.id); }
    Json operator()(const std::string& s) const { return Json{{"str", s}}; }
  };
  return std::visit(Visitor{}, v);
}

inline std::string element(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline std::string field(const std::string& path, const std::string& name) {
  return path + "." + name;
}

inline const Json& expect_field(const Json& j, const std::string& name, const std::string& path) {
  if (!j.is_object() || !j.contains(name)) throw ParseError(path, "missing field '" + name + "'");
  return j[name];
}

inline std::string expect_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(path, "expected a string");
  return j.get<std::string>();
}

inline std::int64_t expect_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline std::string expect_op(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || !j[0].is_string())
    throw ParseError(path, "expected an operator-first array");
  return j[0].get<std::string>();
}

// --- account expressions / statements ---------------------------------------

inline account::ExprPtr parse_expr(const Json& j, const std::string& path);

inline account::KeyExpr parse_key(const Json& j, const std::string& path) {
  if (expect_op(j, path) != "key") throw ParseError(path, "expected [\"key\", base, indices...]");
  if (j.size() < 2 || !j[1].is_string()) throw ParseError(path, "key needs a base name string");
  account::KeyExpr key;
  key.base = j[1].get<std::string>();
  if (key.base.empty() || key.base.find_first_of("[].") != std::string::npos)
    throw ParseError(path, "key base must be non-empty and free of '[', ']' and '.'");
  for (std::size_t i = 2; i < j.size(); ++i)
    key.indices.push_back(parse_expr(j[i], element(path, i)));
  return key;
}

inline account::ExprPtr parse_expr(const Json& j, const std::string& path) {
  using namespace account;
  if (!j.is_array()) return ast::constant(parse_value(j, path));
  const std::string op = expect_op(j, path);
  auto arity = [&](std::size_t n) {
    if (j.size() != n + 1)
      throw ParseError(path, "'" + op + "' takes " + std::to_string(n) + " argument(s)");
  };
  if (op == "sender") { arity(0); return ast::sender(); }
  if (op == "value") { arity(0); return ast::value(); }
  if (op == "param") {
    arity(1);
    return ast::name(expect_string(j[1], element(path, 1)));
  }
  if (op == "lookup") {
    if (j.size() < 2 || !j[1].is_string()) throw ParseError(path, "lookup needs a base name");
    std::vector<ExprPtr> indices;
    for (std::size_t i = 2; i < j.size(); ++i)
      indices.push_back(parse_expr(j[i], element(path, i)));
    const std::string base = j[1].get<std::string>();
    if (base.empty() || base.find_first_of("[].") != std::string::npos)
      throw ParseError(path, "lookup base must be non-empty and free of '[', ']' and '.'");
    return ast::lookup(base, std::move(indices));
  }
  if (op == "not") {
    arity(1);
    return ast::negate(parse_expr(j[1], element(path, 1)));
  }
  static const std::map<std::string, Expr::Kind> kBinary = {
      {"add", Expr::Kind::Add}, {"sub", Expr::Kind::Sub}, {"eq", Expr::Kind::Eq},
      {"ne", Expr::Kind::Ne},   {"lt", Expr::Kind::Lt},   {"and", Expr::Kind::And},
      {"or", Expr::Kind::Or}};
  auto it = kBinary.find(op);
  if (it == kBinary.end()) throw ParseError(path, "unknown expression operator '" + op + "'");
  arity(2);
  return ast::binary(it->second, parse_expr(j[1], element(path, 1)),
                     parse_expr(j[2], element(path, 2)));
}

inline account::StmtPtr parse_stmt(const Json& j, const std::string& path) {
  using namespace account;
  const std::string op = expect_op(j, path);
  if (op == "skip") return ast::skip();
  if (op == "throw") return ast::fail();
  if (op == "require") {
    if (j.size() != 2) throw ParseError(path, "'require' takes one condition");
    return ast::require(parse_expr(j[1], element(path, 1)));
  }
  if (op == "assign") {
    if (j.size() != 3) throw ParseError(path, "'assign' takes a key and an expression");
    account::KeyExpr key = parse_key(j[1], element(path, 1));
    Stmt s;
    s.kind = Stmt::Kind::Assign;
    s.target = std::move(key);
    s.expr = parse_expr(j[2], element(path, 2));
    return ast::make(std::move(s));
  }
  if (op == "seq") {
    std::vector<StmtPtr> parts;
    for (std::size_t i = 1; i < j.size(); ++i) parts.push_back(parse_stmt(j[i], element(path, i)));
    return ast::seq(std::move(parts));
  }
  if (op == "if") {
    if (j.size() != 3 && j.size() != 4)
      throw ParseError(path, "'if' takes a condition, a branch and an optional else");
    StmtPtr otherwise = j.size() == 4 ? parse_stmt(j[3], element(path, 3)) : ast::skip();
    return ast::cond(parse_expr(j[1], element(path, 1)), parse_stmt(j[2], element(path, 2)),
                     std::move(otherwise));
  }
  if (op == "send") {
    if (j.size() != 3) throw ParseError(path, "'send' takes an amount and a recipient");
    return ast::send(parse_expr(j[1], element(path, 1)), parse_expr(j[2], element(path, 2)));
  }
  throw ParseError(path, "unknown statement '" + op + "'");
}

inline Json expr_to_json(const account::Expr& e) {
  using Kind = account::Expr::Kind;
  switch (e.kind) {
    case Kind::Const:
      return value_to_json(e.constant);
    case Kind::Name:
      if (e.name == "sender") return Json::array({"sender"});
      if (e.name == "value") return Json::array({"value"});
      return Json::array({"param", e.name});
    case Kind::Lookup: {
      Json out = Json::array({"lookup", e.key.base});
      for (const auto& idx : e.key.indices) out.push_back(expr_to_json(*idx));
      return out;
    }
    case Kind::Add: case Kind::Sub: case Kind::Eq: case Kind::Ne:
    case Kind::Lt: case Kind::And: case Kind::Or: {
      static const std::map<Kind, std::string> kNames = {
          {Kind::Add, "add"}, {Kind::Sub, "sub"}, {Kind::Eq, "eq"}, {Kind::Ne, "ne"},
          {Kind::Lt, "lt"},   {Kind::And, "and"}, {Kind::Or, "or"}};
      return Json::array({kNames.at(e.kind), expr_to_json(*e.args[0]), expr_to_json(*e.args[1])});
    }
    case Kind::Not:
      return Json::array({"not", expr_to_json(*e.args[0])});
  }
  return Json();
}

inline Json stmt_to_json(const account::Stmt& s) {
  using Kind = account::Stmt::Kind;
  switch (s.kind) {
    case Kind::Skip:
      return Json::array({"skip"});
    case Kind::Throw:
      return Json::array({"throw"});
    case Kind::Require:
      return Json::array({"require", expr_to_json(*s.expr)});
    case Kind::Assign: {
      Json key = Json::array({"key", s.target.base});
      for (const auto& idx : s.target.indices) key.push_back(expr_to_json(*idx));
      return Json::array({"assign", key, expr_to_json(*s.expr)});
    }
    case Kind::Seq: {
      Json out = Json::array({"seq"});
      for (const auto& part : s.stmts) out.push_back(stmt_to_json(*part));
      return out;
    }
    case Kind::If:
      return Json::array({"if", expr_to_json(*s.expr), stmt_to_json(*s.then_branch),
                          stmt_to_json(*s.else_branch)});
    case Kind::Send:
      return Json::array({"send", expr_to_json(*s.expr), expr_to_json(*s.recipient)});
  }
  return Json();
}

// --- scripts -----------------------------------------------------------------

inline utxo::ScriptVal parse_script_val(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return utxo::ScriptVal{j.get<std::int64_t>()};
  if (j.is_string()) return utxo::ScriptVal{j.get<std::string>()};
  if (j.is_object() && j.contains("sig")) {
    const Json& sig = j["sig"];
    if (!sig.is_array() || sig.size() != 2 || !sig[0].is_string() || !sig[1].is_string())
      throw ParseError(path, "signature is {\"sig\": [key, tx-id]}");
    return utxo::ScriptVal{utxo::Signature{Address{sig[0].get<std::string>()},
                                           sig[1].get<std::string>()}};
  }
  if (j.is_array()) {
    utxo::ScriptSeq seq;
    for (std::size_t i = 0; i < j.size(); ++i)
      seq.push_back(parse_script_val(j[i], element(path, i)));
    return utxo::ScriptVal{std::move(seq)};
  }
  throw ParseError(path, "expected a script value (integer, string, signature or sequence)");
}

inline Json script_val_to_json(const utxo::ScriptVal& v) {
  struct Visitor {
    Json operator()(std::int64_t i) const { return Json(i); }
    Json operator()(const std::string& s) const { return Json(s); }
    Json operator()(const utxo::Signature& sig) const {
      return Json{{"sig", Json::array({sig.key.id, sig.tx_id})}};
    }
    Json operator()(const utxo::ScriptSeq& seq) const {
      Json out = Json::array();
      for (const auto& e : seq) out.push_back(script_val_to_json(e));
      return out;
    }
  };
  return std::visit(Visitor{}, v.v);
}

inline utxo::ScriptPtr parse_script(const Json& j, const std::string& path) {
  namespace sc = utxo::script;
  if (j.is_number_integer() || j.is_string() || (j.is_object() && j.contains("sig")))
    return sc::constant(parse_script_val(j, path));
  const std::string op = expect_op(j, path);
  auto arity = [&](std::size_t n) {
    if (j.size() != n + 1)
      throw ParseError(path, "'" + op + "' takes " + std::to_string(n) + " argument(s)");
  };
  if (op == "wit") { arity(0); return sc::wit(); }
  if (op == "seq") {
    utxo::ScriptSeq seq;
    for (std::size_t i = 1; i < j.size(); ++i)
      seq.push_back(parse_script_val(j[i], element(path, i)));
    return sc::constant(utxo::ScriptVal{std::move(seq)});
  }
  if (op == "add") { arity(2); return sc::add(parse_script(j[1], element(path, 1)), parse_script(j[2], element(path, 2))); }
  if (op == "sub") { arity(2); return sc::sub(parse_script(j[1], element(path, 1)), parse_script(j[2], element(path, 2))); }
  if (op == "eq") { arity(2); return sc::eq(parse_script(j[1], element(path, 1)), parse_script(j[2], element(path, 2))); }
  if (op == "lt") { arity(2); return sc::lt(parse_script(j[1], element(path, 1)), parse_script(j[2], element(path, 2))); }
  if (op == "if") {
    arity(3);
    return sc::branch(parse_script(j[1], element(path, 1)), parse_script(j[2], element(path, 2)),
                      parse_script(j[3], element(path, 3)));
  }
  if (op == "at") {
    arity(2);
    const std::int64_t n = expect_int(j[2], element(path, 2));
    if (n < 1) throw ParseError(element(path, 2), "sequence index is 1-based");
    return sc::at(parse_script(j[1], element(path, 1)), static_cast<std::uint32_t>(n));
  }
  if (op == "size") { arity(1); return sc::size(parse_script(j[1], element(path, 1))); }
  if (op == "hash") { arity(1); return sc::hash(parse_script(j[1], element(path, 1))); }
  if (op == "versig") {
    arity(2);
    return sc::versig(parse_script(j[1], element(path, 1)), parse_script(j[2], element(path, 2)));
  }
  throw ParseError(path, "unknown script operator '" + op + "'");
}

inline Json script_to_json(const utxo::Script& s) {
  using Op = utxo::Script::Op;
  auto arg = [&](std::size_t i) { return script_to_json(*s.args[i]); };
  switch (s.op) {
    case Op::Const: {
      if (const auto* seq = std::get_if<utxo::ScriptSeq>(&s.constant.v)) {
        Json out = Json::array({"seq"});
        for (const auto& e : *seq) out.push_back(script_val_to_json(e));
        return out;
      }
      return script_val_to_json(s.constant);
    }
    case Op::Add: return Json::array({"add", arg(0), arg(1)});
    case Op::Sub: return Json::array({"sub", arg(0), arg(1)});
    case Op::Eq: return Json::array({"eq", arg(0), arg(1)});
    case Op::Lt: return Json::array({"lt", arg(0), arg(1)});
    case Op::If: return Json::array({"if", arg(0), arg(1), arg(2)});
    case Op::At: return Json::array({"at", arg(0), Json(s.index)});
    case Op::Wit: return Json::array({"wit"});
    case Op::Size: return Json::array({"size", arg(0)});
    case Op::Hash: return Json::array({"hash", arg(0)});
    case Op::Versig: return Json::array({"versig", arg(0), arg(1)});
  }
  return Json();
}

}  // namespace io

// ---------------------------------------------------------------------------
// Block files.

struct GenesisStorage {
  Address address;
  std::string base;
  std::vector<Value> indices;
  Value value;
};

/// Parsed block file: platform tag, contracts (account), genesis, the
/// ordered transaction list and optional display labels.
struct BlockFile {
  enum class Platform { Utxo, Account };

  Platform platform = Platform::Account;
  // account
  std::vector<account::Contract> contracts;
  std::vector<std::pair<Address, std::int64_t>> balances;
  std::vector<GenesisStorage> storage;
  // utxo
  std::vector<utxo::Transaction> coinbase;

  Blockchain transactions;
  std::vector<std::string> labels;  // one per transaction

  std::vector<std::string> display_labels() const {
    std::vector<std::string> out;
    out.reserve(transactions.size());
    for (std::size_t i = 0; i < transactions.size(); ++i)
      out.push_back(!labels.empty() ? labels[i] : tx_label(transactions[i]));
    return out;
  }
};

/// Platform instance plus initial state built from a block file.
struct LoadedBlock {
  std::shared_ptr<const PlatformSemantics> platform;
  BlockchainState initial;
  Blockchain block;
  std::vector<std::string> labels;
};

namespace io {

inline utxo::Transaction parse_utxo_tx(const Json& j, const std::string& path) {
  utxo::Transaction tx;
  tx.id = expect_string(expect_field(j, "id", path), field(path, "id"));
  if (tx.id.empty()) throw ParseError(field(path, "id"), "transaction id must be non-empty");
  const Json& inputs = expect_field(j, "inputs", path);
  if (!inputs.is_array()) throw ParseError(field(path, "inputs"), "expected an array");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string at = element(field(path, "inputs"), i);
    const Json& in = inputs[i];
    if (!in.is_array() || in.size() != 2 || !in[0].is_string() || !in[1].is_number_integer())
      throw ParseError(at, "expected [tx-id, output-index]");
    const std::int64_t index = in[1].get<std::int64_t>();
    if (index < 1) throw ParseError(at, "output indices are 1-based");
    if (in[0].get<std::string>() == tx.id) throw ParseError(at, "transaction spends itself");
    tx.inputs.push_back({in[0].get<std::string>(), static_cast<std::uint32_t>(index)});
  }
  const Json& wits = expect_field(j, "witnesses", path);
  if (!wits.is_array()) throw ParseError(field(path, "witnesses"), "expected an array");
  for (std::size_t i = 0; i < wits.size(); ++i) {
    const std::string at = element(field(path, "witnesses"), i);
    if (!wits[i].is_array()) throw ParseError(at, "each witness is an array of script values");
    utxo::ScriptSeq seq;
    for (std::size_t k = 0; k < wits[i].size(); ++k)
      seq.push_back(parse_script_val(wits[i][k], element(at, k)));
    tx.witnesses.push_back(std::move(seq));
  }
  if (tx.witnesses.size() != tx.inputs.size())
    throw ParseError(field(path, "witnesses"), "must have one witness per input");
  const Json& outs = expect_field(j, "outputs", path);
  if (!outs.is_array()) throw ParseError(field(path, "outputs"), "expected an array");
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const std::string at = element(field(path, "outputs"), i);
    utxo::Output out;
    out.script = parse_script(expect_field(outs[i], "script", at), field(at, "script"));
    out.value = expect_int(expect_field(outs[i], "value", at), field(at, "value"));
    if (out.value < 0) throw ParseError(field(at, "value"), "output values are non-negative");
    tx.outputs.push_back(std::move(out));
  }
  return tx;
}

inline Json utxo_tx_to_json(const utxo::Transaction& tx) {
  Json j;
  j["id"] = tx.id;
  j["inputs"] = Json::array();
  for (const OutputRef& in : tx.inputs) j["inputs"].push_back(Json::array({in.tx_id, in.index}));
  j["witnesses"] = Json::array();
  for (const utxo::ScriptSeq& w : tx.witnesses) {
    Json seq = Json::array();
    for (const utxo::ScriptVal& v : w) seq.push_back(script_val_to_json(v));
    j["witnesses"].push_back(std::move(seq));
  }
  j["outputs"] = Json::array();
  for (const utxo::Output& out : tx.outputs)
    j["outputs"].push_back(Json{{"script", script_to_json(*out.script)}, {"value", out.value}});
  return j;
}

inline account::AccountTransaction parse_account_tx(const Json& j, const std::string& path) {
  account::AccountTransaction tx;
  tx.sender = Address{expect_string(expect_field(j, "sender", path), field(path, "sender"))};
  tx.target = Address{expect_string(expect_field(j, "target", path), field(path, "target"))};
  tx.function = expect_string(expect_field(j, "function", path), field(path, "function"));
  tx.value = expect_int(expect_field(j, "value", path), field(path, "value"));
  if (tx.value < 0) throw ParseError(field(path, "value"), "transferred value is non-negative");
  if (j.contains("args")) {
    const Json& args = j["args"];
    if (!args.is_array()) throw ParseError(field(path, "args"), "expected an array");
    for (std::size_t i = 0; i < args.size(); ++i)
      tx.args.push_back(parse_value(args[i], element(field(path, "args"), i)));
  }
  return tx;
}

inline Json account_tx_to_json(const account::AccountTransaction& tx) {
  Json j;
  j["sender"] = tx.sender.id;
  j["target"] = tx.target.id;
  j["function"] = tx.function;
  j["value"] = tx.value;
  j["args"] = Json::array();
  for (const Value& v : tx.args) j["args"].push_back(value_to_json(v));
  return j;
}

inline account::Contract parse_contract(const Json& j, const std::string& path) {
  account::Contract c;
  c.address = Address{expect_string(expect_field(j, "address", path), field(path, "address"))};
  const Json& fns = expect_field(j, "functions", path);
  if (!fns.is_object()) throw ParseError(field(path, "functions"), "expected an object");
  for (const auto& [name, fn] : fns.items()) {
    const std::string at = field(field(path, "functions"), name);
    account::Function parsed;
    const Json& params = expect_field(fn, "params", at);
    if (!params.is_array()) throw ParseError(field(at, "params"), "expected an array");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string p = expect_string(params[i], element(field(at, "params"), i));
      if (p == "sender" || p == "value")
        throw ParseError(field(at, "params"), "'sender' and 'value' are reserved names");
      parsed.params.push_back(p);
    }
    parsed.body = parse_stmt(expect_field(fn, "body", at), field(at, "body"));
    c.functions.insert_or_assign(name, std::move(parsed));
  }
  return c;
}

inline Json contract_to_json(const account::Contract& c) {
  Json fns = Json::object();
  for (const auto& [name, fn] : c.functions) {
    Json params = Json::array();
    for (const std::string& p : fn.params) params.push_back(p);
    fns[name] = Json{{"params", std::move(params)}, {"body", stmt_to_json(*fn.body)}};
  }
  return Json{{"address", c.address.id}, {"functions", std::move(fns)}};
}

}  // namespace io

inline BlockFile parse_block_file(const Json& j) {
  using namespace io;
  BlockFile file;
  const std::string root = "$";
  const std::string schema = expect_string(expect_field(j, "schema", root), field(root, "schema"));
  if (schema != "txpar-block/1")
    throw ParseError(field(root, "schema"), "unsupported schema '" + schema + "'");
  const std::string platform =
      expect_string(expect_field(j, "platform", root), field(root, "platform"));
  if (platform == "utxo") file.platform = BlockFile::Platform::Utxo;
  else if (platform == "account") file.platform = BlockFile::Platform::Account;
  else throw ParseError(field(root, "platform"), "platform is 'utxo' or 'account'");

  const Json& genesis = expect_field(j, "genesis", root);
  const std::string at_genesis = field(root, "genesis");
  if (file.platform == BlockFile::Platform::Utxo) {
    const Json& coinbase = expect_field(genesis, "coinbase", at_genesis);
    if (!coinbase.is_array()) throw ParseError(field(at_genesis, "coinbase"), "expected an array");
    for (std::size_t i = 0; i < coinbase.size(); ++i)
      file.coinbase.push_back(parse_utxo_tx(coinbase[i], element(field(at_genesis, "coinbase"), i)));
  } else {
    if (j.contains("contracts")) {
      const Json& contracts = j["contracts"];
      if (!contracts.is_array()) throw ParseError(field(root, "contracts"), "expected an array");
      for (std::size_t i = 0; i < contracts.size(); ++i)
        file.contracts.push_back(parse_contract(contracts[i], element(field(root, "contracts"), i)));
    }
    const Json& balances = expect_field(genesis, "balances", at_genesis);
    if (!balances.is_object()) throw ParseError(field(at_genesis, "balances"), "expected an object");
    for (const auto& [addr, units] : balances.items()) {
      const std::string at = field(field(at_genesis, "balances"), addr);
      const std::int64_t n = expect_int(units, at);
      if (n < 0) throw ParseError(at, "balances are non-negative");
      file.balances.emplace_back(Address{addr}, n);
    }
    if (genesis.contains("storage")) {
      const Json& storage = genesis["storage"];
      if (!storage.is_array()) throw ParseError(field(at_genesis, "storage"), "expected an array");
      for (std::size_t i = 0; i < storage.size(); ++i) {
        const std::string at = element(field(at_genesis, "storage"), i);
        GenesisStorage slot;
        slot.address =
            Address{expect_string(expect_field(storage[i], "address", at), field(at, "address"))};
        slot.base = expect_string(expect_field(storage[i], "base", at), field(at, "base"));
        if (storage[i].contains("indices")) {
          const Json& indices = storage[i]["indices"];
          if (!indices.is_array()) throw ParseError(field(at, "indices"), "expected an array");
          for (std::size_t k = 0; k < indices.size(); ++k)
            slot.indices.push_back(parse_value(indices[k], element(field(at, "indices"), k)));
        }
        slot.value = parse_value(expect_field(storage[i], "value", at), field(at, "value"));
        file.storage.push_back(std::move(slot));
      }
    }
  }

  const Json& txs = expect_field(j, "transactions", root);
  if (!txs.is_array()) throw ParseError(field(root, "transactions"), "expected an array");
  for (std::size_t i = 0; i < txs.size(); ++i) {
    const std::string at = element(field(root, "transactions"), i);
    if (file.platform == BlockFile::Platform::Utxo)
      file.transactions.push_back(parse_utxo_tx(txs[i], at));
    else
      file.transactions.push_back(parse_account_tx(txs[i], at));
  }

  if (file.platform == BlockFile::Platform::Utxo) {
    // Ids must be unambiguous: a repeated id is allowed only for a
    // byte-identical repetition of the same transaction.
    std::map<std::string, Json> by_id;
    auto claim = [&](const utxo::Transaction& tx, const std::string& at) {
      const Json encoded = io::utxo_tx_to_json(tx);
      auto [it, inserted] = by_id.emplace(tx.id, encoded);
      if (!inserted && it->second != encoded)
        throw ParseError(at, "transaction id '" + tx.id + "' is reused for different content");
    };
    for (std::size_t i = 0; i < file.coinbase.size(); ++i)
      claim(file.coinbase[i], element(field(field(root, "genesis"), "coinbase"), i));
    for (std::size_t i = 0; i < file.transactions.size(); ++i)
      claim(std::get<utxo::Transaction>(file.transactions[i]),
            element(field(root, "transactions"), i));
  } else {
    std::set<Address> funded;
    for (const auto& [addr, units] : file.balances) funded.insert(addr);
    std::set<Address> contract_addrs;
    for (std::size_t i = 0; i < file.contracts.size(); ++i) {
      contract_addrs.insert(file.contracts[i].address);
      if (funded.count(file.contracts[i].address) == 0)
        throw ParseError(element(field(root, "contracts"), i),
                         "contract address '" + file.contracts[i].address.id +
                             "' has no genesis balance");
    }
    for (std::size_t i = 0; i < file.storage.size(); ++i)
      if (contract_addrs.count(file.storage[i].address) == 0)
        throw ParseError(element(field(field(root, "genesis"), "storage"), i),
                         "storage belongs to contract addresses; '" +
                             file.storage[i].address.id + "' is not one");
  }
  if (j.contains("labels")) {
    const Json& labels = j["labels"];
    if (!labels.is_array() || labels.size() != file.transactions.size())
      throw ParseError(field(root, "labels"), "labels must match the transaction count");
    for (std::size_t i = 0; i < labels.size(); ++i)
      file.labels.push_back(expect_string(labels[i], element(field(root, "labels"), i)));
  }
  return file;
}

inline Json block_file_to_json(const BlockFile& file) {
  using namespace io;
  Json j;
  j["schema"] = "txpar-block/1";
  j["platform"] = file.platform == BlockFile::Platform::Utxo ? "utxo" : "account";
  if (file.platform == BlockFile::Platform::Account && !file.contracts.empty()) {
    j["contracts"] = Json::array();
    for (const account::Contract& c : file.contracts) j["contracts"].push_back(contract_to_json(c));
  }
  Json genesis;
  if (file.platform == BlockFile::Platform::Utxo) {
    genesis["coinbase"] = Json::array();
    for (const utxo::Transaction& tx : file.coinbase)
      genesis["coinbase"].push_back(utxo_tx_to_json(tx));
  } else {
    Json balances = Json::object();
    for (const auto& [addr, units] : file.balances) balances[addr.id] = units;
    genesis["balances"] = std::move(balances);
    if (!file.storage.empty()) {
      genesis["storage"] = Json::array();
      for (const GenesisStorage& slot : file.storage) {
        Json entry;
        entry["address"] = slot.address.id;
        entry["base"] = slot.base;
        if (!slot.indices.empty()) {
          entry["indices"] = Json::array();
          for (const Value& idx : slot.indices) entry["indices"].push_back(value_to_json(idx));
        }
        entry["value"] = value_to_json(slot.value);
        genesis["storage"].push_back(std::move(entry));
      }
    }
  }
  j["genesis"] = std::move(genesis);
  j["transactions"] = Json::array();
  for (const Transaction& tx : file.transactions) {
    if (const auto* t = std::get_if<utxo::Transaction>(&tx))
      j["transactions"].push_back(utxo_tx_to_json(*t));
    else
      j["transactions"].push_back(account_tx_to_json(std::get<account::AccountTransaction>(tx)));
  }
  if (!file.labels.empty()) {
    j["labels"] = Json::array();
    for (const std::string& label : file.labels) j["labels"].push_back(label);
  }
  return j;
}

/// Instantiates the platform and initial state a block file describes.
inline LoadedBlock load_block(const BlockFile& file) {
  LoadedBlock loaded;
  if (file.platform == BlockFile::Platform::Utxo) {
    auto platform = std::make_shared<UtxoPlatform>();
    for (const utxo::Transaction& tx : file.coinbase) platform->add_genesis(tx);
    for (const Transaction& tx : file.transactions)
      platform->index(std::get<utxo::Transaction>(tx));
    loaded.initial = platform->initial_state();
    loaded.platform = std::move(platform);
  } else {
    auto platform = std::make_shared<AccountPlatform>();
    for (const account::Contract& c : file.contracts) platform->add_contract(c);
    for (const auto& [addr, units] : file.balances) platform->set_genesis_balance(addr, units);
    for (const GenesisStorage& slot : file.storage)
      platform->set_genesis_storage(account_obs(slot.address, slot.base, slot.indices), slot.value);
    loaded.initial = platform->initial_state();
    loaded.platform = std::move(platform);
  }
  loaded.block = file.transactions;
  loaded.labels = file.display_labels();
  return loaded;
}

// ---------------------------------------------------------------------------
// Canonical JSON dumps.

inline Json state_to_json(const BlockchainState& state) {
  Json bindings = Json::object();
  for (const auto& [obs, v] : state.bindings()) bindings[to_string(obs)] = io::value_to_json(v);
  return Json{{"state", std::move(bindings)}};
}

inline Json update_to_json(const StateUpdate& update) {
  Json bindings = Json::object();
  for (const auto& [obs, v] : update.bindings()) bindings[to_string(obs)] = io::value_to_json(v);
  return bindings;
}

inline Json net_to_json(const PetriNet& net) {
  Json transitions = Json::array();
  for (std::size_t t = 0; t < net.transition_count(); ++t)
    transitions.push_back(Json{{"position", net.transition(t).position},
                               {"label", net.transition(t).label}});
  Json places = Json::array();
  Json flow = Json::array();
  for (std::size_t p = 0; p < net.place_count(); ++p) {
    const NetPlace& place = net.place(p);
    const char* kind = place.kind == NetPlace::Kind::Entry ? "entry"
                       : place.kind == NetPlace::Kind::Exit ? "exit"
                                                            : "order";
    Json entry{{"kind", kind}, {"of", net.transition(place.a).position}};
    if (place.kind == NetPlace::Kind::Order) entry["before"] = net.transition(place.b).position;
    places.push_back(std::move(entry));
  }
  for (std::size_t t = 0; t < net.transition_count(); ++t) {
    for (std::size_t p : net.pre(t)) flow.push_back(Json::array({"p" + std::to_string(p), "t" + std::to_string(t)}));
    for (std::size_t p : net.post(t)) flow.push_back(Json::array({"t" + std::to_string(t), "p" + std::to_string(p)}));
  }
  Json marking = Json::array();
  for (std::uint32_t tokens : net.initial_marking()) marking.push_back(tokens);
  return Json{{"transitions", std::move(transitions)},
              {"places", std::move(places)},
              {"flow", std::move(flow)},
              {"marking", std::move(marking)}};
}

inline Json trace_to_json(const ExecTrace& trace) {
  Json schedule = Json::array();
  for (const Step& step : trace.schedule) {
    Json s = Json::array();
    for (std::size_t t : step) s.push_back(t + 1);  // 1-based positions
    schedule.push_back(std::move(s));
  }
  Json steps = Json::array();
  for (const auto& step : trace.step_updates) {
    Json updates = Json::array();
    for (const auto& [position, update] : step)
      updates.push_back(Json{{"tx", position + 1}, {"update", update_to_json(update)}});
    steps.push_back(std::move(updates));
  }
  return Json{{"schedule", std::move(schedule)}, {"steps", std::move(steps)}};
}

}  // namespace txpar
