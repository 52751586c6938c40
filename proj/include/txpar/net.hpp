// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <map>

#include "txpar/swap.hpp"

/// Occurrence-net machinery: construction of a net from a block and a
/// swap relation, validation of the occurrence-net conditions, marking
/// and step-firing dynamics, and deterministic DOT export.
namespace txpar {

/// Transition of a block net: the i-th transaction, rendered as a pair of
/// its 1-based position and a display label. Duplicate transactions stay
/// distinguishable through the position.
struct NetTransition {
  std::size_t position = 0;  // 1-based
  std::string label;
};

/// Place of a block net: an entry place (*, t), an exit place (t, *), or
/// an ordering place (t, t') between two transitions.
struct NetPlace {
  enum class Kind { Entry, Exit, Order };
  Kind kind = Kind::Entry;
  std::size_t a = 0;  // transition index
  std::size_t b = 0;  // consumer transition index (Order only)
};

/// Marking: token count per place, indexed by place id. Reachable
/// markings of built nets stay 0/1-valued.
using Marking = std::vector<std::uint32_t>;

/// Step: set of transition indices fired simultaneously, kept sorted.
using Step = std::vector<std::size_t>;

inline Step make_step(std::initializer_list<std::size_t> ids) {
  Step s(ids);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

/// Petri net with boolean flow stored as pre/post adjacency per node.
/// Immutable once built; markings are values passed explicitly.
class PetriNet {
public:
  PetriNet() = default;

  std::size_t add_transition(std::string label, std::size_t position) {
    transitions_.push_back({position, std::move(label)});
    pre_of_transition_.emplace_back();
    post_of_transition_.emplace_back();
    return transitions_.size() - 1;
  }

  std::size_t add_place(NetPlace place, std::uint32_t initial_tokens = 0) {
    places_.push_back(place);
    producers_.emplace_back();
    consumers_.emplace_back();
    initial_.push_back(initial_tokens);
    return places_.size() - 1;
  }

  void add_arc_place_to_transition(std::size_t place, std::size_t transition) {
    consumers_[place].push_back(transition);
    pre_of_transition_[transition].push_back(place);
  }

  void add_arc_transition_to_place(std::size_t transition, std::size_t place) {
    producers_[place].push_back(transition);
    post_of_transition_[transition].push_back(place);
  }

  std::size_t transition_count() const { return transitions_.size(); }
  std::size_t place_count() const { return places_.size(); }
  const NetTransition& transition(std::size_t t) const { return transitions_[t]; }
  const NetPlace& place(std::size_t p) const { return places_[p]; }
  const std::vector<std::size_t>& pre(std::size_t t) const { return pre_of_transition_[t]; }
  const std::vector<std::size_t>& post(std::size_t t) const { return post_of_transition_[t]; }
  const std::vector<std::size_t>& producers(std::size_t p) const { return producers_[p]; }
  const std::vector<std::size_t>& consumers(std::size_t p) const { return consumers_[p]; }
  const Marking& initial_marking() const { return initial_; }

private:
  std::vector<NetTransition> transitions_;
  std::vector<NetPlace> places_;
  std::vector<std::vector<std::size_t>> pre_of_transition_;
  std::vector<std::vector<std::size_t>> post_of_transition_;
  std::vector<std::vector<std::size_t>> producers_;
  std::vector<std::vector<std::size_t>> consumers_;
  Marking initial_;
};

/// Builds the occurrence net of a block under a swap relation: one
/// transition (label, i) per position, entry/exit places per transition,
/// and an ordering place (t_i, t_j) exactly when i < j and the pair is
/// not related. Ordering places are materialized eagerly, so blocks are
/// capped at `max_block` transactions.
inline PetriNet build_net(const std::vector<std::string>& labels, const SwapRelation& rel,
                          std::size_t max_block = 4096) {
  if (labels.size() > max_block)
    throw std::length_error("build_net: block exceeds the configured transaction cap");
  PetriNet net;
  const std::size_t n = labels.size();
  for (std::size_t i = 0; i < n; ++i) net.add_transition(labels[i], i + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t entry = net.add_place({NetPlace::Kind::Entry, i, 0}, 1);
    net.add_arc_place_to_transition(entry, i);
    const std::size_t exit = net.add_place({NetPlace::Kind::Exit, i, 0});
    net.add_arc_transition_to_place(i, exit);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rel.related(i, j)) continue;
      const std::size_t order = net.add_place({NetPlace::Kind::Order, i, j});
      net.add_arc_transition_to_place(i, order);
      net.add_arc_place_to_transition(order, j);
    }
  return net;
}

inline PetriNet build_net(const Blockchain& block, const SwapRelation& rel,
                          std::size_t max_block = 4096) {
  std::vector<std::string> labels;
  labels.reserve(block.size());
  for (const Transaction& tx : block) labels.push_back(tx_label(tx));
  return build_net(labels, rel, max_block);
}

/// Result of validating the occurrence-net conditions.
struct OccurrenceReport {
  bool ok = true;
  std::vector<std::string> violations;

  void violate(std::string what) {
    ok = false;
    violations.push_back(std::move(what));
  }
};

/// Checks the occurrence-net conditions: each place has at most one
/// consumer; a place has one producer iff it starts unmarked and none iff
/// it starts marked; flow is boolean (no parallel arcs); and the flow
/// relation is acyclic.
inline OccurrenceReport check_occurrence(const PetriNet& net) {
  OccurrenceReport report;
  for (std::size_t p = 0; p < net.place_count(); ++p) {
    const auto& consumers = net.consumers(p);
    const auto& producers = net.producers(p);
    if (consumers.size() > 1)
      report.violate("place " + std::to_string(p) + " has " + std::to_string(consumers.size()) +
                     " consumers");
    const bool marked = net.initial_marking()[p] > 0;
    if (marked && !producers.empty())
      report.violate("initially marked place " + std::to_string(p) + " has a producer");
    if (!marked && producers.size() != 1)
      report.violate("unmarked place " + std::to_string(p) + " has " +
                     std::to_string(producers.size()) + " producers");
    std::set<std::size_t> unique_consumers(consumers.begin(), consumers.end());
    std::set<std::size_t> unique_producers(producers.begin(), producers.end());
    if (unique_consumers.size() != consumers.size() || unique_producers.size() != producers.size())
      report.violate("place " + std::to_string(p) + " has a non-boolean arc");
  }
  for (std::size_t t = 0; t < net.transition_count(); ++t) {
    std::set<std::size_t> pre(net.pre(t).begin(), net.pre(t).end());
    std::set<std::size_t> post(net.post(t).begin(), net.post(t).end());
    if (pre.size() != net.pre(t).size() || post.size() != net.post(t).size())
      report.violate("transition " + std::to_string(t) + " has a non-boolean arc");
  }

  // Acyclicity of the flow relation over the bipartite node set:
  // transitions are node ids [0, T), places [T, T+P).
  const std::size_t t_count = net.transition_count();
  const std::size_t nodes = t_count + net.place_count();
  std::vector<std::vector<std::size_t>> succ(nodes);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t p : net.post(t)) succ[t].push_back(t_count + p);
    for (std::size_t p : net.pre(t)) succ[t_count + p].push_back(t);
  }
  std::vector<int> color(nodes, 0);
  std::function<bool(std::size_t)> has_cycle = [&](std::size_t node) {
    color[node] = 1;
    for (std::size_t next : succ[node]) {
      if (color[next] == 1) return true;
      if (color[next] == 0 && has_cycle(next)) return true;
    }
    color[node] = 2;
    return false;
  };
  for (std::size_t node = 0; node < nodes; ++node)
    if (color[node] == 0 && has_cycle(node)) {
      report.violate("flow relation has a cycle");
      break;
    }
  return report;
}

/// A step is enabled when the multiset sum of its members' presets fits
/// under the marking. The empty step is always enabled.
inline bool is_enabled(const PetriNet& net, const Marking& marking, const Step& step) {
  std::map<std::size_t, std::uint32_t> needed;
  for (std::size_t t : step)
    for (std::size_t p : net.pre(t)) ++needed[p];
  return std::all_of(needed.begin(), needed.end(),
                     [&](const auto& entry) { return marking[entry.first] >= entry.second; });
}

/// Fires an enabled step: marking - pre(step) + post(step). Firing a
/// non-enabled step is a caller error, reported as an exception rather
/// than a false result.
inline Marking fire(const PetriNet& net, const Marking& marking, const Step& step) {
  if (!is_enabled(net, marking, step))
    throw std::logic_error("fire: step is not enabled at this marking");
  Marking next = marking;
  for (std::size_t t : step) {
    for (std::size_t p : net.pre(t)) --next[p];
    for (std::size_t p : net.post(t)) ++next[p];
  }
  return next;
}

/// All transitions enabled as singletons, in canonical (index) order.
inline Step enabled_transitions(const PetriNet& net, const Marking& marking) {
  Step out;
  for (std::size_t t = 0; t < net.transition_count(); ++t)
    if (is_enabled(net, marking, {t})) out.push_back(t);
  return out;
}

/// Every step enabled in turn from the initial marking.
inline bool is_step_firing_sequence(const PetriNet& net, const std::vector<Step>& seq) {
  Marking marking = net.initial_marking();
  for (const Step& step : seq) {
    if (!is_enabled(net, marking, step)) return false;
    marking = fire(net, marking, step);
  }
  return true;
}

/// Valid and firing every transition of the net (each exactly once, by
/// the occurrence-net structure).
inline bool is_maximal(const PetriNet& net, const std::vector<Step>& seq) {
  if (!is_step_firing_sequence(net, seq)) return false;
  std::set<std::size_t> fired;
  for (const Step& step : seq) fired.insert(step.begin(), step.end());
  return fired.size() == net.transition_count();
}

inline Marking run_steps(const PetriNet& net, const std::vector<Step>& seq) {
  Marking marking = net.initial_marking();
  for (const Step& step : seq) marking = fire(net, marking, step);
  return marking;
}

/// Enumerates all interleavings that order each step's members
/// arbitrarily while preserving step order, feeding each to `visit`
/// (stop early by returning false). Refuses steps larger than
/// `max_step_size`: the per-step factor is factorial.
inline void linearizations(const std::vector<Step>& seq,
                           const std::function<bool(const std::vector<std::size_t>&)>& visit,
                           std::size_t max_step_size = 8) {
  for (const Step& step : seq)
    if (step.size() > max_step_size)
      throw std::length_error("linearizations: step exceeds the configured size bound");
  std::vector<std::size_t> current;
  bool stop = false;
  std::function<void(std::size_t)> recurse = [&](std::size_t step_index) {
    if (stop) return;
    if (step_index == seq.size()) {
      if (!visit(current)) stop = true;
      return;
    }
    Step perm = seq[step_index];
    std::sort(perm.begin(), perm.end());
    do {
      current.insert(current.end(), perm.begin(), perm.end());
      recurse(step_index + 1);
      current.resize(current.size() - perm.size());
      if (stop) return;
    } while (std::next_permutation(perm.begin(), perm.end()));
  };
  recurse(0);
}

inline std::vector<std::vector<std::size_t>> all_linearizations(const std::vector<Step>& seq,
                                                                std::size_t max_step_size = 8) {
  std::vector<std::vector<std::size_t>> out;
  linearizations(
      seq,
      [&](const std::vector<std::size_t>& lin) {
        out.push_back(lin);
        return true;
      },
      max_step_size);
  return out;
}

namespace detail {

inline std::string place_display(const PetriNet& net, std::size_t p) {
  const NetPlace& place = net.place(p);
  auto tr = [&](std::size_t t) { return "t" + std::to_string(net.transition(t).position); };
  switch (place.kind) {
    case NetPlace::Kind::Entry:
      return "(*," + tr(place.a) + ")";
    case NetPlace::Kind::Exit:
      return "(" + tr(place.a) + ",*)";
    case NetPlace::Kind::Order:
      return "(" + tr(place.a) + "," + tr(place.b) + ")";
  }
  return "";
}

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Deterministic GraphViz rendering: transitions as boxes labeled
/// (label, position), places as circles (marked ones filled), arcs per
/// flow. Byte-identical across runs for the same net.
inline std::string export_dot(const PetriNet& net, const Marking* marking = nullptr) {
  const Marking& m = marking != nullptr ? *marking : net.initial_marking();
  std::ostringstream out;
  out << "digraph occurrence_net {\n";
  out << "  rankdir=LR;\n";
  for (std::size_t t = 0; t < net.transition_count(); ++t) {
    const NetTransition& tr = net.transition(t);
    out << "  t" << t << " [shape=box, label=\"" << detail::dot_escape(tr.label) << " ("
        << tr.position << ")\"];\n";
  }
  for (std::size_t p = 0; p < net.place_count(); ++p) {
    out << "  p" << p << " [shape=circle, label=\"\", xlabel=\""
        << detail::dot_escape(detail::place_display(net, p)) << "\"";
    if (p < m.size() && m[p] > 0) out << ", style=filled, fillcolor=black";
    out << "];\n";
  }
  for (std::size_t t = 0; t < net.transition_count(); ++t) {
    std::vector<std::size_t> pre = net.pre(t);
    std::sort(pre.begin(), pre.end());
    for (std::size_t p : pre) out << "  p" << p << " -> t" << t << ";\n";
  }
  for (std::size_t t = 0; t < net.transition_count(); ++t) {
    std::vector<std::size_t> post = net.post(t);
    std::sort(post.begin(), post.end());
    for (std::size_t p : post) out << "  t" << t << " -> p" << p << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace txpar
