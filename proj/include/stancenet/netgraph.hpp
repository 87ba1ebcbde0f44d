#pragma once

// Directed interaction multigraphs between posters, user stance aggregation,
// largest weakly connected component, categorical assortativity over the
// directed mixing matrix, and GraphML / DOT export.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"
#include "stancenet/util.hpp"

namespace stancenet::net {

using json = nlohmann::json;

/// Which interaction kinds become edges. The two paired groupings and `All`
/// are the main views; the single-kind values give per-kind networks.
enum class Grouping { TagReply, DuetStitch, All, Tag, Reply, Stitch, Duet };

inline std::string to_string(Grouping g) {
  switch (g) {
    case Grouping::TagReply: return "tag-reply";
    case Grouping::DuetStitch: return "duet-stitch";
    case Grouping::All: return "all";
    case Grouping::Tag: return "tag";
    case Grouping::Reply: return "reply";
    case Grouping::Stitch: return "stitch";
    case Grouping::Duet: return "duet";
  }
  return "all";
}

inline std::optional<Grouping> parse_grouping(std::string_view s) {
  for (auto g : {Grouping::TagReply, Grouping::DuetStitch, Grouping::All, Grouping::Tag,
                 Grouping::Reply, Grouping::Stitch, Grouping::Duet}) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

inline bool admits(Grouping g, InteractionKind k) {
  switch (g) {
    case Grouping::TagReply: return k == InteractionKind::Tag || k == InteractionKind::Reply;
    case Grouping::DuetStitch: return k == InteractionKind::Duet || k == InteractionKind::Stitch;
    case Grouping::All: return true;
    case Grouping::Tag: return k == InteractionKind::Tag;
    case Grouping::Reply: return k == InteractionKind::Reply;
    case Grouping::Stitch: return k == InteractionKind::Stitch;
    case Grouping::Duet: return k == InteractionKind::Duet;
  }
  return false;
}

struct Edge {
  std::string source;
  std::string target;
  InteractionKind kind = InteractionKind::Tag;
  std::string post_id;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend bool operator<(const Edge& a, const Edge& b) {
    return std::tie(a.source, a.target, a.kind, a.post_id) <
           std::tie(b.source, b.target, b.kind, b.post_id);
  }
};

/// Nodes are the endpoints of edges. Edges are kept sorted; parallel edges
/// and self-loops are allowed.
struct InteractionGraph {
  Grouping grouping = Grouping::All;
  std::set<std::string> nodes;
  std::vector<Edge> edges;

  void add(Edge e) {
    nodes.insert(e.source);
    nodes.insert(e.target);
    edges.push_back(std::move(e));
  }
  void finalize() { std::sort(edges.begin(), edges.end()); }
};

/// One edge per resolved interaction the grouping admits; source is the post author.
inline InteractionGraph build_graph(const std::vector<Post>& posts, Grouping grouping) {
  InteractionGraph g;
  g.grouping = grouping;
  for (const auto& p : posts) {
    for (const auto& in : p.interactions) {
      if (!in.resolved || in.target.empty() || !admits(grouping, in.kind)) continue;
      g.add({p.author, in.target, in.kind, p.id});
    }
  }
  g.finalize();
  return g;
}

/// Subgraph induced by `keep`: nodes in `keep` and edges with both ends in it.
inline InteractionGraph induced(const InteractionGraph& g,
                                const std::set<std::string>& keep) {
  InteractionGraph out;
  out.grouping = g.grouping;
  for (const auto& n : g.nodes) {
    if (keep.count(n)) out.nodes.insert(n);
  }
  for (const auto& e : g.edges) {
    if (keep.count(e.source) && keep.count(e.target)) out.edges.push_back(e);
  }
  return out;
}

/// Weakly connected components, largest first; equal sizes ordered by
/// smallest member name.
inline std::vector<std::set<std::string>> weak_components(const InteractionGraph& g) {
  std::vector<std::string> names(g.nodes.begin(), g.nodes.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  std::vector<std::size_t> parent(names.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& e : g.edges) {
    const auto a = find(index.at(e.source));
    const auto b = find(index.at(e.target));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::size_t, std::set<std::string>> groups;
  for (std::size_t i = 0; i < names.size(); ++i) groups[find(i)].insert(names[i]);
  std::vector<std::set<std::string>> comps;
  for (auto& [root, members] : groups) comps.push_back(std::move(members));
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() > b.size() : *a.begin() < *b.begin();
  });
  return comps;
}

inline InteractionGraph largest_component(const InteractionGraph& g) {
  const auto comps = weak_components(g);
  if (comps.empty()) {
    InteractionGraph empty;
    empty.grouping = g.grouping;
    return empty;
  }
  return induced(g, comps.front());
}

// ---------------------------------------------------------------------------
// Node stance

/// Node class in the network; Unknown for users with no classified posts.
enum class NodeClass { AntiTrans, ProTrans, Neutral, Unknown };

inline std::string to_string(NodeClass c) {
  switch (c) {
    case NodeClass::AntiTrans: return "AntiTrans";
    case NodeClass::ProTrans: return "ProTrans";
    case NodeClass::Neutral: return "Neutral";
    case NodeClass::Unknown: return "Unknown";
  }
  return "Unknown";
}

inline NodeClass node_class(Stance s) {
  switch (s) {
    case Stance::AntiTrans: return NodeClass::AntiTrans;
    case Stance::ProTrans: return NodeClass::ProTrans;
    case Stance::Neutral: return NodeClass::Neutral;
  }
  return NodeClass::Unknown;
}

struct NodeStance {
  std::string username;
  NodeClass stance = NodeClass::Unknown;
  std::array<std::size_t, 3> post_counts{};  // by Stance index
};

/// Majority class over each author's classified posts; ties give Neutral.
inline std::map<std::string, NodeStance> aggregate_stances(
    const std::vector<Post>& posts, const std::map<std::string, Stance>& verdicts) {
  std::map<std::string, NodeStance> out;
  for (const auto& p : posts) {
    auto v = verdicts.find(p.id);
    if (v == verdicts.end()) continue;
    auto& ns = out[p.author];
    ns.username = p.author;
    ++ns.post_counts[index_of(v->second)];
  }
  for (auto& [name, ns] : out) {
    const auto top = *std::max_element(ns.post_counts.begin(), ns.post_counts.end());
    std::size_t winners = 0;
    Stance pick = Stance::Neutral;
    for (auto s : kStances) {
      if (ns.post_counts[index_of(s)] == top) {
        ++winners;
        pick = s;
      }
    }
    ns.stance = winners > 1 ? NodeClass::Neutral : node_class(pick);
  }
  return out;
}

using StanceMap = std::map<std::string, NodeClass>;

inline StanceMap stance_map(const std::map<std::string, NodeStance>& stances) {
  StanceMap m;
  for (const auto& [name, ns] : stances) m[name] = ns.stance;
  return m;
}

inline NodeClass class_of(const StanceMap& stances, const std::string& node) {
  auto it = stances.find(node);
  return it == stances.end() ? NodeClass::Unknown : it->second;
}

// ---------------------------------------------------------------------------
// Mixing and assortativity

inline constexpr std::size_t kClasses = 3;  // AntiTrans, ProTrans, Neutral

struct MixingMatrix {
  std::array<std::array<double, kClasses>, kClasses> e{};
  std::array<double, kClasses> a{};  // source marginal (row sums)
  std::array<double, kClasses> b{};  // target marginal (column sums)
  std::size_t edges = 0;
};

struct AssortativityResult {
  std::optional<double> r;
  std::string undefined_reason;
  MixingMatrix mixing;
  std::size_t unknown_nodes = 0;      // excluded for lacking a stance
  std::size_t excluded_edges = 0;     // incident to excluded nodes
};

/// Directed categorical assortativity, r = (sum e_ii - sum a_i b_i) / (1 - sum a_i b_i).
/// Unknown nodes are always dropped; Neutral nodes too unless `include_neutral`.
inline AssortativityResult assortativity(const InteractionGraph& g, const StanceMap& stances,
                                         bool include_neutral) {
  AssortativityResult out;
  for (const auto& n : g.nodes) {
    if (class_of(stances, n) == NodeClass::Unknown) ++out.unknown_nodes;
  }
  std::array<std::array<std::size_t, kClasses>, kClasses> counts{};
  const auto usable = [&](NodeClass c) {
    return c != NodeClass::Unknown && (include_neutral || c != NodeClass::Neutral);
  };
  for (const auto& e : g.edges) {
    const NodeClass s = class_of(stances, e.source);
    const NodeClass t = class_of(stances, e.target);
    if (!usable(s) || !usable(t)) {
      ++out.excluded_edges;
      continue;
    }
    ++counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
    ++out.mixing.edges;
  }
  if (out.mixing.edges == 0) {
    out.undefined_reason = "no edges between classified nodes after filtering";
    return out;
  }
  const double m = static_cast<double>(out.mixing.edges);
  for (std::size_t i = 0; i < kClasses; ++i) {
    for (std::size_t j = 0; j < kClasses; ++j) {
      out.mixing.e[i][j] = static_cast<double>(counts[i][j]) / m;
      out.mixing.a[i] += out.mixing.e[i][j];
      out.mixing.b[j] += out.mixing.e[i][j];
    }
  }
  double trace = 0;
  double chance = 0;
  for (std::size_t i = 0; i < kClasses; ++i) {
    trace += out.mixing.e[i][i];
    chance += out.mixing.a[i] * out.mixing.b[i];
  }
  const double denom = 1.0 - chance;
  if (std::abs(denom) < 1e-15) {
    out.undefined_reason = "all edges within a single class (1 - sum a_i b_i = 0)";
    return out;
  }
  out.r = (trace - chance) / denom;
  return out;
}

struct ClassCounts {
  std::map<NodeClass, std::size_t> nodes;
  std::optional<double> anti_to_pro;  // undefined without pro nodes
};

inline ClassCounts class_ratio(const InteractionGraph& g, const StanceMap& stances) {
  ClassCounts out;
  for (auto c : {NodeClass::AntiTrans, NodeClass::ProTrans, NodeClass::Neutral, NodeClass::Unknown}) {
    out.nodes[c] = 0;
  }
  for (const auto& n : g.nodes) ++out.nodes[class_of(stances, n)];
  const auto pro = out.nodes[NodeClass::ProTrans];
  if (pro > 0) {
    out.anti_to_pro = static_cast<double>(out.nodes[NodeClass::AntiTrans]) / static_cast<double>(pro);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

enum class Format { GraphML, Dot };

/// Anti-trans red, pro-trans green, neutral black; unknown gray.
inline std::string color_of(NodeClass c) {
  switch (c) {
    case NodeClass::AntiTrans: return "red";
    case NodeClass::ProTrans: return "green";
    case NodeClass::Neutral: return "black";
    case NodeClass::Unknown: return "gray";
  }
  return "gray";
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

inline std::string to_graphml(const InteractionGraph& g, const StanceMap& stances) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
     << "  <key id=\"stance\" for=\"node\" attr.name=\"stance\" attr.type=\"string\"/>\n"
     << "  <key id=\"color\" for=\"node\" attr.name=\"color\" attr.type=\"string\"/>\n"
     << "  <key id=\"kind\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n"
     << "  <key id=\"post_id\" for=\"edge\" attr.name=\"post_id\" attr.type=\"string\"/>\n"
     << "  <graph id=\"" << to_string(g.grouping) << "\" edgedefault=\"directed\">\n";
  for (const auto& n : g.nodes) {
    const NodeClass c = class_of(stances, n);
    os << "    <node id=\"" << detail::xml_escape(n) << "\">\n"
       << "      <data key=\"stance\">" << to_string(c) << "</data>\n"
       << "      <data key=\"color\">" << color_of(c) << "</data>\n"
       << "    </node>\n";
  }
  std::size_t i = 0;
  for (const auto& e : g.edges) {
    os << "    <edge id=\"e" << i++ << "\" source=\"" << detail::xml_escape(e.source)
       << "\" target=\"" << detail::xml_escape(e.target) << "\">\n"
       << "      <data key=\"kind\">" << to_string(e.kind) << "</data>\n"
       << "      <data key=\"post_id\">" << detail::xml_escape(e.post_id) << "</data>\n"
       << "    </edge>\n";
  }
  os << "  </graph>\n</graphml>\n";
  return os.str();
}

/// Edges take the color of their source node.
inline std::string to_dot(const InteractionGraph& g, const StanceMap& stances) {
  std::ostringstream os;
  os << "digraph " << detail::dot_quote(to_string(g.grouping)) << " {\n";
  for (const auto& n : g.nodes) {
    const NodeClass c = class_of(stances, n);
    os << "  " << detail::dot_quote(n) << " [stance=" << detail::dot_quote(to_string(c))
       << ", color=" << color_of(c) << "];\n";
  }
  for (const auto& e : g.edges) {
    os << "  " << detail::dot_quote(e.source) << " -> " << detail::dot_quote(e.target)
       << " [kind=" << to_string(e.kind) << ", post_id=" << detail::dot_quote(e.post_id)
       << ", color=" << color_of(class_of(stances, e.source)) << "];\n";
  }
  os << "}\n";
  return os.str();
}

inline std::string render(const InteractionGraph& g, const StanceMap& stances, Format f) {
  return f == Format::GraphML ? to_graphml(g, stances) : to_dot(g, stances);
}

inline void export_graph(const std::filesystem::path& path, const InteractionGraph& g,
                         const StanceMap& stances, Format f) {
  write_file(path, render(g, stances, f));
}

/// Network metrics document: grouping, node counts, ratio and both
/// assortativity variants with reasons for any undefined value.
inline json metrics_json(const InteractionGraph& g, const StanceMap& stances) {
  const auto counts = class_ratio(g, stances);
  const auto with = assortativity(g, stances, true);
  const auto without = assortativity(g, stances, false);
  json node_counts = json::object();
  for (const auto& [c, n] : counts.nodes) node_counts[to_string(c)] = n;
  json reasons = json::object();
  if (!counts.anti_to_pro) reasons["ratio"] = "no pro-trans nodes";
  if (!with.r) reasons["r_with_neutral"] = with.undefined_reason;
  if (!without.r) reasons["r_without_neutral"] = without.undefined_reason;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"grouping", to_string(g.grouping)},
          {"directed", true},
          {"nodes", g.nodes.size()},
          {"edges", g.edges.size()},
          {"node_counts", node_counts},
          {"ratio", opt(counts.anti_to_pro)},
          {"r_with_neutral", opt(with.r)},
          {"r_without_neutral", opt(without.r)},
          {"edges_used_with_neutral", with.mixing.edges},
          {"edges_used_without_neutral", without.mixing.edges},
          {"unknown_nodes", with.unknown_nodes},
          {"undefined_reasons", reasons}};
}

}  // namespace stancenet::net
