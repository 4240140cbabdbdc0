#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geosbm {

using Vertex = std::uint32_t;
using Edge = std::pair<Vertex, Vertex>;

/// Undirected simple graph in compressed sparse row form. Neighbor lists are
/// sorted, symmetric, free of duplicates and self-loops.
class SparseGraph {
 public:
  SparseGraph() : offsets_(1, 0) {}

  /// Builds from an arbitrary edge list; duplicates and reversed copies are
  /// merged. Throws on self-loops or out-of-range endpoints.
  static SparseGraph from_edges(std::size_t n, std::span<const Edge> edges) {
    std::vector<std::size_t> degree(n + 1, 0);
    for (auto [u, v] : edges) {
      if (u >= n || v >= n) {
        throw std::invalid_argument("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                    ") out of range for n=" + std::to_string(n));
      }
      if (u == v) throw std::invalid_argument("self-loop at vertex " + std::to_string(u));
      ++degree[u];
      ++degree[v];
    }
    SparseGraph g;
    g.offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + degree[i];
    g.neighbors_.resize(g.offsets_[n]);
    std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    for (auto [u, v] : edges) {
      g.neighbors_[fill[u]++] = v;
      g.neighbors_[fill[v]++] = u;
    }
    // sort + dedup each list, then compact
    std::size_t write = 0;
    std::vector<std::size_t> new_offsets(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto first = g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]);
      auto last = g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]);
      std::sort(first, last);
      last = std::unique(first, last);
      for (auto it = first; it != last; ++it) g.neighbors_[write++] = *it;
      new_offsets[i + 1] = write;
    }
    g.neighbors_.resize(write);
    g.neighbors_.shrink_to_fit();
    g.offsets_ = std::move(new_offsets);
    return g;
  }

  std::size_t n() const { return offsets_.size() - 1; }
  std::size_t m() const { return neighbors_.size() / 2; }

  std::span<const Vertex> neighbors(std::size_t v) const {
    return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }

  std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }

  bool has_edge(Vertex u, Vertex v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  /// Each undirected edge once, as (u, v) with u < v, in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(m());
    for (std::size_t u = 0; u < n(); ++u) {
      for (auto v : neighbors(u)) {
        if (u < v) out.emplace_back(static_cast<Vertex>(u), v);
      }
    }
    return out;
  }

  friend bool operator==(const SparseGraph&, const SparseGraph&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Vertex> neighbors_;
};

inline std::vector<std::size_t> degree_vector(const SparseGraph& g) {
  std::vector<std::size_t> deg(g.n());
  for (std::size_t v = 0; v < g.n(); ++v) deg[v] = g.degree(v);
  return deg;
}

struct ComponentMap {
  std::vector<std::uint32_t> component_id;  // ids numbered in order of first vertex
  std::vector<std::size_t> sizes;
  std::uint32_t giant_index = 0;

  std::size_t giant_size() const { return sizes.empty() ? 0 : sizes[giant_index]; }

  /// Vertices of component `id`, ascending.
  std::vector<Vertex> members(std::uint32_t id) const {
    std::vector<Vertex> out;
    out.reserve(sizes.at(id));
    for (std::size_t v = 0; v < component_id.size(); ++v) {
      if (component_id[v] == id) out.push_back(static_cast<Vertex>(v));
    }
    return out;
  }

  std::vector<Vertex> giant_members() const { return members(giant_index); }
};

/// Exact components by breadth-first traversal. Component ids follow the
/// smallest vertex they contain; the giant is the largest component with ties
/// going to the smallest id.
inline ComponentMap connected_components(const SparseGraph& g) {
  constexpr auto unset = static_cast<std::uint32_t>(-1);
  ComponentMap map;
  map.component_id.assign(g.n(), unset);
  std::vector<Vertex> queue;
  queue.reserve(g.n());
  for (std::size_t s = 0; s < g.n(); ++s) {
    if (map.component_id[s] != unset) continue;
    const auto id = static_cast<std::uint32_t>(map.sizes.size());
    queue.clear();
    queue.push_back(static_cast<Vertex>(s));
    map.component_id[s] = id;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (auto w : g.neighbors(queue[head])) {
        if (map.component_id[w] == unset) {
          map.component_id[w] = id;
          queue.push_back(w);
        }
      }
    }
    map.sizes.push_back(queue.size());
    if (queue.size() > map.sizes[map.giant_index]) map.giant_index = id;
  }
  return map;
}

struct Subgraph {
  SparseGraph graph;
  std::vector<Vertex> original_ids;  // new id -> old id
};

/// Graph induced on `vertices`, relabeled 0..|vertices|-1 in the given order.
inline Subgraph induced_subgraph(const SparseGraph& g, std::span<const Vertex> vertices) {
  if (vertices.empty()) throw std::invalid_argument("induced_subgraph: empty vertex set");
  constexpr auto absent = static_cast<Vertex>(-1);
  std::vector<Vertex> new_id(g.n(), absent);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vertex v = vertices[i];
    if (v >= g.n()) throw std::invalid_argument("induced_subgraph: vertex out of range");
    if (new_id[v] != absent) throw std::invalid_argument("induced_subgraph: repeated vertex");
    new_id[v] = static_cast<Vertex>(i);
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (auto w : g.neighbors(vertices[i])) {
      if (new_id[w] != absent && i < new_id[w]) edges.emplace_back(static_cast<Vertex>(i), new_id[w]);
    }
  }
  return {SparseGraph::from_edges(vertices.size(), edges),
          std::vector<Vertex>(vertices.begin(), vertices.end())};
}

/// Restriction to the giant component.
inline Subgraph giant_component(const SparseGraph& g) {
  if (g.n() == 0) throw std::invalid_argument("giant_component: empty graph");
  const auto members = connected_components(g).giant_members();
  return induced_subgraph(g, members);
}

// Edge-list files: "u v" per line, 0-indexed; an optional "# n=<int>" header
// fixes the vertex count, other '#' lines are comments.

inline SparseGraph load_edge_list(std::istream& in, std::optional<std::size_t> n_override = {}) {
  std::vector<Edge> edges;
  std::optional<std::size_t> header_n;
  std::size_t max_id_plus_one = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      const auto pos = line.find("n=", first);
      if (pos != std::string::npos && !header_n) {
        try {
          header_n = std::stoull(line.substr(pos + 2));
        } catch (...) {
          throw std::runtime_error("edge list: bad header at line " + std::to_string(line_no));
        }
      }
      continue;
    }
    std::istringstream ss(line);
    long long u = -1;
    long long v = -1;
    std::string rest;
    if (!(ss >> u >> v) || (ss >> rest) || u < 0 || v < 0 || u > 0xFFFFFFFELL ||
        v > 0xFFFFFFFELL) {
      throw std::runtime_error("edge list: malformed line " + std::to_string(line_no) + ": '" +
                               line + "'");
    }
    if (u == v) {
      throw std::runtime_error("edge list: self-loop at line " + std::to_string(line_no));
    }
    edges.emplace_back(static_cast<Vertex>(u), static_cast<Vertex>(v));
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, static_cast<std::size_t>(std::max(u, v)) + 1);
  }
  const std::size_t n = n_override.value_or(header_n.value_or(max_id_plus_one));
  if (max_id_plus_one > n) {
    throw std::runtime_error("edge list: vertex id " + std::to_string(max_id_plus_one - 1) +
                             " exceeds n=" + std::to_string(n));
  }
  return SparseGraph::from_edges(n, edges);
}

inline SparseGraph load_edge_list(const std::string& path, std::optional<std::size_t> n_override = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list: " + path);
  return load_edge_list(in, n_override);
}

inline void write_edge_list(std::ostream& out, const SparseGraph& g) {
  out << "# n=" << g.n() << '\n';
  for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

}  // namespace geosbm
