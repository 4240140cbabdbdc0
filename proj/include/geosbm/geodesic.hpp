#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "geosbm/graph.hpp"
#include "geosbm/labeling.hpp"
#include "geosbm/parallel.hpp"

namespace geosbm {

/// ceil(cap_factor * ln n), at least 1.
inline std::uint32_t distance_cap(std::size_t n, double cap_factor) {
  if (!(cap_factor > 0.0)) throw std::invalid_argument("cap_factor must be positive");
  const double c = std::ceil(cap_factor * std::log(static_cast<double>(std::max<std::size_t>(n, 1))));
  return static_cast<std::uint32_t>(std::max(1.0, std::min(c, 4.0e9)));
}

/// Dense symmetric matrix of capped geodesic distances. Pairs farther apart
/// than `cap`, or disconnected, hold `sentinel` = n + 1. Entries are 16-bit
/// when the sentinel fits below 2^15, 32-bit otherwise.
class DistanceMatrix {
 public:
  using Narrow = std::vector<std::uint16_t>;
  using Wide = std::vector<std::uint32_t>;

  DistanceMatrix() = default;

  DistanceMatrix(std::size_t n, std::uint32_t cap)
      : n_(n), cap_(cap), sentinel_(static_cast<std::uint32_t>(n + 1)) {
    if (uses_narrow(n)) {
      entries_ = Narrow(n * n, static_cast<std::uint16_t>(sentinel_));
    } else {
      entries_ = Wide(n * n, sentinel_);
    }
  }

  static bool uses_narrow(std::size_t n) { return n + 1 < (1u << 15); }

  std::size_t size() const { return n_; }
  std::uint32_t cap() const { return cap_; }
  std::uint32_t sentinel() const { return sentinel_; }
  bool is_narrow() const { return std::holds_alternative<Narrow>(entries_); }
  std::size_t entry_bytes() const { return is_narrow() ? 2 : 4; }

  std::uint32_t operator()(std::size_t i, std::size_t j) const {
    return std::visit([&](const auto& e) { return static_cast<std::uint32_t>(e[i * n_ + j]); },
                      entries_);
  }

  bool finite(std::size_t i, std::size_t j) const { return (*this)(i, j) != sentinel_; }

  /// Calls f(entries) with the typed row-major storage.
  template <typename F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), entries_);
  }
  template <typename F>
  decltype(auto) visit_mut(F&& f) {
    return std::visit(std::forward<F>(f), entries_);
  }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::uint32_t cap_ = 0;
  std::uint32_t sentinel_ = 1;
  std::variant<Narrow, Wide> entries_;
};

/// Single-source BFS truncated at depth `cap`. `row` must have g.n() entries;
/// unreached vertices receive `sentinel`. `queue` is scratch space.
template <typename T>
void bfs_row(const SparseGraph& g, Vertex source, std::uint32_t cap, std::uint32_t sentinel,
             std::span<T> row, std::vector<Vertex>& queue) {
  std::fill(row.begin(), row.end(), static_cast<T>(sentinel));
  queue.clear();
  queue.push_back(source);
  row[source] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Vertex u = queue[head];
    const std::uint32_t next = static_cast<std::uint32_t>(row[u]) + 1;
    if (next > cap) break;  // BFS order: every later vertex is at least as deep
    for (auto w : g.neighbors(u)) {
      if (row[w] == static_cast<T>(sentinel)) {
        row[w] = static_cast<T>(next);
        queue.push_back(w);
      }
    }
  }
}

/// All-pairs capped geodesic distances by one BFS per source.
inline DistanceMatrix apsp(const SparseGraph& g, double cap_factor = 3.0,
                           std::size_t threads = 1) {
  if (g.n() == 0) throw std::invalid_argument("apsp: empty graph");
  const std::size_t n = g.n();
  DistanceMatrix d(n, distance_cap(n, cap_factor));
  const std::uint32_t cap = d.cap();
  const std::uint32_t sentinel = d.sentinel();
  d.visit_mut([&](auto& entries) {
    using T = typename std::decay_t<decltype(entries)>::value_type;
    const std::size_t workers = std::min(threads, n);
    std::vector<std::vector<Vertex>> queues(std::max<std::size_t>(workers, 1));
    // one queue per contiguous source block
    const std::size_t chunk = (n + queues.size() - 1) / queues.size();
    parallel_for(queues.size(), queues.size(), [&](std::size_t w) {
      auto& queue = queues[w];
      queue.reserve(n);
      const std::size_t end = std::min(n, (w + 1) * chunk);
      for (std::size_t s = w * chunk; s < end; ++s) {
        bfs_row<T>(g, static_cast<Vertex>(s), cap, sentinel,
                   std::span<T>(entries.data() + s * n, n), queue);
      }
    });
  });
  return d;
}

/// Streams capped BFS rows without storing the matrix: fn(source, row) with
/// row a span of uint32 distances. Sources are visited in ascending order.
template <typename Fn>
void for_each_distance_row(const SparseGraph& g, std::uint32_t cap, Fn&& fn) {
  const std::size_t n = g.n();
  const auto sentinel = static_cast<std::uint32_t>(n + 1);
  std::vector<std::uint32_t> row(n);
  std::vector<Vertex> queue;
  queue.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    bfs_row<std::uint32_t>(g, static_cast<Vertex>(s), cap, sentinel, std::span(row), queue);
    fn(s, std::span<const std::uint32_t>(row));
  }
}

struct PairStats {
  double mean = 0.0;
  double variance = 0.0;  // population variance
  std::uint64_t count = 0;
};

/// Exact integer accumulator for finite distances of one block pair.
struct PairAccumulator {
  std::uint64_t count = 0;
  std::uint64_t sum = 0;
  std::uint64_t sum_sq = 0;

  void add(std::uint64_t d) {
    ++count;
    sum += d;
    sum_sq += d * d;
  }
  void merge(const PairAccumulator& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  PairStats stats() const {
    if (count == 0) return {};
    const double c = static_cast<double>(count);
    const double mean = static_cast<double>(sum) / c;
    const double var = std::max(0.0, static_cast<double>(sum_sq) / c - mean * mean);
    return {mean, var, count};
  }
};

/// Exact accumulators of finite entries over i < j, indexed a * K + b with
/// a <= b (0-based blocks).
inline std::vector<PairAccumulator> block_accumulators(const DistanceMatrix& d, const Labeling& labels) {
  if (labels.size() != d.size()) {
    throw std::invalid_argument("distance_stats: labels have " + std::to_string(labels.size()) +
                                " entries, matrix has dimension " + std::to_string(d.size()));
  }
  const std::size_t k = labels.k();
  const std::size_t n = d.size();
  std::vector<PairAccumulator> acc(k * k);
  d.visit([&](const auto& e) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = labels[i] - 1;
      for (std::size_t j = i + 1; j < n; ++j) {
        const std::uint32_t v = e[i * n + j];
        if (v == d.sentinel()) continue;
        const std::size_t b = labels[j] - 1;
        acc[std::min(a, b) * k + std::max(a, b)].add(v);
      }
    }
  });
  return acc;
}

/// Per unordered block pair {a, b} statistics of finite entries over i < j.
/// Index [a-1][b-1] and [b-1][a-1] hold the same value.
inline std::vector<std::vector<PairStats>> distance_stats(const DistanceMatrix& d, const Labeling& labels) {
  const std::size_t k = labels.k();
  const auto acc = block_accumulators(d, labels);
  std::vector<std::vector<PairStats>> out(k, std::vector<PairStats>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      out[a][b] = out[b][a] = acc[a * k + b].stats();
    }
  }
  return out;
}

// Binary layout: n, cap, sentinel as little-endian uint64, then n*n row-major
// little-endian entries of 2 bytes (n + 1 < 2^15) or 4 bytes.

namespace detail {
inline void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, bytes);
}
inline std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char buf[8] = {};
  in.read(reinterpret_cast<char*>(buf), bytes);
  if (!in) throw std::runtime_error("distance matrix: truncated binary input");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}
}  // namespace detail

inline void write_binary(std::ostream& out, const DistanceMatrix& d) {
  detail::put_le(out, d.size(), 8);
  detail::put_le(out, d.cap(), 8);
  detail::put_le(out, d.sentinel(), 8);
  const int width = static_cast<int>(d.entry_bytes());
  d.visit([&](const auto& e) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(e.data()),
                static_cast<std::streamsize>(e.size() * sizeof(e[0])));
    } else {
      for (auto v : e) detail::put_le(out, v, width);
    }
  });
}

inline DistanceMatrix read_binary(std::istream& in) {
  const std::uint64_t n = detail::get_le(in, 8);
  const std::uint64_t cap = detail::get_le(in, 8);
  const std::uint64_t sentinel = detail::get_le(in, 8);
  if (sentinel != n + 1) throw std::runtime_error("distance matrix: sentinel must be n+1");
  DistanceMatrix d(static_cast<std::size_t>(n), static_cast<std::uint32_t>(cap));
  const int width = static_cast<int>(d.entry_bytes());
  d.visit_mut([&](auto& e) {
    using T = typename std::decay_t<decltype(e)>::value_type;
    for (auto& v : e) v = static_cast<T>(detail::get_le(in, width));
  });
  return d;
}

inline void write_csv(std::ostream& out, const DistanceMatrix& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j) out << ',';
      out << d(i, j);
    }
    out << '\n';
  }
}

}  // namespace geosbm
