#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geosbm {

/// Block assignment c = (c_1, ..., c_n) with entries in [1..K].
class Labeling {
 public:
  Labeling() = default;

  Labeling(std::vector<std::uint32_t> labels, std::uint32_t k)
      : labels_(std::move(labels)), k_(k) {
    if (k_ < 1) throw std::invalid_argument("Labeling: K must be >= 1");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] < 1 || labels_[i] > k_) {
        throw std::invalid_argument("Labeling: entry " + std::to_string(i) + " = " +
                                    std::to_string(labels_[i]) + " outside [1.." +
                                    std::to_string(k_) + "]");
      }
    }
  }

  std::size_t size() const { return labels_.size(); }
  std::uint32_t k() const { return k_; }
  std::uint32_t operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<std::uint32_t>& values() const { return labels_; }

  /// n_a for a = 1..K (index 0 holds block 1).
  std::vector<std::size_t> block_counts() const {
    std::vector<std::size_t> counts(k_, 0);
    for (auto c : labels_) ++counts[c - 1];
    return counts;
  }

  /// Restriction to the given vertex ids, in order.
  Labeling restrict_to(const std::vector<std::uint32_t>& vertices) const {
    std::vector<std::uint32_t> out;
    out.reserve(vertices.size());
    for (auto v : vertices) out.push_back(labels_.at(v));
    return Labeling(std::move(out), k_);
  }

  friend bool operator==(const Labeling&, const Labeling&) = default;

 private:
  std::vector<std::uint32_t> labels_;
  std::uint32_t k_ = 1;
};

inline void write_labels(std::ostream& out, const Labeling& labels) {
  for (auto c : labels.values()) out << c << '\n';
}

/// Reads one integer label per line. K defaults to the maximum label seen.
inline Labeling read_labels(std::istream& in, std::uint32_t k = 0) {
  std::vector<std::uint32_t> values;
  std::string line;
  std::size_t line_no = 0;
  std::uint32_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    long long v = 0;
    if (!(ss >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::runtime_error("labels: malformed line " + std::to_string(line_no));
    }
    std::string rest;
    if (ss >> rest || v < 1 || v > 0xFFFFFFFFLL) {
      throw std::runtime_error("labels: malformed line " + std::to_string(line_no));
    }
    values.push_back(static_cast<std::uint32_t>(v));
    max_label = std::max(max_label, static_cast<std::uint32_t>(v));
  }
  return Labeling(std::move(values), k == 0 ? std::max<std::uint32_t>(max_label, 1) : k);
}

inline Labeling read_labels(const std::string& path, std::uint32_t k = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file: " + path);
  return read_labels(in, k);
}

}  // namespace geosbm
