#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace ordst {

/// One areal unit of the regular grid. site_id is 1-based and contiguous.
struct GridCell {
  int site_id = 0;
  int row = 0;
  int col = 0;
};

/// Undirected, unweighted adjacency over sites indexed 0..I-1
/// (index = site_id - 1). Immutable once built; every site has at least one
/// neighbour.
class LatticeGraph {
 public:
  /// Validates symmetry, absence of self-loops and isolated sites.
  explicit LatticeGraph(std::vector<std::vector<std::size_t>> neighbors);

  /// Queen adjacency: cells touching by an edge or a corner are neighbours.
  static LatticeGraph queen(std::span<const GridCell> cells);

  std::size_t size() const noexcept { return neighbors_.size(); }
  std::span<const std::size_t> neighbors(std::size_t i) const { return neighbors_.at(i); }
  std::size_t degree(std::size_t i) const { return neighbors_.at(i).size(); }

  /// Unordered neighbour pairs (i < j), each listed once.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }

  bool operator==(const LatticeGraph& other) const { return neighbors_ == other.neighbors_; }

 private:
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

struct NormalMoments {
  double mean = 0.0;
  double var = 1.0;
};

/// ICAR full conditional of values[i]: N(neighbour mean, variance / degree).
NormalMoments icar_conditional(std::span<const double> values, std::size_t i, double variance,
                               const LatticeGraph& graph);

/// Sum over unordered neighbour pairs of (v_i - v_j)^2, i.e. v'(D - A)v.
double icar_pairwise_sum(std::span<const double> values, const LatticeGraph& graph);

/// log of exp(-v'(D - A)v / (2 variance)); the improper normaliser is dropped.
double icar_log_density_unnormalized(std::span<const double> values, double variance,
                                     const LatticeGraph& graph);

}  // namespace ordst
