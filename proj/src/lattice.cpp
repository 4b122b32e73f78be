#include "ordst/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "ordst/error.hpp"

namespace ordst {

LatticeGraph::LatticeGraph(std::vector<std::vector<std::size_t>> neighbors)
    : neighbors_(std::move(neighbors)) {
  const std::size_t n = neighbors_.size();
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = neighbors_[i];
    if (nb.empty())
      throw Error("E_ISOLATED_SITE", "site " + std::to_string(i + 1) + " has no neighbours");
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
      throw Error("E_GRAPH", "duplicate neighbour entry for site " + std::to_string(i + 1));
    for (std::size_t j : nb) {
      if (j >= n) throw Error("E_GRAPH", "neighbour index out of range at site " + std::to_string(i + 1));
      if (j == i) throw Error("E_GRAPH", "self-loop at site " + std::to_string(i + 1));
      if (!std::binary_search(neighbors_[j].begin(), neighbors_[j].end(), i))
        throw Error("E_GRAPH", "asymmetric adjacency between sites " + std::to_string(i + 1) +
                                   " and " + std::to_string(j + 1));
      if (i < j) edges_.emplace_back(i, j);
    }
  }
}

LatticeGraph LatticeGraph::queen(std::span<const GridCell> cells) {
  const std::size_t n = cells.size();
  if (n < 2) throw Error("E_GRID", "a lattice needs at least 2 sites");

  std::vector<bool> seen(n, false);
  std::map<std::pair<int, int>, std::size_t> by_cell;
  for (const auto& c : cells) {
    if (c.site_id < 1 || static_cast<std::size_t>(c.site_id) > n || seen[c.site_id - 1])
      throw Error("E_GRID", "site ids must be unique and contiguous 1.." + std::to_string(n) +
                                " (offending id " + std::to_string(c.site_id) + ")");
    seen[c.site_id - 1] = true;
    auto [it, inserted] = by_cell.emplace(std::make_pair(c.row, c.col), c.site_id - 1);
    if (!inserted)
      throw Error("E_DUPLICATE_CELL", "cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                                          ") assigned to sites " + std::to_string(it->second + 1) +
                                          " and " + std::to_string(c.site_id));
  }

  std::vector<std::vector<std::size_t>> nb(n);
  for (const auto& c : cells) {
    const std::size_t i = c.site_id - 1;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        auto it = by_cell.find({c.row + dr, c.col + dc});
        if (it != by_cell.end()) nb[i].push_back(it->second);
      }
    if (nb[i].empty())
      throw Error("E_ISOLATED_SITE", "site " + std::to_string(c.site_id) + " at (" + std::to_string(c.row) +
                                         ", " + std::to_string(c.col) + ") has no queen neighbours");
  }
  return LatticeGraph(std::move(nb));
}

NormalMoments icar_conditional(std::span<const double> values, std::size_t i, double variance,
                               const LatticeGraph& graph) {
  if (!(variance > 0.0)) throw Error("E_DOMAIN", "ICAR variance must be positive");
  const auto nb = graph.neighbors(i);
  double sum = 0.0;
  for (std::size_t j : nb) sum += values[j];
  const double deg = static_cast<double>(nb.size());
  return {sum / deg, variance / deg};
}

double icar_pairwise_sum(std::span<const double> values, const LatticeGraph& graph) {
  double ss = 0.0;
  for (const auto& [i, j] : graph.edges()) {
    const double d = values[i] - values[j];
    ss += d * d;
  }
  return ss;
}

double icar_log_density_unnormalized(std::span<const double> values, double variance,
                                     const LatticeGraph& graph) {
  if (!(variance > 0.0)) throw Error("E_DOMAIN", "ICAR variance must be positive");
  return -icar_pairwise_sum(values, graph) / (2.0 * variance);
}

}  // namespace ordst
