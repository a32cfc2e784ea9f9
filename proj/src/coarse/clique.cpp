#include "regkit/coarse/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regkit {

namespace {

using Adjacency = std::vector<std::vector<char>>;

// Core number of every vertex (repeated minimum-degree peeling).
std::vector<std::size_t> core_numbers(const Adjacency& adj) {
  const std::size_t n = adj.size();
  std::vector<std::size_t> degree(n, 0), core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    degree[i] = static_cast<std::size_t>(std::count(adj[i].begin(), adj[i].end(), 1));
  }
  std::vector<char> removed(n, 0);
  std::size_t k = 0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t v = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!removed[i] && (v == n || degree[i] < degree[v])) v = i;
    }
    k = std::max(k, degree[v]);
    core[v] = k;
    removed[v] = 1;
    for (std::size_t u = 0; u < n; ++u) {
      if (!removed[u] && adj[v][u]) --degree[u];
    }
  }
  return core;
}

bool adjacent_to_all(const Adjacency& adj, std::size_t u, const std::vector<std::size_t>& clique, std::size_t skip) {
  for (std::size_t c : clique) {
    if (c != skip && !adj[u][c]) return false;
  }
  return true;
}

// Grows the clique by single additions and (1,2)-swaps until neither applies.
void augment(const Adjacency& adj, std::vector<std::size_t>& clique) {
  const std::size_t n = adj.size();
  std::vector<char> in(n, 0);
  for (std::size_t c : clique) in[c] = 1;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t u = 0; u < n && !improved; ++u) {
      if (!in[u] && adjacent_to_all(adj, u, clique, n)) {
        clique.push_back(u);
        in[u] = 1;
        improved = true;
      }
    }
    for (std::size_t pos = 0; pos < clique.size() && !improved; ++pos) {
      const std::size_t out = clique[pos];
      std::vector<std::size_t> free;
      for (std::size_t u = 0; u < n; ++u) {
        if (!in[u] && adjacent_to_all(adj, u, clique, out)) free.push_back(u);
      }
      for (std::size_t a = 0; a < free.size() && !improved; ++a) {
        for (std::size_t b = a + 1; b < free.size(); ++b) {
          if (adj[free[a]][free[b]]) {
            in[out] = 0;
            clique[pos] = free[a];
            clique.push_back(free[b]);
            in[free[a]] = in[free[b]] = 1;
            improved = true;
            break;
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<std::size_t> max_clique_heuristic(const Adjacency& adj) {
  const std::size_t n = adj.size();
  if (n == 0) return {};
  const auto core = core_numbers(adj);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return core[l] > core[r]; });

  std::vector<std::size_t> best{order.front()};
  for (std::size_t v : order) {
    if (core[v] + 1 <= best.size()) break;  // cores only decrease along the order
    std::vector<std::size_t> clique{v};
    std::vector<std::size_t> cand;
    for (std::size_t u = 0; u < n; ++u) {
      if (adj[v][u] && core[u] >= best.size()) cand.push_back(u);
    }
    while (!cand.empty()) {
      // Pick the candidate with the most neighbours among the candidates.
      std::size_t pick = cand.front();
      std::size_t pick_deg = 0;
      bool first = true;
      for (std::size_t u : cand) {
        std::size_t d = 0;
        for (std::size_t x : cand) d += adj[u][x] ? 1 : 0;
        if (first || d > pick_deg) {
          pick = u;
          pick_deg = d;
          first = false;
        }
      }
      clique.push_back(pick);
      std::vector<std::size_t> next;
      for (std::size_t u : cand) {
        if (u != pick && adj[pick][u]) next.push_back(u);
      }
      cand = std::move(next);
    }
    if (clique.size() > best.size()) best = std::move(clique);
  }
  augment(adj, best);
  std::sort(best.begin(), best.end());
  return best;
}

CliqueResult prune_max_clique(const TimSet& tims, double kappa, double c2) {
  const std::size_t n = tims.vertex_count;
  Adjacency adj(n, std::vector<char>(n, 0));
  const double c = std::sqrt(c2);
  for (std::size_t e = 0; e < tims.size(); ++e) {
    const double gap = std::fabs(tims.delta_q[e].norm() - kappa * tims.delta_p[e].norm());
    if (gap <= c * tims.rotation_bounds[e]) {
      const auto [i, k] = tims.edges[e];
      adj[i][k] = adj[k][i] = 1;
    }
  }
  CliqueResult out;
  out.vertices = max_clique_heuristic(adj);
  if (out.vertices.size() <= 1) {
    out.singleton = true;
    out.tims.vertex_count = n;
    return out;
  }
  std::vector<char> in(n, 0);
  for (std::size_t v : out.vertices) in[v] = 1;
  for (std::size_t e = 0; e < tims.size(); ++e) {
    if (in[tims.edges[e].first] && in[tims.edges[e].second]) out.edge_ids.push_back(e);
  }
  out.tims = tims.subset(out.edge_ids);
  return out;
}

}  // namespace regkit
