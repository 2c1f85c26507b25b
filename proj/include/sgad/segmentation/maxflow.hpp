#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "sgad/error.hpp"

namespace sgad::seg {

struct FlowEdge {
  int from = 0;
  int to = 0;
  double capacity = 0;          // from -> to
  double reverse_capacity = 0;  // to -> from (0 for a plain directed edge)
};

struct FlowGraph {
  int node_count = 0;
  int source = 0;
  int sink = 1;
  std::vector<FlowEdge> edges;

  FlowGraph() = default;
  FlowGraph(int nodes, int s, int t) : node_count(nodes), source(s), sink(t) {}

  void add_edge(int u, int v, double cap) { edges.push_back({u, v, cap, 0.0}); }
  // Undirected pair stored as a single residual arc pair.
  void add_undirected(int u, int v, double cap) { edges.push_back({u, v, cap, cap}); }

  void validate() const {
    SGAD_REQUIRE(node_count >= 2, InvalidArgument, "FlowGraph: need at least two nodes");
    SGAD_REQUIRE(source != sink, InvalidArgument, "FlowGraph: source equals sink");
    SGAD_REQUIRE(source >= 0 && source < node_count && sink >= 0 && sink < node_count, InvalidArgument,
                 "FlowGraph: terminal out of range");
    for (const auto& e : edges) {
      SGAD_REQUIRE(e.from >= 0 && e.from < node_count && e.to >= 0 && e.to < node_count, InvalidArgument,
                   "FlowGraph: edge endpoint out of range");
      SGAD_REQUIRE(std::isfinite(e.capacity) && e.capacity >= 0 && std::isfinite(e.reverse_capacity) &&
                       e.reverse_capacity >= 0,
                   InvalidArgument, "FlowGraph: capacities must be finite and non-negative");
    }
  }
};

struct MinCut {
  double flow = 0;
  std::vector<bool> source_side;  // true for nodes reachable from the source in the final residual graph
};

// Dinic's blocking-flow algorithm. The source side of the returned cut is the
// residual reachability set, i.e. the minimal source set among minimum cuts.
inline MinCut max_flow_min_cut(const FlowGraph& g) {
  g.validate();
  const int n = g.node_count;
  // Residual arcs: arc 2i is edge i forward, 2i+1 its reverse.
  std::vector<int> head(n, -1), next(2 * g.edges.size()), to(2 * g.edges.size());
  std::vector<double> cap(2 * g.edges.size());
  double max_cap = 0;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const int a = static_cast<int>(2 * i), b = a + 1;
    to[a] = e.to;
    cap[a] = e.capacity;
    next[a] = head[e.from];
    head[e.from] = a;
    to[b] = e.from;
    cap[b] = e.reverse_capacity;
    next[b] = head[e.to];
    head[e.to] = b;
    max_cap = std::max({max_cap, e.capacity, e.reverse_capacity});
  }
  const double eps = max_cap * 1e-13;

  std::vector<int> level(n), cur(n), parent_arc(n);
  auto bfs = [&]() {
    std::fill(level.begin(), level.end(), -1);
    std::queue<int> q;
    level[g.source] = 0;
    q.push(g.source);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int a = head[u]; a != -1; a = next[a])
        if (cap[a] > eps && level[to[a]] < 0) {
          level[to[a]] = level[u] + 1;
          q.push(to[a]);
        }
    }
    return level[g.sink] >= 0;
  };

  double flow = 0;
  while (bfs()) {
    cur = head;
    // Iterative DFS along the level graph using current-arc pointers.
    std::vector<int> path;  // arcs from source
    int u = g.source;
    while (true) {
      if (u == g.sink) {
        double push = std::numeric_limits<double>::infinity();
        for (int a : path) push = std::min(push, cap[a]);
        flow += push;
        std::size_t retreat_to = path.size();
        for (std::size_t i = 0; i < path.size(); ++i) {
          const int a = path[i];
          cap[a] -= push;
          cap[a ^ 1] += push;
          if (cap[a] <= eps && retreat_to == path.size()) retreat_to = i;
        }
        path.resize(retreat_to);
        u = path.empty() ? g.source : to[path.back()];
        continue;
      }
      int& a = cur[u];
      while (a != -1 && !(cap[a] > eps && level[to[a]] == level[u] + 1)) a = next[a];
      if (a == -1) {
        if (u == g.source) break;
        level[u] = -1;  // dead end
        path.pop_back();
        u = path.empty() ? g.source : to[path.back()];
        continue;
      }
      path.push_back(a);
      u = to[a];
    }
  }

  MinCut out;
  out.flow = flow;
  out.source_side.assign(n, false);
  std::queue<int> q;
  out.source_side[g.source] = true;
  q.push(g.source);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int a = head[u]; a != -1; a = next[a])
      if (cap[a] > eps && !out.source_side[to[a]]) {
        out.source_side[to[a]] = true;
        q.push(to[a]);
      }
  }
  return out;
}

// Total capacity of edges leaving the source side.
inline double cut_capacity(const FlowGraph& g, const std::vector<bool>& source_side) {
  double c = 0;
  for (const auto& e : g.edges) {
    if (source_side[e.from] && !source_side[e.to]) c += e.capacity;
    if (source_side[e.to] && !source_side[e.from]) c += e.reverse_capacity;
  }
  return c;
}

}  // namespace sgad::seg
