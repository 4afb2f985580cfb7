#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "canopi/lp.hpp"

namespace canopi {

// Undirected multigraph view used by the cycle-space routines. Parallel
// edges are allowed; self-loops are not.
struct GraphEdge {
  int from = 0;
  int to = 0;
};

struct Graph {
  int num_vertices = 0;
  std::vector<GraphEdge> edges;
  int num_edges() const { return static_cast<int>(edges.size()); }
};

// Rows are cycles given as 0/1 edge-incidence vectors over GF(2).
struct UndirectedCycleBasis {
  std::vector<std::vector<std::uint8_t>> rows;
  int num_edges = 0;

  int num_cycles() const { return static_cast<int>(rows.size()); }
  int total_length() const;
  int longest_cycle() const;
};

// Signed counterpart: +1 when the traversal runs with the branch from->to.
struct DirectedCycleBasis {
  std::vector<std::vector<std::int8_t>> rows;
  int num_edges = 0;
  int num_cycles() const { return static_cast<int>(rows.size()); }
};

bool is_connected(const Graph& g);

// Spanning-tree (BFS) fundamental basis rooted at `root`; one cycle per
// non-tree edge. Throws StructuralError on a disconnected graph.
UndirectedCycleBasis fundamental_basis(const Graph& g, int root);

int gf2_rank(const std::vector<std::vector<std::uint8_t>>& rows);
inline int gf2_rank(const UndirectedCycleBasis& c) { return gf2_rank(c.rows); }

// True when the marked edge set forms one simple cycle: induced edge
// multiset connected with every touched vertex of degree exactly two.
bool is_simple_cycle(const std::vector<std::uint8_t>& edge_set, const Graph& g);

// Shortest simple cycle expressible as a GF(2) combination of basis rows
// that includes row `khat`; solved as an integer program.
std::vector<std::uint8_t> improve_cycle_ip(const UndirectedCycleBasis& c,
                                           int khat, const Graph& g,
                                           const SolverConfig& cfg = {});

// Orient one simple cycle by traversal; throws ContractViolation otherwise.
std::vector<std::int8_t> orient_cycle(const std::vector<std::uint8_t>& edge_set,
                                      const Graph& g);

// One improvement pass over every row, re-orienting as it goes. The
// returned basis minimizes total cardinality; rank is re-checked after
// every exchange.
std::pair<UndirectedCycleBasis, DirectedCycleBasis> minimal_cycle_basis(
    const UndirectedCycleBasis& c0, const Graph& g, const SolverConfig& cfg = {});

}  // namespace canopi
