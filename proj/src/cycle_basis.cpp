#include "canopi/cycle_basis.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "canopi/errors.hpp"

namespace canopi {

int UndirectedCycleBasis::total_length() const {
  int t = 0;
  for (const auto& r : rows)
    for (auto v : r) t += v;
  return t;
}

int UndirectedCycleBasis::longest_cycle() const {
  int best = 0;
  for (const auto& r : rows) {
    int len = 0;
    for (auto v : r) len += v;
    best = std::max(best, len);
  }
  return best;
}

namespace {

std::vector<std::vector<std::pair<int, int>>> adjacency(const Graph& g) {
  std::vector<std::vector<std::pair<int, int>>> adj(g.num_vertices);
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges[e];
    adj[ed.from].push_back({ed.to, e});
    adj[ed.to].push_back({ed.from, e});
  }
  return adj;
}

}  // namespace

bool is_connected(const Graph& g) {
  if (g.num_vertices == 0) return true;
  auto adj = adjacency(g);
  std::vector<char> seen(g.num_vertices, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (auto [w, e] : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        q.push(w);
      }
  }
  return count == g.num_vertices;
}

UndirectedCycleBasis fundamental_basis(const Graph& g, int root) {
  if (root < 0 || root >= g.num_vertices)
    throw ContractViolation("fundamental_basis: root out of range");
  if (!is_connected(g))
    throw StructuralError("fundamental_basis: graph is disconnected");

  auto adj = adjacency(g);
  std::vector<int> parent_edge(g.num_vertices, -1);
  std::vector<int> parent(g.num_vertices, -1);
  std::vector<int> depth(g.num_vertices, -1);
  std::vector<char> in_tree(g.num_edges(), 0);

  std::queue<int> q;
  q.push(root);
  depth[root] = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (auto [w, e] : adj[v]) {
      if (depth[w] >= 0) continue;
      depth[w] = depth[v] + 1;
      parent[w] = v;
      parent_edge[w] = e;
      in_tree[e] = 1;
      q.push(w);
    }
  }

  UndirectedCycleBasis basis;
  basis.num_edges = g.num_edges();
  for (int e = 0; e < g.num_edges(); ++e) {
    if (in_tree[e]) continue;
    std::vector<std::uint8_t> row(g.num_edges(), 0);
    row[e] = 1;
    int u = g.edges[e].from, v = g.edges[e].to;
    while (u != v) {
      if (depth[u] >= depth[v]) {
        row[parent_edge[u]] ^= 1;
        u = parent[u];
      } else {
        row[parent_edge[v]] ^= 1;
        v = parent[v];
      }
    }
    basis.rows.push_back(std::move(row));
  }
  return basis;
}

int gf2_rank(const std::vector<std::vector<std::uint8_t>>& rows) {
  if (rows.empty()) return 0;
  std::vector<std::vector<std::uint8_t>> m = rows;
  const int ncols = static_cast<int>(m[0].size());
  int rank = 0;
  for (int col = 0; col < ncols && rank < static_cast<int>(m.size()); ++col) {
    int pivot = -1;
    for (int r = rank; r < static_cast<int>(m.size()); ++r)
      if (m[r][col]) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    std::swap(m[rank], m[pivot]);
    for (int r = 0; r < static_cast<int>(m.size()); ++r) {
      if (r != rank && m[r][col])
        for (int c2 = col; c2 < ncols; ++c2) m[r][c2] ^= m[rank][c2];
    }
    ++rank;
  }
  return rank;
}

bool is_simple_cycle(const std::vector<std::uint8_t>& edge_set, const Graph& g) {
  std::vector<int> degree(g.num_vertices, 0);
  int edge_count = 0;
  for (int e = 0; e < g.num_edges(); ++e) {
    if (!edge_set[e]) continue;
    ++edge_count;
    ++degree[g.edges[e].from];
    ++degree[g.edges[e].to];
  }
  if (edge_count == 0) return false;
  int touched = 0;
  for (int v = 0; v < g.num_vertices; ++v) {
    if (degree[v] == 0) continue;
    if (degree[v] != 2) return false;
    ++touched;
  }
  if (touched != edge_count) return false;

  // connectivity over the selected edges
  auto adj = adjacency(g);
  int start = -1;
  for (int v = 0; v < g.num_vertices && start < 0; ++v)
    if (degree[v] > 0) start = v;
  std::vector<char> seen(g.num_vertices, 0);
  std::queue<int> q;
  q.push(start);
  seen[start] = 1;
  int reached = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (auto [w, e] : adj[v]) {
      if (!edge_set[e] || seen[w]) continue;
      seen[w] = 1;
      ++reached;
      q.push(w);
    }
  }
  return reached == touched;
}

std::vector<std::uint8_t> improve_cycle_ip(const UndirectedCycleBasis& c,
                                           int khat, const Graph& g,
                                           const SolverConfig& cfg) {
  const int nc = c.num_cycles();
  const int b = c.num_edges;
  if (khat < 0 || khat >= nc)
    throw ContractViolation("improve_cycle_ip: row index out of range");

  LinearProgram ip;
  // w_k: combination selector, w_khat pinned to 1
  std::vector<int> w(nc), u(b), v(b);
  for (int k = 0; k < nc; ++k)
    w[k] = ip.add_var(k == khat ? 1.0 : 0.0, 1.0, 0.0, true);
  // the mod-2 sum of nc cycles never needs more than ceil(nc/2) per edge
  const double ubound = std::ceil(nc / 2.0);
  for (int j = 0; j < b; ++j) u[j] = ip.add_var(0.0, ubound, 0.0, true);
  for (int j = 0; j < b; ++j) v[j] = ip.add_var(0.0, 1.0, 1.0, true);

  for (int j = 0; j < b; ++j) {
    std::vector<std::pair<int, double>> terms;
    for (int k = 0; k < nc; ++k)
      if (c.rows[k][j]) terms.push_back({w[k], 1.0});
    terms.push_back({u[j], -2.0});
    terms.push_back({v[j], -1.0});
    ip.add_row(LinearProgram::Sense::eq, 0.0, std::move(terms));
  }

  LpSolution sol = solve_ip(ip, cfg);
  if (!sol.optimal())
    throw SolverError("improve_cycle_ip: IP solve returned " +
                      to_string(sol.status) +
                      (sol.message.empty() ? "" : ": " + sol.message));

  std::vector<std::uint8_t> out(b, 0);
  for (int j = 0; j < b; ++j) out[j] = sol.x[v[j]] > 0.5 ? 1 : 0;
  if (!is_simple_cycle(out, g))
    throw SolverError("improve_cycle_ip: optimal v* is not a simple cycle");
  return out;
}

std::vector<std::int8_t> orient_cycle(const std::vector<std::uint8_t>& edge_set,
                                      const Graph& g) {
  if (!is_simple_cycle(edge_set, g))
    throw ContractViolation("orient_cycle: edge set is not one simple cycle");

  std::vector<std::vector<std::pair<int, int>>> adj(g.num_vertices);
  int start = g.num_vertices;
  for (int e = 0; e < g.num_edges(); ++e) {
    if (!edge_set[e]) continue;
    adj[g.edges[e].from].push_back({g.edges[e].to, e});
    adj[g.edges[e].to].push_back({g.edges[e].from, e});
    start = std::min({start, g.edges[e].from, g.edges[e].to});
  }

  std::vector<std::int8_t> row(g.num_edges(), 0);
  int at = start;
  int via = -1;
  do {
    auto& inc = adj[at];
    int next = -1, edge = -1;
    for (auto [wv, we] : inc)
      if (we != via) {
        next = wv;
        edge = we;
        break;
      }
    row[edge] = (g.edges[edge].from == at) ? 1 : -1;
    via = edge;
    at = next;
  } while (at != start);
  return row;
}

std::pair<UndirectedCycleBasis, DirectedCycleBasis> minimal_cycle_basis(
    const UndirectedCycleBasis& c0, const Graph& g, const SolverConfig& cfg) {
  UndirectedCycleBasis c = c0;
  const int nc = c.num_cycles();
  if (gf2_rank(c) != nc)
    throw ContractViolation("minimal_cycle_basis: input rows are dependent");

  DirectedCycleBasis d;
  d.num_edges = c.num_edges;
  d.rows.assign(nc, std::vector<std::int8_t>(c.num_edges, 0));

  for (int khat = 0; khat < nc; ++khat) {
    c.rows[khat] = improve_cycle_ip(c, khat, g, cfg);
    if (gf2_rank(c) != nc)
      throw SolverError("minimal_cycle_basis: rank lost after exchanging row " +
                        std::to_string(khat));
    d.rows[khat] = orient_cycle(c.rows[khat], g);
  }
  return {std::move(c), std::move(d)};
}

}  // namespace canopi
