/**
 * @file oracles.hpp
 * @brief Exact combinatorial oracles: nominal solve x*(c), k-best decisions
 * and the budget-robust counterpart, over grid shortest path, dense TSP and
 * one-of-n selection instances.
 *
 * Variable orderings
 *   grid VxH : all horizontal edges (r,c)->(r,c+1) row-major, then all
 *              vertical edges (r,c)->(r+1,c) row-major. n = V(H-1) + H(V-1).
 *   tsp N    : node pairs (i,j), i<j, lexicographic. n = N(N-1)/2.
 *   select N : one variable per alternative, exactly one chosen.
 *
 * Ties between decisions of equal cost are broken canonically: at the first
 * variable index where two decisions differ, the one using that variable
 * wins (see canonical_less).
 */
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dfl/core.hpp"

namespace dfl {

enum class ProblemKind { Grid, Tsp, Select };

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Structural description of the feasible set X with a fixed variable order.
class ProblemInstance {
 public:
  static constexpr std::size_t kMaxTspSolveNodes = 16;
  static constexpr std::size_t kMaxTspTopKNodes = 10;

  static ProblemInstance grid(std::size_t rows, std::size_t cols) {
    if (rows < 1 || cols < 1 || rows * cols < 2) {
      throw std::invalid_argument("grid needs at least two nodes");
    }
    ProblemInstance p;
    p.kind_ = ProblemKind::Grid;
    p.rows_ = rows;
    p.cols_ = cols;
    p.n_ = rows * (cols - 1) + cols * (rows - 1);
    return p;
  }

  static ProblemInstance tsp(std::vector<Point2> coords) {
    if (coords.size() < 3) throw std::invalid_argument("tsp needs at least 3 nodes");
    ProblemInstance p;
    p.kind_ = ProblemKind::Tsp;
    p.nodes_ = coords.size();
    p.coords_ = std::move(coords);
    p.n_ = p.nodes_ * (p.nodes_ - 1) / 2;
    return p;
  }

  /// TSP on N nodes with all coordinates at the origin (structure only).
  static ProblemInstance tsp(std::size_t nodes) { return tsp(std::vector<Point2>(nodes)); }

  static ProblemInstance select(std::size_t alternatives) {
    if (alternatives < 1) throw std::invalid_argument("select needs at least one alternative");
    ProblemInstance p;
    p.kind_ = ProblemKind::Select;
    p.n_ = alternatives;
    return p;
  }

  /// Parses "grid:VxH", "tsp:N[,coords=x y;x y;...]" or "select:N".
  static ProblemInstance parse(std::string_view desc) {
    auto fail = [&desc]() -> ProblemInstance {
      throw std::invalid_argument("bad instance descriptor '" + std::string(desc) + "'");
    };
    auto to_size = [&](std::string_view s) -> std::size_t {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) fail();
      return v;
    };
    const auto colon = desc.find(':');
    if (colon == std::string_view::npos) return fail();
    const auto head = desc.substr(0, colon);
    const auto body = desc.substr(colon + 1);
    if (head == "grid") {
      const auto x = body.find('x');
      if (x == std::string_view::npos) return fail();
      return grid(to_size(body.substr(0, x)), to_size(body.substr(x + 1)));
    }
    if (head == "select") return select(to_size(body));
    if (head == "tsp") {
      const auto comma = body.find(',');
      const std::size_t nodes = to_size(body.substr(0, comma));
      if (comma == std::string_view::npos) return tsp(nodes);
      auto rest = body.substr(comma + 1);
      constexpr std::string_view kCoords = "coords=";
      if (rest.substr(0, kCoords.size()) != kCoords) return fail();
      rest.remove_prefix(kCoords.size());
      std::vector<Point2> pts;
      while (!rest.empty()) {
        const auto semi = rest.find(';');
        const auto item = rest.substr(0, semi);
        const auto space = item.find(' ');
        if (space == std::string_view::npos) return fail();
        pts.push_back({parse_double(item.substr(0, space)), parse_double(item.substr(space + 1))});
        if (semi == std::string_view::npos) break;
        rest.remove_prefix(semi + 1);
      }
      if (pts.size() != nodes) return fail();
      return tsp(std::move(pts));
    }
    return fail();
  }

  /// Inverse of parse. TSP coordinates are written with 6 decimals.
  std::string descriptor() const {
    switch (kind_) {
      case ProblemKind::Grid:
        return "grid:" + std::to_string(rows_) + "x" + std::to_string(cols_);
      case ProblemKind::Select:
        return "select:" + std::to_string(n_);
      case ProblemKind::Tsp: {
        std::string s = "tsp:" + std::to_string(nodes_) + ",coords=";
        char buf[64];
        for (std::size_t i = 0; i < coords_.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%.6f %.6f", coords_[i].x, coords_[i].y);
          if (i) s += ';';
          s += buf;
        }
        return s;
      }
    }
    return {};
  }

  std::string kind_name() const {
    switch (kind_) {
      case ProblemKind::Grid: return "grid";
      case ProblemKind::Tsp: return "tsp";
      case ProblemKind::Select: return "select";
    }
    return {};
  }

  ProblemKind kind() const { return kind_; }
  std::size_t n() const { return n_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nodes() const { return nodes_; }
  const std::vector<Point2>& coords() const { return coords_; }

  // grid helpers
  std::size_t horizontal_edge(std::size_t r, std::size_t c) const { return r * (cols_ - 1) + c; }
  std::size_t vertical_edge(std::size_t r, std::size_t c) const {
    return rows_ * (cols_ - 1) + r * cols_ + c;
  }

  // tsp helper: index of pair (i,j), i != j
  std::size_t tsp_edge(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * nodes_ - i * (i + 1) / 2 + (j - i - 1);
  }

  friend bool operator==(const ProblemInstance& a, const ProblemInstance& b) {
    return a.descriptor() == b.descriptor();
  }

 private:
  ProblemInstance() = default;

  ProblemKind kind_ = ProblemKind::Select;
  std::size_t n_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t nodes_ = 0;
  std::vector<Point2> coords_;
};

/// Box + budget uncertainty set {c∘(1+ζ) : ‖ζ‖∞ ≤ rho, ‖ζ‖₁ ≤ gamma}.
struct UncertaintyParams {
  double rho = 0.5;
  double gamma = 0.0;

  void validate() const {
    if (!(rho >= 0.0) || !(gamma >= 0.0) || !std::isfinite(rho) || !std::isfinite(gamma)) {
      throw std::invalid_argument("uncertainty parameters must be finite and >= 0");
    }
  }
};

/// Counts nominal solves. Thread-safe; copies take a snapshot.
class OracleAudit {
 public:
  OracleAudit() = default;
  OracleAudit(const OracleAudit& o) : count_(o.count()) {}
  OracleAudit& operator=(const OracleAudit& o) {
    count_.store(o.count());
    return *this;
  }

  std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
  void add(std::uint64_t k = 1) { count_.fetch_add(k, std::memory_order_relaxed); }
  void reset() { count_.store(0); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

/// Canonical order on decisions: at the first differing index, the decision
/// with a 1 comes first.
inline bool canonical_less(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const std::size_t len = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < len; ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return a.size() < b.size();
}

/// (cost, canonical) ordering used for every ranking of decisions.
inline bool ranks_before(double cost_a, std::span<const std::uint8_t> a, double cost_b,
                         std::span<const std::uint8_t> b) {
  if (cost_a != cost_b) return cost_a < cost_b;
  return canonical_less(a, b);
}

namespace detail {

inline void check_costs(const ProblemInstance& inst, std::span<const double> c) {
  require_same_size(c.size(), inst.n(), "cost vector");
  if (!all_finite(c)) throw std::invalid_argument("cost vector has non-finite entries");
}

// -------------------------- grid -------------------------------------------

enum class EdgeState : std::uint8_t { Free = 0, Forced = 1, Excluded = 2 };

struct GridNode {
  std::size_t r = 0;
  std::size_t c = 0;
};

inline GridNode edge_tail(const ProblemInstance& g, std::size_t e) {
  const std::size_t nh = g.rows() * (g.cols() - 1);
  if (e < nh) return {e / (g.cols() - 1), e % (g.cols() - 1)};
  e -= nh;
  return {e / g.cols(), e % g.cols()};
}

inline GridNode edge_head(const ProblemInstance& g, std::size_t e) {
  const std::size_t nh = g.rows() * (g.cols() - 1);
  GridNode t = edge_tail(g, e);
  if (e < nh) return {t.r, t.c + 1};
  return {t.r + 1, t.c};
}

/**
 * Best monotone NW->SE path under include/exclude constraints, or nullopt when
 * the constraints admit no path. Forced edges become waypoints; a node is
 * usable only inside the bounding box of the consecutive waypoints spanning
 * its anti-diagonal. Ties prefer the horizontal move, which is the canonical
 * order because horizontal indices precede vertical ones and are row-major.
 */
inline std::optional<Decision> grid_constrained_path(const ProblemInstance& g,
                                                     std::span<const double> c,
                                                     std::span<const EdgeState> state) {
  const std::size_t R = g.rows(), C = g.cols();
  std::vector<GridNode> waypoints{{0, 0}};
  std::vector<std::size_t> forced;
  for (std::size_t e = 0; e < g.n(); ++e) {
    if (state[e] == EdgeState::Forced) forced.push_back(e);
  }
  std::sort(forced.begin(), forced.end(), [&](std::size_t a, std::size_t b) {
    const auto ta = edge_tail(g, a), tb = edge_tail(g, b);
    return ta.r + ta.c < tb.r + tb.c;
  });
  for (std::size_t e : forced) {
    waypoints.push_back(edge_tail(g, e));
    waypoints.push_back(edge_head(g, e));
  }
  waypoints.push_back({R - 1, C - 1});
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const auto& p = waypoints[i - 1];
    const auto& q = waypoints[i];
    if (q.r < p.r || q.c < p.c) return std::nullopt;
  }
  // Two forced edges on one diagonal fail the check above unless identical.

  std::vector<std::uint8_t> usable(R * C, 0);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const auto& p = waypoints[i - 1];
    const auto& q = waypoints[i];
    for (std::size_t r = p.r; r <= q.r; ++r) {
      for (std::size_t cc = p.c; cc <= q.c; ++cc) usable[r * C + cc] = 1;
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> to_go(R * C, kInf);
  std::vector<std::int8_t> move(R * C, -1);  // 0 = right, 1 = down
  to_go[R * C - 1] = 0.0;
  for (std::size_t d = R + C - 2; d-- > 0;) {
    for (std::size_t r = (d >= C - 1 ? d - (C - 1) : 0); r <= std::min(d, R - 1); ++r) {
      const std::size_t cc = d - r;
      const std::size_t u = r * C + cc;
      if (!usable[u]) continue;
      double best = kInf;
      std::int8_t choice = -1;
      if (cc + 1 < C) {
        const std::size_t e = g.horizontal_edge(r, cc);
        const std::size_t w = u + 1;
        if (usable[w] && state[e] != EdgeState::Excluded && std::isfinite(to_go[w])) {
          best = c[e] + to_go[w];
          choice = 0;
        }
      }
      if (r + 1 < R) {
        const std::size_t e = g.vertical_edge(r, cc);
        const std::size_t w = u + C;
        if (usable[w] && state[e] != EdgeState::Excluded && std::isfinite(to_go[w])) {
          const double v = c[e] + to_go[w];
          if (choice < 0 || v < best) {
            best = v;
            choice = 1;
          }
        }
      }
      to_go[u] = best;
      move[u] = choice;
    }
  }
  if (move[0] < 0) return std::nullopt;
  if (!std::isfinite(to_go[0])) throw std::overflow_error("grid path cost overflow");

  Decision x(g.n(), 0);
  std::size_t r = 0, cc = 0;
  while (r != R - 1 || cc != C - 1) {
    const std::size_t u = r * C + cc;
    if (move[u] == 0) {
      x[g.horizontal_edge(r, cc)] = 1;
      ++cc;
    } else {
      x[g.vertical_edge(r, cc)] = 1;
      ++r;
    }
  }
  return x;
}

/// Edges of a grid path in traversal order.
inline std::vector<std::size_t> grid_path_edges(const ProblemInstance& g,
                                                std::span<const std::uint8_t> x) {
  std::vector<std::size_t> edges;
  std::size_t r = 0, cc = 0;
  while (r != g.rows() - 1 || cc != g.cols() - 1) {
    if (cc + 1 < g.cols() && x[g.horizontal_edge(r, cc)]) {
      edges.push_back(g.horizontal_edge(r, cc));
      ++cc;
    } else {
      edges.push_back(g.vertical_edge(r, cc));
      ++r;
    }
  }
  return edges;
}

// -------------------------- tsp --------------------------------------------

struct EdgeSet {
  std::array<std::uint64_t, 2> w{};

  void set(std::size_t i) { w[i >> 6] |= std::uint64_t{1} << (i & 63); }

  // Canonical preference between two edge sets (a wins at first difference).
  friend bool prefer(const EdgeSet& a, const EdgeSet& b) {
    for (std::size_t k = 0; k < 2; ++k) {
      const std::uint64_t diff = a.w[k] ^ b.w[k];
      if (diff) {
        const std::uint64_t low = diff & (~diff + 1);
        return (a.w[k] & low) != 0;
      }
    }
    return false;
  }
};

/// Held–Karp over subsets, anchored at node 0. Each DP state carries the
/// edge set of its partial path; two partial paths with equal (subset, end)
/// share every completion and the completion is disjoint from both, so
/// comparing partial edge sets realises the canonical tie-break exactly.
inline Decision held_karp(const ProblemInstance& g, std::span<const double> c) {
  const std::size_t N = g.nodes();
  const std::size_t K = N - 1;  // nodes 1..N-1 live in the mask
  const std::size_t full = (std::size_t{1} << K) - 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost((full + 1) * K, kInf);
  std::vector<EdgeSet> sets((full + 1) * K);
  auto at = [K](std::size_t mask, std::size_t j) { return mask * K + j; };

  for (std::size_t j = 0; j < K; ++j) {
    const std::size_t s = at(std::size_t{1} << j, j);
    cost[s] = c[g.tsp_edge(0, j + 1)];
    sets[s].set(g.tsp_edge(0, j + 1));
  }
  for (std::size_t mask = 1; mask <= full; ++mask) {
    for (std::size_t j = 0; j < K; ++j) {
      if (!(mask & (std::size_t{1} << j))) continue;
      const double base = cost[at(mask, j)];
      if (!std::isfinite(base)) continue;
      for (std::size_t k = 0; k < K; ++k) {
        if (mask & (std::size_t{1} << k)) continue;
        const std::size_t e = g.tsp_edge(j + 1, k + 1);
        const std::size_t nxt = at(mask | (std::size_t{1} << k), k);
        const double v = base + c[e];
        EdgeSet es = sets[at(mask, j)];
        es.set(e);
        if (v < cost[nxt] || (v == cost[nxt] && prefer(es, sets[nxt]))) {
          cost[nxt] = v;
          sets[nxt] = es;
        }
      }
    }
  }
  double best = kInf;
  EdgeSet best_set;
  bool found = false;
  for (std::size_t j = 0; j < K; ++j) {
    const double v = cost[at(full, j)] + c[g.tsp_edge(j + 1, 0)];
    EdgeSet es = sets[at(full, j)];
    es.set(g.tsp_edge(j + 1, 0));
    if (!found || v < best || (v == best && prefer(es, best_set))) {
      best = v;
      best_set = es;
      found = true;
    }
  }
  if (!std::isfinite(best)) throw std::overflow_error("tsp tour cost overflow");
  Decision x(g.n(), 0);
  for (std::size_t i = 0; i < g.n(); ++i) {
    x[i] = static_cast<std::uint8_t>((best_set.w[i >> 6] >> (i & 63)) & 1U);
  }
  return x;
}

inline Decision tour_decision(const ProblemInstance& g, std::span<const std::size_t> tour) {
  Decision x(g.n(), 0);
  for (std::size_t i = 0; i < tour.size(); ++i) {
    x[g.tsp_edge(tour[i], tour[(i + 1) % tour.size()])] = 1;
  }
  return x;
}

/// Calls fn(decision) once per undirected tour (anchored at 0, second node
/// index below last node index).
template <class Fn>
void for_each_canonical_tour(const ProblemInstance& g, Fn&& fn) {
  std::vector<std::size_t> perm(g.nodes() - 1);
  std::iota(perm.begin(), perm.end(), std::size_t{1});
  std::vector<std::size_t> tour(g.nodes());
  do {
    if (perm.front() > perm.back()) continue;
    tour[0] = 0;
    std::copy(perm.begin(), perm.end(), tour.begin() + 1);
    fn(tour_decision(g, tour));
  } while (std::next_permutation(perm.begin(), perm.end()));
}

}  // namespace detail

/// Node sequence of a TSP decision, anchored at 0 with the smaller neighbour
/// of node 0 second. Empty if x is not a single Hamiltonian cycle.
inline std::vector<std::size_t> tour_from_decision(const ProblemInstance& g,
                                                   std::span<const std::uint8_t> x) {
  if (g.kind() != ProblemKind::Tsp || x.size() != g.n()) return {};
  const std::size_t N = g.nodes();
  std::vector<std::vector<std::size_t>> adj(N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      if (x[g.tsp_edge(i, j)]) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  for (const auto& a : adj) {
    if (a.size() != 2) return {};
  }
  std::vector<std::size_t> tour{0};
  std::size_t prev = 0, cur = std::min(adj[0][0], adj[0][1]);
  while (cur != 0) {
    if (tour.size() >= N) return {};
    tour.push_back(cur);
    const std::size_t nxt = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
    prev = cur;
    cur = nxt;
  }
  if (tour.size() != N) return {};
  return tour;
}

/**
 * @brief Exact oracle over one ProblemInstance with a shared solve audit.
 *
 * Every method is a pure function of its arguments apart from the audit,
 * which is atomic, so one Oracle may be used from several threads.
 */
class Oracle {
 public:
  explicit Oracle(ProblemInstance inst) : inst_(std::move(inst)) {}

  const ProblemInstance& instance() const { return inst_; }
  std::size_t n() const { return inst_.n(); }
  OracleAudit& audit() const { return audit_; }

  bool is_feasible(std::span<const std::uint8_t> x) const {
    if (x.size() != inst_.n()) return false;
    for (auto b : x) {
      if (b > 1) return false;
    }
    const std::size_t ones = static_cast<std::size_t>(std::count(x.begin(), x.end(), 1));
    switch (inst_.kind()) {
      case ProblemKind::Select:
        return ones == 1;
      case ProblemKind::Grid: {
        const std::size_t R = inst_.rows(), C = inst_.cols();
        std::size_t r = 0, c = 0, steps = 0;
        while (r != R - 1 || c != C - 1) {
          const bool right = c + 1 < C && x[inst_.horizontal_edge(r, c)];
          const bool down = r + 1 < R && x[inst_.vertical_edge(r, c)];
          if (right == down) return false;
          right ? ++c : ++r;
          ++steps;
        }
        return steps == ones;
      }
      case ProblemKind::Tsp:
        return ones == inst_.nodes() && !tour_from_decision(inst_, x).empty();
    }
    return false;
  }

  /// x*(c): minimum-cost feasible decision, canonical on ties. One audit unit.
  Decision solve(std::span<const double> c) const {
    detail::check_costs(inst_, c);
    Decision x;
    switch (inst_.kind()) {
      case ProblemKind::Select: {
        std::size_t best = 0;
        for (std::size_t i = 1; i < c.size(); ++i) {
          if (c[i] < c[best]) best = i;
        }
        x.assign(inst_.n(), 0);
        x[best] = 1;
        break;
      }
      case ProblemKind::Grid: {
        std::vector<detail::EdgeState> free(inst_.n(), detail::EdgeState::Free);
        x = *detail::grid_constrained_path(inst_, c, free);
        break;
      }
      case ProblemKind::Tsp:
        if (inst_.nodes() > ProblemInstance::kMaxTspSolveNodes) {
          throw std::invalid_argument("tsp solve supports at most 16 nodes");
        }
        x = detail::held_karp(inst_, c);
        break;
    }
    audit_.add();
    return x;
  }

  /**
   * @brief The k best distinct decisions, sorted by (cost, canonical order).
   *
   * Grid: Lawler partitioning. Each popped path spawns one subproblem per
   * free edge e_j along the path (force e_1..e_{j-1}, exclude e_j); every
   * constrained DP run costs one audit unit and no partitioning happens after
   * the k-th pop. TSP (N <= 10): exhaustive enumeration of canonical tours,
   * charged min(k, #tours) units. Select: sort, charged min(k, n) units.
   */
  std::vector<Decision> top_k(std::span<const double> c, std::size_t k) const {
    detail::check_costs(inst_, c);
    if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
    switch (inst_.kind()) {
      case ProblemKind::Select: return top_k_select(c, k);
      case ProblemKind::Grid: return top_k_grid(c, k);
      case ProblemKind::Tsp: return top_k_tsp(c, k);
    }
    return {};
  }

  /// c^T x + max over the budget set, via fractional knapsack on |c_i| x_i.
  double worst_case_cost(std::span<const double> c, std::span<const std::uint8_t> x,
                         const UncertaintyParams& u) const {
    require_same_size(c.size(), inst_.n(), "cost vector");
    require_same_size(x.size(), inst_.n(), "decision");
    u.validate();
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i]) used.push_back(i);
    }
    std::stable_sort(used.begin(), used.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(c[a]) > std::abs(c[b]);
    });
    double extra = 0.0;
    double budget = u.gamma;
    for (std::size_t i : used) {
      if (budget <= 0.0) break;
      const double take = std::min(u.rho, budget);
      extra += std::abs(c[i]) * take;
      budget -= take;
    }
    return dot(c, x) + extra;
  }

  /**
   * @brief argmin_x worst_case_cost(c, x, u).
   *
   * With deviations d_i = rho|c_i| and Γ' = gamma/rho, LP duality of the
   * inner knapsack gives min_x max_w = min_θ≥0 [Γ'θ + min_x Σ (c_i +
   * max(d_i − θ, 0)) x_i], and the outer minimum is attained at θ ∈ {0} ∪
   * {d_i}. One nominal solve per distinct threshold; candidates are then
   * re-scored with worst_case_cost and the best (canonical on ties) returned.
   */
  Decision robust_solve(std::span<const double> c, const UncertaintyParams& u) const {
    detail::check_costs(inst_, c);
    u.validate();
    if (u.rho == 0.0 || u.gamma == 0.0) return solve(c);

    std::vector<double> thresholds{0.0};
    for (double ci : c) thresholds.push_back(u.rho * std::abs(ci));
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<double> adjusted(c.size());
    Decision best;
    double best_cost = 0.0;
    for (double theta : thresholds) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        adjusted[i] = c[i] + std::max(u.rho * std::abs(c[i]) - theta, 0.0);
      }
      Decision cand = solve(adjusted);
      const double wc = worst_case_cost(c, cand, u);
      if (best.empty() || ranks_before(wc, cand, best_cost, best)) {
        best = std::move(cand);
        best_cost = wc;
      }
    }
    return best;
  }

  /// Number of audit units robust_solve(c, u) will consume.
  std::size_t robust_solve_cost(std::span<const double> c, const UncertaintyParams& u) const {
    if (u.rho == 0.0 || u.gamma == 0.0) return 1;
    std::vector<double> thresholds{0.0};
    for (double ci : c) thresholds.push_back(u.rho * std::abs(ci));
    std::sort(thresholds.begin(), thresholds.end());
    return static_cast<std::size_t>(
        std::unique(thresholds.begin(), thresholds.end()) - thresholds.begin());
  }

 private:
  std::vector<Decision> top_k_select(std::span<const double> c, std::size_t k) const {
    std::vector<std::size_t> idx(c.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return c[a] < c[b]; });
    const std::size_t take = std::min(k, idx.size());
    std::vector<Decision> out;
    for (std::size_t j = 0; j < take; ++j) {
      Decision x(c.size(), 0);
      x[idx[j]] = 1;
      out.push_back(std::move(x));
    }
    audit_.add(take);
    return out;
  }

  std::vector<Decision> top_k_tsp(std::span<const double> c, std::size_t k) const {
    if (inst_.nodes() > ProblemInstance::kMaxTspTopKNodes) {
      throw std::invalid_argument("tsp top_k supports at most 10 nodes");
    }
    struct Entry {
      double cost;
      Decision x;
    };
    std::vector<Entry> kept;  // sorted best first, size <= k
    detail::for_each_canonical_tour(inst_, [&](Decision x) {
      const double v = dot(c, x);
      if (kept.size() == k && !ranks_before(v, x, kept.back().cost, kept.back().x)) return;
      auto pos = std::upper_bound(kept.begin(), kept.end(), v, [&](double vv, const Entry& e) {
        return ranks_before(vv, x, e.cost, e.x);
      });
      kept.insert(pos, Entry{v, std::move(x)});
      if (kept.size() > k) kept.pop_back();
    });
    std::vector<Decision> out;
    for (auto& e : kept) out.push_back(std::move(e.x));
    audit_.add(out.size());
    return out;
  }

  std::vector<Decision> top_k_grid(std::span<const double> c, std::size_t k) const {
    using detail::EdgeState;
    struct Node {
      double cost;
      Decision x;
      std::vector<EdgeState> state;
    };
    std::vector<Node> open;
    auto run = [&](std::vector<EdgeState> state) {
      audit_.add();
      if (auto x = detail::grid_constrained_path(inst_, c, state)) {
        const double v = dot(c, *x);
        open.push_back(Node{v, std::move(*x), std::move(state)});
      }
    };
    run(std::vector<EdgeState>(inst_.n(), EdgeState::Free));

    std::vector<Decision> out;
    while (!open.empty() && out.size() < k) {
      auto it = std::min_element(open.begin(), open.end(), [](const Node& a, const Node& b) {
        return ranks_before(a.cost, a.x, b.cost, b.x);
      });
      Node node = std::move(*it);
      open.erase(it);
      out.push_back(node.x);
      if (out.size() == k) break;
      std::vector<EdgeState> state = node.state;
      for (std::size_t e : detail::grid_path_edges(inst_, node.x)) {
        if (state[e] == EdgeState::Forced) continue;
        std::vector<EdgeState> child = state;
        child[e] = EdgeState::Excluded;
        run(std::move(child));
        state[e] = EdgeState::Forced;
      }
    }
    return out;
  }

  ProblemInstance inst_;
  mutable OracleAudit audit_;
};

}  // namespace dfl
