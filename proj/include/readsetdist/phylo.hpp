#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "log.hpp"
#include "readset_distance.hpp"

namespace rsd {

struct TreeNode {
  std::string label;  // leaves only
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  double branch_length = 0.0;  // to parent
  double height = 0.0;         // distance above the leaves; meaningful when the tree has heights
};

// Rooted binary tree. UPGMA trees carry node heights; NJ trees are unrooted
// in nature and rooted at the midpoint of their final edge, without heights.
struct PhyloTree {
  std::vector<TreeNode> nodes;
  std::size_t root = 0;
  bool has_heights = false;

  bool is_leaf(std::size_t v) const { return nodes[v].children.empty(); }

  std::vector<std::size_t> leaves() const {
    std::vector<std::size_t> out;
    collect_leaves(root, out);
    return out;
  }

  std::vector<std::string> leaf_labels() const {
    std::vector<std::string> out;
    for (const auto v : leaves()) out.push_back(nodes[v].label);
    return out;
  }

  void collect_leaves(std::size_t v, std::vector<std::size_t>& out) const {
    if (is_leaf(v)) {
      out.push_back(v);
      return;
    }
    for (const auto c : nodes[v].children) collect_leaves(c, out);
  }

  std::size_t depth(std::size_t v) const {
    std::size_t d = 0;
    while (nodes[v].parent) {
      v = *nodes[v].parent;
      ++d;
    }
    return d;
  }

  // Sum of branch lengths from v up to the root.
  double root_distance(std::size_t v) const {
    double d = 0.0;
    while (nodes[v].parent) {
      d += nodes[v].branch_length;
      v = *nodes[v].parent;
    }
    return d;
  }

  // Leaf-to-leaf path lengths as a matrix over the leaf labels (sorted).
  DistanceMatrix path_distances() const {
    auto ids = leaves();
    std::sort(ids.begin(), ids.end(), [&](auto x, auto y) { return nodes[x].label < nodes[y].label; });
    std::vector<std::string> labels;
    for (const auto v : ids) labels.push_back(nodes[v].label);
    DistanceMatrix out(labels);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) out.set(i, j, path_length(ids[i], ids[j]));
    }
    return out;
  }

  double path_length(std::size_t u, std::size_t v) const {
    std::vector<std::size_t> up;
    for (auto w = std::optional<std::size_t>(u); w; w = nodes[*w].parent) up.push_back(*w);
    double from_v = 0.0;
    std::size_t w = v;
    while (std::find(up.begin(), up.end(), w) == up.end()) {
      from_v += nodes[w].branch_length;
      w = *nodes[w].parent;
    }
    double from_u = 0.0;
    for (const auto x : up) {
      if (x == w) break;
      from_u += nodes[x].branch_length;
    }
    return from_u + from_v;
  }

  // Smallest leaf label below v; used as the canonical key of a subtree.
  std::string min_label(std::size_t v) const {
    if (is_leaf(v)) return nodes[v].label;
    std::string best;
    bool first = true;
    for (const auto c : nodes[v].children) {
      auto m = min_label(c);
      if (first || m < best) best = std::move(m);
      first = false;
    }
    return best;
  }

  // Recomputes node heights as the distance to the leaves (average over
  // leaves below), and marks the tree as having heights.
  void assign_heights_from_branch_lengths() {
    assign_height(root);
    has_heights = true;
  }

  // True when every leaf is at the same distance from the root.
  bool is_ultrametric(double tolerance) const {
    const auto ids = leaves();
    if (ids.empty()) return false;
    const double d0 = root_distance(ids.front());
    return std::all_of(ids.begin(), ids.end(), [&](auto v) { return std::abs(root_distance(v) - d0) <= tolerance; });
  }

 private:
  double assign_height(std::size_t v) {
    if (is_leaf(v)) return nodes[v].height = 0.0;
    double sum = 0.0;
    for (const auto c : nodes[v].children) sum += assign_height(c) + nodes[c].branch_length;
    return nodes[v].height = sum / static_cast<double>(nodes[v].children.size());
  }
};

namespace detail {

inline void check_clusterable(const DistanceMatrix& m) {
  if (m.size() == 0) throw std::invalid_argument("cannot build a tree from an empty matrix");
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (m(i, j) != m(j, i)) throw std::invalid_argument("distance matrix is not symmetric");
      if (!(m(i, j) >= 0.0) || !std::isfinite(m(i, j))) throw std::invalid_argument("distance matrix has a negative or non-finite entry");
    }
  }
}

// Rows and columns sorted by label so construction does not depend on input order.
inline DistanceMatrix sorted_by_label(const DistanceMatrix& m) {
  auto labels = m.labels();
  std::stable_sort(labels.begin(), labels.end());
  return m.reordered(labels);
}

inline std::pair<std::string, std::string> ordered_keys(const std::string& a, const std::string& b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace detail

// Average-linkage agglomeration. The closest pair of clusters merges first,
// ties going to the lexicographically smallest pair of cluster keys (the
// smallest leaf label of each cluster). Node height is half the merge
// distance; children are ordered by key.
inline PhyloTree upgma(const DistanceMatrix& input) {
  detail::check_clusterable(input);
  const auto m = detail::sorted_by_label(input);
  const std::size_t n = m.size();

  PhyloTree tree;
  tree.has_heights = true;
  std::vector<std::size_t> node_of(n);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::string> key(n);
  std::vector<char> active(n, 1);
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    tree.nodes.push_back(TreeNode{m.labels()[i], std::nullopt, {}, 0.0, 0.0});
    node_of[i] = i;
    key[i] = m.labels()[i];
    for (std::size_t j = 0; j < n; ++j) d[i][j] = m(i, j);
  }

  for (std::size_t remaining = n; remaining > 1; --remaining) {
    std::size_t bi = 0, bj = 0;
    bool found = false;
    std::pair<std::string, std::string> best_key;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        auto k = detail::ordered_keys(key[i], key[j]);
        if (!found || d[i][j] < d[bi][bj] || (d[i][j] == d[bi][bj] && k < best_key)) {
          bi = i;
          bj = j;
          best_key = std::move(k);
          found = true;
        }
      }
    }
    const double height = d[bi][bj] / 2.0;
    const std::size_t parent = tree.nodes.size();
    TreeNode node;
    node.height = height;
    node.children = key[bi] < key[bj] ? std::vector{node_of[bi], node_of[bj]} : std::vector{node_of[bj], node_of[bi]};
    tree.nodes.push_back(std::move(node));
    for (const auto c : tree.nodes[parent].children) {
      tree.nodes[c].parent = parent;
      tree.nodes[c].branch_length = std::max(0.0, height - tree.nodes[c].height);
    }

    const double si = static_cast<double>(size[bi]), sj = static_cast<double>(size[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      d[bi][k] = d[k][bi] = (si * d[bi][k] + sj * d[bj][k]) / (si + sj);
    }
    active[bj] = 0;
    size[bi] += size[bj];
    node_of[bi] = parent;
    key[bi] = std::min(key[bi], key[bj]);
  }
  tree.root = tree.nodes.size() - 1;
  return tree;
}

// Neighbor joining: repeatedly joins the pair minimising
// Q(i, j) = (r - 2) d(i, j) - R_i - R_j (ties by key pair), with the usual
// branch-length and distance updates. Negative branch lengths are clamped to
// zero. The last two clusters are joined by an edge whose midpoint becomes
// the root.
inline PhyloTree neighbor_joining(const DistanceMatrix& input) {
  detail::check_clusterable(input);
  const auto m = detail::sorted_by_label(input);
  const std::size_t n = m.size();

  PhyloTree tree;
  std::vector<std::size_t> node_of(n);
  std::vector<std::string> key(n);
  std::vector<std::size_t> alive(n);
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    tree.nodes.push_back(TreeNode{m.labels()[i], std::nullopt, {}, 0.0, 0.0});
    node_of[i] = i;
    key[i] = m.labels()[i];
    alive[i] = i;
    for (std::size_t j = 0; j < n; ++j) d[i][j] = m(i, j);
  }
  if (n == 1) {
    tree.root = 0;
    return tree;
  }

  auto clamp_length = [](double length, const std::string& what) {
    if (length < 0.0) {
      warn("neighbor joining produced a negative branch length (" + std::to_string(length) + ") for " + what +
           "; clamped to 0");
      return 0.0;
    }
    return length;
  };

  auto attach = [&](std::size_t parent, std::size_t child, double length) {
    tree.nodes[child].parent = parent;
    tree.nodes[child].branch_length = length;
    tree.nodes[parent].children.push_back(child);
  };

  while (alive.size() > 2) {
    const auto r = static_cast<double>(alive.size());
    std::vector<double> row_sum(n, 0.0);
    for (const auto i : alive) {
      for (const auto k : alive) row_sum[i] += d[i][k];
    }
    std::size_t bi = 0, bj = 0;
    double best_q = 0.0;
    std::pair<std::string, std::string> best_key;
    bool found = false;
    for (std::size_t x = 0; x < alive.size(); ++x) {
      for (std::size_t y = x + 1; y < alive.size(); ++y) {
        const auto i = alive[x], j = alive[y];
        const double q = (r - 2.0) * d[i][j] - row_sum[i] - row_sum[j];
        auto k = detail::ordered_keys(key[i], key[j]);
        if (!found || q < best_q || (q == best_q && k < best_key)) {
          bi = i;
          bj = j;
          best_q = q;
          best_key = std::move(k);
          found = true;
        }
      }
    }
    if (key[bj] < key[bi]) std::swap(bi, bj);
    const double li = d[bi][bj] / 2.0 + (row_sum[bi] - row_sum[bj]) / (2.0 * (r - 2.0));
    const double lj = d[bi][bj] - li;

    const std::size_t parent = tree.nodes.size();
    tree.nodes.emplace_back();
    attach(parent, node_of[bi], clamp_length(li, "'" + key[bi] + "'"));
    attach(parent, node_of[bj], clamp_length(lj, "'" + key[bj] + "'"));

    for (const auto k : alive) {
      if (k == bi || k == bj) continue;
      d[bi][k] = d[k][bi] = (d[bi][k] + d[bj][k] - d[bi][bj]) / 2.0;
    }
    alive.erase(std::find(alive.begin(), alive.end(), bj));
    node_of[bi] = parent;
    key[bi] = std::min(key[bi], key[bj]);
  }

  auto i = alive[0], j = alive[1];
  if (key[j] < key[i]) std::swap(i, j);
  const double half = clamp_length(d[i][j], "the final edge") / 2.0;
  const std::size_t root = tree.nodes.size();
  tree.nodes.emplace_back();
  attach(root, node_of[i], half);
  attach(root, node_of[j], half);
  tree.root = root;
  return tree;
}

// A partition of leaf labels. Blocks are sorted internally and ordered by
// their first label.
struct Clustering {
  std::vector<std::vector<std::string>> blocks;

  std::size_t size() const { return blocks.size(); }

  void canonicalize() {
    for (auto& b : blocks) std::sort(b.begin(), b.end());
    std::sort(blocks.begin(), blocks.end());
  }

  friend bool operator==(const Clustering&, const Clustering&) = default;
};

namespace detail {

inline Clustering blocks_below(const PhyloTree& tree, const std::vector<std::size_t>& block_roots) {
  Clustering c;
  for (const auto v : block_roots) {
    std::vector<std::size_t> ids;
    tree.collect_leaves(v, ids);
    std::vector<std::string> labels;
    for (const auto id : ids) labels.push_back(tree.nodes[id].label);
    c.blocks.push_back(std::move(labels));
  }
  c.canonicalize();
  return c;
}

// Height cut: dissolve the k-1 highest internal nodes (ties by shallower
// depth, then key); the surviving maximal subtrees are the blocks.
inline Clustering cut_by_height(const PhyloTree& tree, std::size_t k) {
  std::vector<std::size_t> internal;
  for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
    if (!tree.is_leaf(v)) internal.push_back(v);
  }
  struct Rank {
    double height;
    std::size_t depth;
    std::string key;
    std::size_t node;
  };
  std::vector<Rank> ranks;
  for (const auto v : internal) ranks.push_back({tree.nodes[v].height, tree.depth(v), tree.min_label(v), v});
  std::sort(ranks.begin(), ranks.end(), [](const Rank& x, const Rank& y) {
    if (x.height != y.height) return x.height > y.height;
    if (x.depth != y.depth) return x.depth < y.depth;
    return x.key < y.key;
  });
  std::vector<char> dissolved(tree.nodes.size(), 0);
  for (std::size_t i = 0; i + 1 < k; ++i) dissolved[ranks[i].node] = 1;
  std::vector<std::size_t> roots;
  for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
    if (dissolved[v]) continue;
    const auto& p = tree.nodes[v].parent;
    if ((p && dissolved[*p]) || v == tree.root) roots.push_back(v);
  }
  return blocks_below(tree, roots);
}

// Edge cut for trees without heights. The tree is viewed unrooted (the two
// root edges form one edge). Edges are visited by decreasing length, ties by
// the sorted label list of the side not holding the smallest label; an edge
// is removed when both resulting sides still contain leaves, until k
// components exist.
inline Clustering cut_by_edges(const PhyloTree& tree, std::size_t k) {
  const std::size_t nn = tree.nodes.size();
  struct Edge {
    std::size_t u, v;
    double length;
    std::vector<std::string> side;
  };
  std::vector<Edge> edges;
  const auto& root_children = tree.nodes[tree.root].children;
  const bool merge_root = root_children.size() == 2;
  for (std::size_t v = 0; v < nn; ++v) {
    const auto& p = tree.nodes[v].parent;
    if (!p) continue;
    if (merge_root && *p == tree.root) continue;
    edges.push_back({v, *p, tree.nodes[v].branch_length, {}});
  }
  if (merge_root) {
    const auto a = root_children[0], b = root_children[1];
    edges.push_back({a, b, tree.nodes[a].branch_length + tree.nodes[b].branch_length, {}});
  }

  // Undirected adjacency without the root when it is merged away.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nn);  // (neighbor, edge id)
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].u].push_back({edges[e].v, e});
    adj[edges[e].v].push_back({edges[e].u, e});
  }
  std::vector<char> removed(edges.size(), 0);

  auto component = [&](std::size_t start, std::size_t skip_edge) {
    std::vector<std::size_t> seen{start};
    std::vector<char> visited(nn, 0);
    visited[start] = 1;
    for (std::size_t i = 0; i < seen.size(); ++i) {
      for (const auto& [w, e] : adj[seen[i]]) {
        if (e == skip_edge || removed[e] || visited[w]) continue;
        visited[w] = 1;
        seen.push_back(w);
      }
    }
    return seen;
  };
  auto leaf_labels_of = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> labels;
    for (const auto v : ids) {
      if (tree.is_leaf(v)) labels.push_back(tree.nodes[v].label);
    }
    std::sort(labels.begin(), labels.end());
    return labels;
  };

  const auto all = leaf_labels_of(component(tree.leaves().front(), edges.size()));
  const std::string smallest = all.front();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto side_u = leaf_labels_of(component(edges[e].u, e));
    if (std::binary_search(side_u.begin(), side_u.end(), smallest)) {
      edges[e].side = leaf_labels_of(component(edges[e].v, e));
    } else {
      edges[e].side = std::move(side_u);
    }
  }
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto x, auto y) {
    if (edges[x].length != edges[y].length) return edges[x].length > edges[y].length;
    return edges[x].side < edges[y].side;
  });

  std::size_t components = 1;
  for (const auto e : order) {
    if (components == k) break;
    if (leaf_labels_of(component(edges[e].u, e)).empty() || leaf_labels_of(component(edges[e].v, e)).empty()) continue;
    removed[e] = 1;
    ++components;
  }

  Clustering c;
  std::vector<char> assigned(nn, 0);
  for (const auto leaf : tree.leaves()) {
    if (assigned[leaf]) continue;
    auto ids = component(leaf, edges.size());
    for (const auto v : ids) assigned[v] = 1;
    c.blocks.push_back(leaf_labels_of(ids));
  }
  c.canonicalize();
  return c;
}

}  // namespace detail

// Cuts a tree into k clusters, 2 <= k <= n-1. Trees with heights are cut by
// height, others by removing long edges.
inline Clustering cut_tree(const PhyloTree& tree, std::size_t k) {
  const auto n = tree.leaves().size();
  if (n < 3 || k < 2 || k > n - 1) {
    throw std::invalid_argument("cluster count k = " + std::to_string(k) + " must lie in [2, " +
                                std::to_string(n < 1 ? 0 : n - 1) + "]");
  }
  return tree.has_heights ? detail::cut_by_height(tree, k) : detail::cut_by_edges(tree, k);
}

// Fowlkes-Mallows index from the contingency table m of shared labels:
//   B = (Σ m_ij² - n) / sqrt((Σ_i a_i² - n)(Σ_j b_j² - n))
// with a_i, b_j the block sizes. A zero denominator yields 0.
inline double fowlkes_mallows(const Clustering& c1, const Clustering& c2) {
  std::map<std::string, std::size_t> block_of;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c1.blocks.size(); ++i) {
    for (const auto& label : c1.blocks[i]) {
      if (!block_of.emplace(label, i).second) throw std::invalid_argument("label '" + label + "' appears twice in a clustering");
      ++n;
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::size_t n2 = 0;
  for (std::size_t j = 0; j < c2.blocks.size(); ++j) {
    for (const auto& label : c2.blocks[j]) {
      const auto it = block_of.find(label);
      if (it == block_of.end()) throw std::invalid_argument("label '" + label + "' is missing from the first clustering");
      table[{it->second, j}] += 1.0;
      ++n2;
    }
  }
  if (n2 != n) throw std::invalid_argument("clusterings cover different label sets");

  const double nd = static_cast<double>(n);
  double sum_sq = 0.0;
  for (const auto& [ij, count] : table) sum_sq += count * count;
  double rows = 0.0, cols = 0.0;
  for (const auto& b : c1.blocks) rows += static_cast<double>(b.size() * b.size());
  for (const auto& b : c2.blocks) cols += static_cast<double>(b.size() * b.size());
  const double denominator = std::sqrt((rows - nd) * (cols - nd));
  if (!(denominator > 0.0)) {
    warn("Fowlkes-Mallows index is undefined for all-singleton clusterings; reporting 0");
    return 0.0;
  }
  return (sum_sq - nd) / denominator;
}

// Sample Pearson correlation of the strictly upper-triangular entries.
// std::nullopt when either operand has zero variance.
inline std::optional<double> pearson(const DistanceMatrix& x, const DistanceMatrix& y) {
  if (x.labels() != y.labels()) throw std::invalid_argument("matrices must have the same labels in the same order");
  const auto n = x.size();
  if (n < 3) throw std::invalid_argument("Pearson correlation needs at least 3 items");
  std::vector<double> u, v;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      u.push_back(x(i, j));
      v.push_back(y(i, j));
    }
  }
  const double count = static_cast<double>(u.size());
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / count;
  const double mv = std::accumulate(v.begin(), v.end(), 0.0) / count;
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  const auto constant = [](const std::vector<double>& w) {
    return std::all_of(w.begin(), w.end(), [&](double z) { return z == w.front(); });
  };
  if (constant(u) || constant(v) || suu == 0.0 || svv == 0.0) return std::nullopt;
  return std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
}

}  // namespace rsd
