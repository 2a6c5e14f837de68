#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include <readsetdist/phylo.hpp>

#include "test_support.hpp"

namespace rsd {
namespace {

DistanceMatrix matrix(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& rows) {
  DistanceMatrix m(labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) m.set(i, j, rows[i][j]);
  }
  return m;
}

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
  return out;
}

// Random merges at increasing heights; d(i, j) is twice the height at which
// i and j first share a cluster.
DistanceMatrix random_ultrametric(Rng& rng, std::size_t n) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  double height = 0.0;
  while (clusters.size() > 1) {
    height += 0.5 + rng.unit() * 3.0;
    const auto x = rng.below(clusters.size());
    auto y = rng.below(clusters.size() - 1);
    if (y >= x) ++y;
    for (const auto i : clusters[x]) {
      for (const auto j : clusters[y]) d[i][j] = d[j][i] = 2.0 * height;
    }
    clusters[x].insert(clusters[x].end(), clusters[y].begin(), clusters[y].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(y));
  }
  return matrix(names(n), d);
}

// Random unrooted binary tree with positive edges; distances by graph search.
DistanceMatrix random_additive(Rng& rng, std::size_t n) {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  auto add_edge = [&](std::size_t u, std::size_t v, double w) {
    adj[u].push_back({v, w});
    adj[v].push_back({u, w});
  };
  auto weight = [&] { return 0.5 + rng.unit() * 4.0; };
  // Start from three leaves around a hub, then subdivide random leaf edges.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  adj.emplace_back();
  const std::size_t hub = n;
  for (std::size_t i = 0; i < 3; ++i) {
    add_edge(i, hub, weight());
    edges.push_back({i, hub});
  }
  for (std::size_t leaf = 3; leaf < n; ++leaf) {
    const auto e = rng.below(edges.size());
    const auto [u, v] = edges[e];
    auto& au = adj[u];
    const auto it = std::find_if(au.begin(), au.end(), [&](auto& p) { return p.first == v; });
    const double w = it->second;
    au.erase(it);
    auto& av = adj[v];
    av.erase(std::find_if(av.begin(), av.end(), [&](auto& p) { return p.first == u; }));
    const std::size_t mid = adj.size();
    adj.emplace_back();
    add_edge(u, mid, w / 2.0);
    add_edge(mid, v, w / 2.0);
    add_edge(leaf, mid, weight());
    edges[e] = {u, mid};
    edges.push_back({mid, v});
    edges.push_back({leaf, mid});
  }
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> dist(adj.size(), -1.0);
    std::function<void(std::size_t, double)> visit = [&](std::size_t v, double acc) {
      dist[v] = acc;
      for (const auto& [w, len] : adj[v]) {
        if (dist[w] < 0.0) visit(w, acc + len);
      }
    };
    visit(s, 0.0);
    for (std::size_t t = 0; t < n; ++t) d[s][t] = dist[t];
  }
  return matrix(names(n), d);
}

double max_abs_diff(const DistanceMatrix& a, const DistanceMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  }
  return worst;
}

// Pair counting definition of the Fowlkes-Mallows index.
double fm_by_pairs(const Clustering& x, const Clustering& y) {
  std::map<std::string, std::size_t> bx, by;
  for (std::size_t i = 0; i < x.blocks.size(); ++i) for (const auto& l : x.blocks[i]) bx[l] = i;
  for (std::size_t i = 0; i < y.blocks.size(); ++i) for (const auto& l : y.blocks[i]) by[l] = i;
  std::vector<std::string> labels;
  for (const auto& [l, b] : bx) labels.push_back(l);
  double both = 0, in_x = 0, in_y = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const bool sx = bx[labels[i]] == bx[labels[j]];
      const bool sy = by[labels[i]] == by[labels[j]];
      both += sx && sy;
      in_x += sx;
      in_y += sy;
    }
  }
  return both / std::sqrt(in_x * in_y);
}

Clustering clustering(std::vector<std::vector<std::string>> blocks) {
  Clustering c{std::move(blocks)};
  c.canonicalize();
  return c;
}

TEST(Upgma, TwoLeaves) {
  const auto t = upgma(matrix({"a", "b"}, {{0, 4}, {4, 0}}));
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_DOUBLE_EQ(t.nodes[t.root].height, 2.0);
  for (const auto c : t.nodes[t.root].children) EXPECT_DOUBLE_EQ(t.nodes[c].branch_length, 2.0);
}

TEST(Upgma, AverageLinkage) {
  // a-b merge at 2; c sits at the average of 6 and 8.
  const auto t = upgma(matrix({"a", "b", "c"}, {{0, 2, 6}, {2, 0, 8}, {6, 8, 0}}));
  EXPECT_DOUBLE_EQ(t.nodes[t.root].height, 3.5);
  const auto p = t.path_distances();
  EXPECT_DOUBLE_EQ(p(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(p(0, 2), 7.0);
}

TEST(Upgma, ReproducesUltrametricMatrices) {
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto m = random_ultrametric(rng, 2 + rng.below(9));
    const auto t = upgma(m);
    EXPECT_TRUE(t.is_ultrametric(1e-9));
    EXPECT_LE(max_abs_diff(t.path_distances(), m), 1e-9);
  }
}

TEST(Upgma, IndependentOfInputOrder) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto m = random_ultrametric(rng, 7);
    auto order = m.labels();
    std::reverse(order.begin(), order.end());
    std::swap(order[1], order[4]);
    EXPECT_EQ(upgma(m).path_distances(), upgma(m.reordered(order)).path_distances());
  }
}

TEST(NeighborJoining, RecoversFourLeafTopology) {
  // ((a:1,b:2):5,(c:3,d:4)) unrooted.
  const auto m = matrix({"a", "b", "c", "d"}, {{0, 3, 9, 10}, {3, 0, 10, 11}, {9, 10, 0, 7}, {10, 11, 7, 0}});
  const auto t = neighbor_joining(m);
  EXPECT_LE(max_abs_diff(t.path_distances(), m), 1e-9);
  EXPECT_EQ(cut_tree(t, 2), clustering({{"a", "b"}, {"c", "d"}}));
}

TEST(NeighborJoining, ReproducesAdditiveMatrices) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto m = random_additive(rng, 3 + rng.below(8));
    EXPECT_LE(max_abs_diff(neighbor_joining(m).path_distances(), m), 1e-6);
  }
}

TEST(NeighborJoining, PermutationInvariant) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const auto m = random_additive(rng, 8);
    auto order = m.labels();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    EXPECT_EQ(neighbor_joining(m).path_distances(), neighbor_joining(m.reordered(order)).path_distances());
  }
}

TEST(NeighborJoining, SmallInputs) {
  EXPECT_EQ(neighbor_joining(matrix({"a"}, {{0}})).leaves().size(), 1u);
  const auto t = neighbor_joining(matrix({"a", "b"}, {{0, 3}, {3, 0}}));
  EXPECT_DOUBLE_EQ(t.path_distances()(0, 1), 3.0);
}

TEST(NeighborJoining, ClampsNegativeBranchesWithWarning) {
  std::vector<std::string> seen;
  ScopedWarningSink sink([&](const std::string& w) { seen.push_back(w); });
  const auto m = matrix({"a", "b", "c", "d"}, {{0, 1, 10, 10}, {1, 0, 10, 10}, {10, 10, 0, 30}, {10, 10, 30, 0}});
  const auto t = neighbor_joining(m);
  for (const auto& node : t.nodes) EXPECT_GE(node.branch_length, 0.0);
  EXPECT_FALSE(seen.empty());
}

TEST(Trees, RejectBadMatrices) {
  EXPECT_THROW(upgma(DistanceMatrix{}), std::invalid_argument);
  EXPECT_THROW(neighbor_joining(DistanceMatrix{}), std::invalid_argument);
}

TEST(CutTree, HeightCutFollowsMergeOrder) {
  // ((a,b):1,(c,d):2):5 then e at 10.
  const auto m = matrix(names(5), {{0, 2, 10, 10, 20}, {2, 0, 10, 10, 20}, {10, 10, 0, 4, 20}, {10, 10, 4, 0, 20}, {20, 20, 20, 20, 0}});
  const auto t = upgma(m);
  EXPECT_EQ(cut_tree(t, 2), clustering({{"a", "b", "c", "d"}, {"e"}}));
  EXPECT_EQ(cut_tree(t, 3), clustering({{"a", "b"}, {"c", "d"}, {"e"}}));
  EXPECT_EQ(cut_tree(t, 4), clustering({{"a", "b"}, {"c"}, {"d"}, {"e"}}));
}

TEST(CutTree, RangeIsChecked) {
  Rng rng(5);
  const auto t = upgma(random_ultrametric(rng, 5));
  EXPECT_THROW(cut_tree(t, 1), std::invalid_argument);
  EXPECT_THROW(cut_tree(t, 5), std::invalid_argument);
  EXPECT_NO_THROW(cut_tree(t, 4));
}

TEST(CutTree, RefinementChain) {
  Rng rng(6);
  for (int k = 0; k < 40; ++k) {
    const auto n = 4 + rng.below(7);
    for (const bool additive : {false, true}) {
      const auto m = additive ? random_additive(rng, n) : random_ultrametric(rng, n);
      const auto t = additive ? neighbor_joining(m) : upgma(m);
      Clustering prev;
      for (std::size_t c = 2; c <= n - 1; ++c) {
        const auto cur = cut_tree(t, c);
        ASSERT_EQ(cur.size(), c);
        std::size_t covered = 0;
        for (const auto& b : cur.blocks) covered += b.size();
        ASSERT_EQ(covered, n);
        if (c > 2) {
          // Every block of the finer clustering lies inside a block of the coarser one.
          for (const auto& b : cur.blocks) {
            const auto owner = std::find_if(prev.blocks.begin(), prev.blocks.end(), [&](const auto& p) {
              return std::find(p.begin(), p.end(), b.front()) != p.end();
            });
            ASSERT_NE(owner, prev.blocks.end());
            for (const auto& l : b) ASSERT_NE(std::find(owner->begin(), owner->end(), l), owner->end());
          }
        }
        prev = cur;
      }
    }
  }
}

TEST(FowlkesMallows, KnownValues) {
  const auto x = clustering({{"a", "b"}, {"c", "d"}});
  const auto y = clustering({{"a", "b", "c"}, {"d"}});
  EXPECT_NEAR(fowlkes_mallows(x, y), 1.0 / std::sqrt(6.0), 1e-12);
  EXPECT_DOUBLE_EQ(fowlkes_mallows(x, x), 1.0);
}

TEST(FowlkesMallows, AllSingletonsIsZeroWithWarning) {
  std::vector<std::string> seen;
  ScopedWarningSink sink([&](const std::string& w) { seen.push_back(w); });
  const auto s = clustering({{"a"}, {"b"}, {"c"}});
  EXPECT_EQ(fowlkes_mallows(s, s), 0.0);
  EXPECT_EQ(seen.size(), 1u);
}

TEST(FowlkesMallows, MatchesPairCounting) {
  Rng rng(7);
  for (int k = 0; k < 300; ++k) {
    const auto n = 3 + rng.below(10);
    auto random_partition = [&] {
      const auto blocks = 1 + rng.below(n - 1);
      std::vector<std::vector<std::string>> b(blocks);
      for (const auto& l : names(n)) b[rng.below(blocks)].push_back(l);
      std::erase_if(b, [](const auto& v) { return v.empty(); });
      return clustering(b);
    };
    const auto x = random_partition();
    const auto y = random_partition();
    const double fm = fowlkes_mallows(x, y);
    const double oracle = fm_by_pairs(x, y);
    if (std::isfinite(oracle)) {
      EXPECT_NEAR(fm, oracle, 1e-12);
      EXPECT_GE(fm, 0.0);
      EXPECT_LE(fm, 1.0 + 1e-12);
    }
    EXPECT_NEAR(fm, fowlkes_mallows(y, x), 1e-12);
  }
}

TEST(FowlkesMallows, LabelSetsMustAgree) {
  EXPECT_THROW(fowlkes_mallows(clustering({{"a", "b"}}), clustering({{"a", "c"}})), std::invalid_argument);
}

TEST(Pearson, KnownValuesAndDegenerateCases) {
  const auto x = matrix({"a", "b", "c"}, {{0, 1, 2}, {1, 0, 3}, {2, 3, 0}});
  const auto y = matrix({"a", "b", "c"}, {{0, 2, 4}, {2, 0, 6}, {4, 6, 0}});
  const auto z = matrix({"a", "b", "c"}, {{0, 3, 2}, {3, 0, 1}, {2, 1, 0}});
  EXPECT_NEAR(*pearson(x, y), 1.0, 1e-12);
  EXPECT_NEAR(*pearson(x, z), -1.0, 1e-12);
  const auto flat = matrix({"a", "b", "c"}, {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  EXPECT_FALSE(pearson(x, flat).has_value());
  EXPECT_THROW(pearson(x, x.reordered({"b", "a", "c"})), std::invalid_argument);
  EXPECT_THROW(pearson(matrix({"a", "b"}, {{0, 1}, {1, 0}}), matrix({"a", "b"}, {{0, 1}, {1, 0}})), std::invalid_argument);
}

TEST(Pearson, MatchesTextbookFormula) {
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_additive(rng, 6);
    const auto b = random_ultrametric(rng, 6);
    std::vector<double> u, v;
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = i + 1; j < 6; ++j) {
        u.push_back(a(i, j));
        v.push_back(b(i, j));
      }
    }
    const double n = static_cast<double>(u.size());
    const double su = std::accumulate(u.begin(), u.end(), 0.0), sv = std::accumulate(v.begin(), v.end(), 0.0);
    double suv = 0, suu = 0, svv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      suv += u[i] * v[i];
      suu += u[i] * u[i];
      svv += v[i] * v[i];
    }
    const double r = (n * suv - su * sv) / std::sqrt((n * suu - su * su) * (n * svv - sv * sv));
    EXPECT_NEAR(*pearson(a, b), r, 1e-9);
  }
}

}  // namespace
}  // namespace rsd
