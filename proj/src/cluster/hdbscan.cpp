#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "policyforge/cluster.hpp"

namespace policyforge::cluster {

double lambda_of(double distance) {
  if (distance <= 0.0) return kLambdaCap;
  return std::min(1.0 / distance, kLambdaCap);
}

std::vector<double> core_distances(const Matrix& points, int min_samples) {
  const std::size_t n = points.rows();
  if (min_samples < 1 || static_cast<std::size_t>(min_samples) >= n) {
    throw ConfigError("min_samples must lie in [1, n-1]");
  }
  std::vector<double> core(n);
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back(euclidean_distance(points.row(i), points.row(j)));
    }
    std::nth_element(d.begin(), d.begin() + (min_samples - 1), d.end());
    core[i] = d[static_cast<std::size_t>(min_samples - 1)];
  }
  return core;
}

std::vector<MstEdge> mutual_reachability_mst(const Matrix& points, int min_samples) {
  const std::size_t n = points.rows();
  const auto core = core_distances(points, min_samples);
  auto mreach = [&](std::size_t a, std::size_t b) {
    return std::max({core[a], core[b], euclidean_distance(points.row(a), points.row(b))});
  };

  std::vector<bool> in_tree(n, false);
  std::vector<double> key(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::vector<MstEdge> edges;
  in_tree[0] = true;
  for (std::size_t j = 1; j < n; ++j) {
    key[j] = mreach(0, j);
    from[j] = 0;
  }
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t pick = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      if (pick == n) {
        pick = j;
        continue;
      }
      const auto cand = std::make_tuple(key[j], std::min(j, from[j]), std::max(j, from[j]));
      const auto cur = std::make_tuple(key[pick], std::min(pick, from[pick]), std::max(pick, from[pick]));
      if (cand < cur) pick = j;
    }
    in_tree[pick] = true;
    edges.push_back({std::min(pick, from[pick]), std::max(pick, from[pick]), key[pick]});
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double w = mreach(pick, j);
      if (w < key[j] || (w == key[j] && std::minmax(pick, j) < std::minmax(from[j], j))) {
        key[j] = w;
        from[j] = pick;
      }
    }
  }
  return edges;
}

namespace {

struct DNode {
  double distance = 0.0;
  std::vector<int> children;
  std::size_t size = 1;
};

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Single-linkage dendrogram in which all merges at one distance become a
// single node.
std::vector<DNode> dendrogram(std::vector<MstEdge> mst, std::size_t n, int& root) {
  std::vector<DNode> nodes(n);
  std::sort(mst.begin(), mst.end(), [](const MstEdge& x, const MstEdge& y) {
    return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
  });
  UnionFind uf(n);
  std::vector<int> node_of(n);
  std::iota(node_of.begin(), node_of.end(), 0);
  std::size_t g = 0;
  while (g < mst.size()) {
    std::size_t h = g;
    while (h < mst.size() && mst[h].weight == mst[g].weight) ++h;
    std::vector<std::size_t> old_roots;
    for (std::size_t e = g; e < h; ++e) {
      old_roots.push_back(uf.find(mst[e].a));
      old_roots.push_back(uf.find(mst[e].b));
    }
    std::sort(old_roots.begin(), old_roots.end());
    old_roots.erase(std::unique(old_roots.begin(), old_roots.end()), old_roots.end());
    std::vector<int> old_nodes;
    for (auto r : old_roots) old_nodes.push_back(node_of[r]);
    for (std::size_t e = g; e < h; ++e) uf.unite(mst[e].a, mst[e].b);
    std::map<std::size_t, std::vector<int>> groups;
    for (std::size_t t = 0; t < old_roots.size(); ++t) groups[uf.find(old_roots[t])].push_back(old_nodes[t]);
    for (auto& [new_root, kids] : groups) {
      DNode d;
      d.distance = mst[g].weight;
      d.size = 0;
      for (int c : kids) d.size += nodes[static_cast<std::size_t>(c)].size;
      d.children = std::move(kids);
      nodes.push_back(std::move(d));
      node_of[new_root] = static_cast<int>(nodes.size() - 1);
    }
    g = h;
  }
  root = n == 0 ? -1 : node_of[uf.find(0)];
  return nodes;
}

void collect_points(const std::vector<DNode>& nodes, int d, std::size_t n, std::vector<std::size_t>& out) {
  std::vector<int> stack{d};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    if (static_cast<std::size_t>(cur) < n) {
      out.push_back(static_cast<std::size_t>(cur));
      continue;
    }
    for (int c : nodes[static_cast<std::size_t>(cur)].children) stack.push_back(c);
  }
}

struct Condenser {
  const std::vector<DNode>& nodes;
  std::size_t n;
  std::size_t mcs;
  CondensedTree& tree;

  void fall_out(int d, int cluster, double lambda) {
    std::vector<std::size_t> pts;
    collect_points(nodes, d, n, pts);
    auto& c = tree.nodes[static_cast<std::size_t>(cluster)];
    for (auto p : pts) c.fallen_points.emplace_back(p, lambda);
  }

  void process(int d, int cluster) {
    if (static_cast<std::size_t>(d) < n) {
      fall_out(d, cluster, tree.nodes[static_cast<std::size_t>(cluster)].birth_lambda);
      return;
    }
    const DNode& node = nodes[static_cast<std::size_t>(d)];
    const double lambda = lambda_of(node.distance);
    std::vector<int> big;
    for (int c : node.children) {
      if (nodes[static_cast<std::size_t>(c)].size >= mcs) big.push_back(c);
    }
    if (big.size() >= 2) {
      for (int c : node.children) {
        if (nodes[static_cast<std::size_t>(c)].size < mcs) {
          fall_out(c, cluster, lambda);
          continue;
        }
        CondensedNode child;
        child.id = static_cast<int>(tree.nodes.size());
        child.parent = cluster;
        child.birth_lambda = lambda;
        collect_points(nodes, c, n, child.members);
        std::sort(child.members.begin(), child.members.end());
        tree.nodes[static_cast<std::size_t>(cluster)].children.push_back(child.id);
        tree.nodes.push_back(std::move(child));
        process(c, static_cast<int>(tree.nodes.size() - 1));
      }
    } else if (big.size() == 1) {
      for (int c : node.children) {
        if (c != big.front()) fall_out(c, cluster, lambda);
      }
      process(big.front(), cluster);
    } else {
      fall_out(d, cluster, lambda);
    }
  }
};

}  // namespace

CondensedTree condense_tree(const std::vector<MstEdge>& mst, std::size_t n_points, int min_cluster_size) {
  if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
  if (n_points > 0 && mst.size() != n_points - 1) throw ConfigError("MST must have n-1 edges");
  CondensedTree tree;
  tree.n_points = n_points;
  tree.min_cluster_size = min_cluster_size;
  if (n_points == 0) return tree;

  int root = -1;
  const auto nodes = dendrogram(mst, n_points, root);
  CondensedNode r;
  r.id = 0;
  r.members.resize(n_points);
  std::iota(r.members.begin(), r.members.end(), 0);
  tree.nodes.push_back(std::move(r));
  Condenser{nodes, n_points, static_cast<std::size_t>(min_cluster_size), tree}.process(root, 0);

  for (auto& c : tree.nodes) {
    double s = 0.0;
    double death = c.birth_lambda;
    for (const auto& [p, lam] : c.fallen_points) {
      s += lam - c.birth_lambda;
      death = std::max(death, lam);
    }
    for (int child : c.children) {
      const auto& ch = tree.nodes[static_cast<std::size_t>(child)];
      s += static_cast<double>(ch.members.size()) * (ch.birth_lambda - c.birth_lambda);
      death = std::max(death, ch.birth_lambda);
    }
    c.stability = s;
    c.death_lambda = death;
  }
  return tree;
}

ClusterAssignment select_clusters(const CondensedTree& tree) {
  ClusterAssignment out;
  out.algorithm = Algorithm::Hdbscan;
  out.params["min_cluster_size"] = tree.min_cluster_size;
  out.labels.assign(tree.n_points, -1);
  if (tree.nodes.empty()) return out;

  const auto& root = tree.nodes.front();
  if (root.children.empty()) {
    if (root.members.size() >= static_cast<std::size_t>(tree.min_cluster_size) && tree.n_points > 0) {
      for (auto p : root.members) out.labels[p] = 0;
      out.k = 1;
      out.inertia_or_stability = root.stability;
    }
    return out;
  }

  const std::size_t m = tree.nodes.size();
  std::vector<bool> selected(m, false);
  std::vector<double> subtree(m, 0.0);
  for (std::size_t i = m; i-- > 1;) {
    const auto& c = tree.nodes[i];
    if (c.children.empty()) {
      selected[i] = true;
      subtree[i] = c.stability;
      continue;
    }
    double child_sum = 0.0;
    for (int ch : c.children) child_sum += subtree[static_cast<std::size_t>(ch)];
    if (c.stability > child_sum) {
      selected[i] = true;
      subtree[i] = c.stability;
      std::vector<int> stack(c.children.begin(), c.children.end());
      while (!stack.empty()) {
        const auto d = static_cast<std::size_t>(stack.back());
        stack.pop_back();
        selected[d] = false;
        for (int g : tree.nodes[d].children) stack.push_back(g);
      }
    } else {
      subtree[i] = child_sum;
    }
  }

  std::vector<std::size_t> chosen;
  for (std::size_t i = 1; i < m; ++i) {
    if (selected[i]) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    return tree.nodes[a].members.front() < tree.nodes[b].members.front();
  });
  int label = 0;
  for (auto i : chosen) {
    for (auto p : tree.nodes[i].members) out.labels[p] = label;
    out.inertia_or_stability += tree.nodes[i].stability;
    ++label;
  }
  out.k = label;
  return out;
}

HdbscanResult hdbscan(const Matrix& points, int min_cluster_size, std::optional<int> min_samples) {
  if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
  const std::size_t n = points.rows();
  if (n == 0) throw ConfigError("HDBSCAN needs at least one point");
  HdbscanResult r;
  if (n == 1) {
    r.tree = condense_tree({}, 1, min_cluster_size);
  } else {
    int ms = min_samples.value_or(min_cluster_size);
    if (ms < 1) throw ConfigError("min_samples must be >= 1");
    ms = std::min(ms, static_cast<int>(n - 1));
    r.tree = condense_tree(mutual_reachability_mst(points, ms), n, min_cluster_size);
    r.assignment.params["min_samples"] = ms;
  }
  auto params = r.assignment.params;
  r.assignment = select_clusters(r.tree);
  for (auto& [k, v] : params) r.assignment.params[k] = v;
  return r;
}

ClusterAssignment hdbscan_fit(const Matrix& points, int min_cluster_size, std::optional<int> min_samples) {
  return hdbscan(points, min_cluster_size, min_samples).assignment;
}

}  // namespace policyforge::cluster
