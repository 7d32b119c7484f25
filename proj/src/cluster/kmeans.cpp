#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "policyforge/cluster.hpp"
#include "policyforge/random.hpp"

namespace policyforge::cluster {

std::string_view to_string(Algorithm algorithm) {
  return algorithm == Algorithm::KMeans ? "kmeans" : "hdbscan";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "kmeans") return Algorithm::KMeans;
  if (name == "hdbscan") return Algorithm::Hdbscan;
  throw ConfigError("unknown clustering algorithm '" + std::string(name) + "'");
}

std::size_t ClusterAssignment::noise_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
}

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (int l : labels) {
    if (l >= 0 && l < k) ++sizes[static_cast<std::size_t>(l)];
  }
  return sizes;
}

namespace {

struct Lloyd {
  const Matrix& x;
  std::size_t k;
  Matrix centroids;
  std::vector<int> labels;

  double assign() {
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(x.row(i), centroids.row(c));
        if (d < best) {
          best = d;
          arg = static_cast<int>(c);
        }
      }
      labels[i] = arg;
      inertia += best;
    }
    return inertia;
  }

  // Recomputes means; an empty cluster is reseeded at the point farthest
  // from its own new centroid. Returns the largest centroid shift.
  double update() {
    const std::size_t dim = x.cols();
    Matrix next(k, dim);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      ++count[c];
      auto row = next.row(c);
      auto xi = x.row(i);
      for (std::size_t d = 0; d < dim; ++d) row[d] += xi[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;
      for (auto& v : next.row(c)) v /= static_cast<double>(count[c]);
    }
    std::vector<bool> used(x.rows(), false);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] != 0) continue;
      double far = -1.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        if (used[i]) continue;
        const auto own = static_cast<std::size_t>(labels[i]);
        if (count[own] <= 1) continue;  // moving it would empty its cluster
        const double d = squared_distance(x.row(i), next.row(own));
        if (d > far) {
          far = d;
          arg = i;
        }
      }
      if (far < 0.0) continue;
      used[arg] = true;
      --count[static_cast<std::size_t>(labels[arg])];
      ++count[c];
      std::copy(x.row(arg).begin(), x.row(arg).end(), next.row(c).begin());
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, euclidean_distance(centroids.row(c), next.row(c)));
    }
    centroids = std::move(next);
    return shift;
  }
};

Matrix plus_plus_seed(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix c(k, x.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t m = 0; m < k; ++m) {
    if (m > 0) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n;
        std::size_t last_positive = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          last_positive = i;
          acc += d2[i];
          if (acc > target) {
            pick = i;
            break;
          }
        }
        if (pick == n) pick = last_positive;
      } else {
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
      }
    }
    chosen[pick] = true;
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(m).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), c.row(m)));
    }
  }
  return c;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int n_clusters, std::uint64_t seed,
                    const KMeansOptions& options) {
  const std::size_t n = points.rows();
  if (n == 0) throw ConfigError("k-means needs at least one point");
  if (n_clusters < 1) throw ConfigError("n_clusters must be >= 1");
  if (static_cast<std::size_t>(n_clusters) > n) {
    throw TooManyClusters("n_clusters=" + std::to_string(n_clusters) + " exceeds " +
                          std::to_string(n) + " points");
  }
  if (options.restarts < 1 || options.max_iterations < 1) {
    throw ConfigError("restarts and max_iterations must be >= 1");
  }
  const auto k = static_cast<std::size_t>(n_clusters);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = points.row(a);
    auto rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  Matrix x(n, points.cols());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(points.row(order[i]).begin(), points.row(order[i]).end(), x.row(i).begin());
  }

  KMeansResult result;
  double best_inertia = std::numeric_limits<double>::infinity();
  std::vector<int> best_labels;
  Matrix best_centroids;
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(mix64(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r + 1)));
    Lloyd lloyd{x, k, plus_plus_seed(x, k, rng), std::vector<int>(n, 0)};
    KMeansRun run;
    run.inertia_history.push_back(lloyd.assign());
    for (int it = 0; it < options.max_iterations; ++it) {
      const double shift = lloyd.update();
      run.inertia_history.push_back(lloyd.assign());
      run.iterations = it + 1;
      if (shift < options.tolerance) {
        run.converged = true;
        break;
      }
    }
    const double inertia = run.inertia_history.back();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_labels = lloyd.labels;
      best_centroids = lloyd.centroids;
      result.best_run = static_cast<std::size_t>(r);
    }
    result.runs.push_back(std::move(run));
  }

  // Relabel by first appearance in canonical order.
  std::vector<int> remap(k, -1);
  int next = 0;
  for (int l : best_labels) {
    if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = next++;
  }
  for (auto& m : remap) {
    if (m < 0) m = next++;
  }
  result.centroids = Matrix(k, points.cols());
  for (std::size_t c = 0; c < k; ++c) {
    auto src = best_centroids.row(c);
    std::copy(src.begin(), src.end(), result.centroids.row(static_cast<std::size_t>(remap[c])).begin());
  }
  auto& a = result.assignment;
  a.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) a.labels[order[i]] = remap[static_cast<std::size_t>(best_labels[i])];
  a.k = n_clusters;
  a.algorithm = Algorithm::KMeans;
  a.params["k"] = n_clusters;
  a.inertia_or_stability = best_inertia;
  return result;
}

ClusterAssignment kmeans_fit(const Matrix& points, int n_clusters, std::uint64_t seed) {
  return kmeans(points, n_clusters, seed).assignment;
}

}  // namespace policyforge::cluster
