#include "policyforge/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "policyforge/random.hpp"

namespace policyforge::reduce {

namespace {

constexpr double kSigmaTolerance = 1e-5;
constexpr int kSigmaIterations = 64;
constexpr double kGradientClip = 4.0;

double clip(double v) { return std::clamp(v, -kGradientClip, kGradientClip); }

double safe_log(double x, double eps) { return std::log(std::max(x, eps)); }

}  // namespace

void validate(const UmapConfig& c, std::size_t n_points, std::size_t input_dim) {
  if (c.n_neighbors < 2) throw ConfigError("n_neighbors must be >= 2");
  if (c.n_components < 2) throw ConfigError("n_components must be >= 2");
  if (!(c.min_dist > 0.0 && c.min_dist <= 1.0)) throw ConfigError("min_dist must lie in (0, 1]");
  if (!(c.spread > 0.0)) throw ConfigError("spread must be > 0");
  if (c.n_epochs < 0) throw ConfigError("n_epochs must be >= 0");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (c.negative_samples < 0) throw ConfigError("negative_samples must be >= 0");
  if (static_cast<std::size_t>(c.n_neighbors) >= n_points) {
    throw TooFewPoints("n_neighbors=" + std::to_string(c.n_neighbors) + " needs more than " +
                       std::to_string(n_points) + " points");
  }
  if (static_cast<std::size_t>(c.n_components) >= input_dim) {
    throw ConfigError("n_components=" + std::to_string(c.n_components) +
                      " must be below the input dimension " + std::to_string(input_dim));
  }
}

KnnGraph knn_graph(const Matrix& points, int k) {
  const std::size_t n = points.rows();
  if (k < 1 || static_cast<std::size_t>(k) >= n) {
    throw TooFewPoints("knn with k=" + std::to_string(k) + " needs more than " + std::to_string(n) +
                       " points");
  }
  KnnGraph g;
  g.k = static_cast<std::size_t>(k);
  g.indices.resize(n);
  g.distances.resize(n);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back(euclidean_distance(points.row(i), points.row(j)), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int r = 0; r < k; ++r) {
      g.indices[i].push_back(cand[r].second);
      g.distances[i].push_back(cand[r].first);
    }
  }
  return g;
}

double FuzzyGraph::weight(std::size_t i, std::size_t j) const {
  auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(i, j),
                             [](const FuzzyEdge& e, const std::pair<std::size_t, std::size_t>& key) {
                               return std::make_pair(e.i, e.j) < key;
                             });
  if (it != edges.end() && it->i == i && it->j == j) return it->weight;
  return 0.0;
}

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn, int n_neighbors) {
  if (n_neighbors < 2) throw ConfigError("n_neighbors must be >= 2");
  const std::size_t n = knn.indices.size();
  const double target = std::log2(static_cast<double>(n_neighbors));

  FuzzyGraph g;
  g.n_points = n;
  g.rho.assign(n, 0.0);
  g.sigma.assign(n, 1.0);
  g.sigma_residual.assign(n, 0.0);

  std::map<std::pair<std::size_t, std::size_t>, double> directed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& dist = knn.distances[i];
    double rho = 0.0;
    for (double d : dist) {
      if (d > 0.0) {
        rho = d;
        break;
      }
    }
    auto membership_sum = [&](double sigma) {
      double s = 0.0;
      for (double d : dist) s += std::exp(-std::max(0.0, d - rho) / sigma);
      return s;
    };
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    for (int iter = 0; iter < kSigmaIterations; ++iter) {
      const double s = membership_sum(mid);
      if (std::abs(s - target) < kSigmaTolerance) break;
      if (s > target) {
        hi = mid;
        mid = (lo + hi) / 2.0;
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
      }
    }
    g.rho[i] = rho;
    g.sigma[i] = mid;
    g.sigma_residual[i] = std::abs(membership_sum(mid) - target);
    for (std::size_t r = 0; r < dist.size(); ++r) {
      const double w = std::exp(-std::max(0.0, dist[r] - rho) / mid);
      if (w > 0.0) directed[{i, knn.indices[i][r]}] = w;
    }
  }

  std::map<std::pair<std::size_t, std::size_t>, double> undirected;
  for (const auto& [key, w] : directed) {
    const auto [i, j] = key;
    if (i == j) continue;
    const auto lo_hi = std::minmax(i, j);
    if (undirected.count(lo_hi)) continue;
    auto other = directed.find({j, i});
    const double b = other == directed.end() ? 0.0 : other->second;
    const double a = w;
    undirected[lo_hi] = a + b - a * b;
  }
  for (const auto& [key, w] : undirected) {
    g.edges.push_back({key.first, key.second, w});
    g.edges.push_back({key.second, key.first, w});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const FuzzyEdge& a, const FuzzyEdge& b) {
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
  return g;
}

double low_dim_similarity(double distance, CurveParams curve) {
  return 1.0 / (1.0 + curve.a * std::pow(distance, 2.0 * curve.b));
}

CurveParams fit_curve(double min_dist, double spread) {
  constexpr int kSamples = 300;
  std::vector<double> xs(kSamples), ys(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    xs[i] = 3.0 * spread * i / (kSamples - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  auto sse = [&](double a, double b) {
    double s = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b)) - ys[i];
      s += r * r;
    }
    return s;
  };

  // Levenberg-Marquardt on (a, b) starting from (1, 1).
  double a = 1.0, b = 1.0, lambda = 1e-3;
  double cost = sse(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    double jtj00 = 0, jtj01 = 0, jtj11 = 0, jtr0 = 0, jtr1 = 0;
    for (int i = 0; i < kSamples; ++i) {
      const double x = xs[i];
      const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * p;
      const double g = 1.0 / denom;
      const double r = g - ys[i];
      const double da = -p / (denom * denom);
      const double db = x > 0.0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
      jtj00 += da * da;
      jtj01 += da * db;
      jtj11 += db * db;
      jtr0 += da * r;
      jtr1 += db * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      const double m00 = jtj00 * (1.0 + lambda);
      const double m11 = jtj11 * (1.0 + lambda);
      const double det = m00 * m11 - jtj01 * jtj01;
      if (det == 0.0) {
        lambda *= 10.0;
        continue;
      }
      const double step_a = -(m11 * jtr0 - jtj01 * jtr1) / det;
      const double step_b = -(m00 * jtr1 - jtj01 * jtr0) / det;
      const double na = a + step_a, nb = b + step_b;
      const double nc = (na > 0.0 && nb > 0.0) ? sse(na, nb) : std::numeric_limits<double>::infinity();
      if (nc < cost) {
        const double rel = (cost - nc) / std::max(cost, 1e-300);
        a = na;
        b = nb;
        cost = nc;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (rel < 1e-15) return {a, b};
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return {a, b};
}

double cross_entropy(const FuzzyGraph& graph, const Matrix& points, double a, double b, double eps) {
  const CurveParams curve{a, b};
  double total = 0.0;
  for (const auto& e : graph.edges) {
    if (e.i >= e.j) continue;  // each undirected edge once
    const double wh = e.weight;
    const double wl = low_dim_similarity(euclidean_distance(points.row(e.i), points.row(e.j)), curve);
    total += wh * (safe_log(wh, eps) - safe_log(wl, eps)) +
             (1.0 - wh) * (safe_log(1.0 - wh, eps) - safe_log(1.0 - wl, eps));
  }
  return total;
}

Embedding2 optimize_layout(const FuzzyGraph& graph, const UmapConfig& config) {
  if (graph.n_points == 0) throw TooFewPoints("cannot lay out an empty graph");
  if (config.n_components < 1) throw ConfigError("n_components must be positive");
  const std::size_t n = graph.n_points;
  const std::size_t dim = static_cast<std::size_t>(config.n_components);

  Embedding2 out;
  out.config = config;
  out.curve = fit_curve(config.min_dist, config.spread);
  const double a = out.curve.a, b = out.curve.b;

  Rng rng(config.seed);
  out.points = Matrix(n, dim);
  for (auto& x : out.points.data()) x = rng.uniform(-10.0, 10.0);

  std::vector<bool> connected(n, false);
  for (const auto& e : graph.edges) connected[e.i] = connected[e.j] = true;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    if (connected[i]) {
      active.push_back(i);
    } else {
      for (auto& x : out.points.row(i)) x = 0.0;
    }
  }

  std::vector<int> period(graph.edges.size());
  std::vector<long> next_epoch(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    period[e] = static_cast<int>(std::ceil(1.0 / graph.edges[e].weight));
    next_epoch[e] = period[e];
  }

  Matrix& y = out.points;
  for (int epoch = 0; epoch < config.n_epochs; ++epoch) {
    const double alpha = config.learning_rate * (1.0 - static_cast<double>(epoch) / config.n_epochs);
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      if (next_epoch[e] > epoch + 1) continue;
      next_epoch[e] += period[e];
      const std::size_t i = graph.edges[e].i, j = graph.edges[e].j;

      auto yi = y.row(i);
      auto yj = y.row(j);
      const double d2 = squared_distance(yi, yj);
      if (d2 > 0.0) {
        const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (1.0 + a * std::pow(d2, b));
        for (std::size_t d = 0; d < dim; ++d) {
          const double g = clip(coeff * (yi[d] - yj[d]));
          yi[d] += g * alpha;
          yj[d] -= g * alpha;
        }
      }

      for (int s = 0; s < config.negative_samples; ++s) {
        const std::size_t k = active[rng.index(active.size())];
        if (k == i) continue;
        auto yk = y.row(k);
        const double dk2 = squared_distance(yi, yk);
        if (dk2 <= 0.0) continue;
        const double coeff = 2.0 * b / ((0.001 + dk2) * (1.0 + a * std::pow(dk2, b)));
        for (std::size_t d = 0; d < dim; ++d) yi[d] += clip(coeff * (yi[d] - yk[d])) * alpha;
      }
    }
    out.loss_history.push_back(cross_entropy(graph, y, a, b));
  }
  out.final_loss = out.loss_history.empty() ? cross_entropy(graph, y, a, b) : out.loss_history.back();
  return out;
}

Embedding2 umap_fit(const Matrix& points, const UmapConfig& config) {
  validate(config, points.rows(), points.cols());
  const auto knn = knn_graph(points, config.n_neighbors);
  const auto graph = fuzzy_simplicial_set(knn, config.n_neighbors);
  return optimize_layout(graph, config);
}

}  // namespace policyforge::reduce
