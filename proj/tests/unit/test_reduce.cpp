#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "policyforge/random.hpp"
#include "policyforge/reduce.hpp"
#include "support.hpp"

using namespace policyforge;
using namespace policyforge::reduce;

namespace {

Matrix two_blobs(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < 30; ++i) {
      std::vector<double> r(10);
      for (auto& v : r) v = rng.normal();
      r[0] += b * 20.0;
      rows.push_back(r);
    }
  }
  return Matrix::from_rows(rows);
}

double separation(const Matrix& e) {
  std::vector<double> intra, inter;
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t j = i + 1; j < e.rows(); ++j) {
      const double d = euclidean_distance(e.row(i), e.row(j));
      ((i < 30) == (j < 30) ? intra : inter).push_back(d);
    }
  }
  std::nth_element(intra.begin(), intra.begin() + static_cast<long>(intra.size() / 2), intra.end());
  const double median = intra[intra.size() / 2];
  const auto above = std::count_if(inter.begin(), inter.end(), [&](double d) { return d > median; });
  return static_cast<double>(above) / static_cast<double>(inter.size());
}

}  // namespace

TEST_CASE("knn graph") {
  const auto g = knn_graph(Matrix::from_rows({{0.0}, {1.0}, {3.0}}), 1);
  CHECK(g.indices[0][0] == 1);
  CHECK(g.indices[1][0] == 0);
  CHECK(g.indices[2][0] == 1);

  const auto full = knn_graph(Matrix::from_rows({{0.0}, {1.0}, {3.0}, {7.0}}), 3);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(full.indices[i].size() == 3);
    CHECK(std::find(full.indices[i].begin(), full.indices[i].end(), i) == full.indices[i].end());
  }

  const auto dup = knn_graph(Matrix::from_rows({{0.0}, {0.0}, {5.0}}), 1);
  CHECK(dup.distances[0][0] == 0.0);
  CHECK_THROWS_AS(knn_graph(Matrix::from_rows({{0.0}, {1.0}}), 2), TooFewPoints);
}

TEST_CASE("fuzzy set on four points matches the oracle") {
  const auto o = testing::oracle("umap.json")["fuzzy"];
  const int k = o["n_neighbors"];
  const auto g = fuzzy_simplicial_set(knn_graph(testing::matrix(o["points"]), k), k);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(g.rho[i] - o["rho"][i].get<double>()) < 1e-12);
    CHECK(std::abs(g.sigma[i] - o["sigma"][i].get<double>()) < 1e-3 * o["sigma"][i].get<double>());
    CHECK(g.sigma_residual[i] < 1e-4);
  }
  std::size_t n_union = 0;
  for (const auto& [key, w] : o["union"].items()) {
    const auto i = std::stoul(key.substr(0, key.find('-')));
    const auto j = std::stoul(key.substr(key.find('-') + 1));
    INFO(key);
    CHECK(std::abs(g.weight(i, j) - w.get<double>()) < 1e-4);
    CHECK(g.weight(i, j) == g.weight(j, i));
    ++n_union;
  }
  CHECK(g.edges.size() == 2 * n_union);
}

TEST_CASE("fuzzy set invariants") {
  const auto pts = two_blobs(3);
  const auto g = fuzzy_simplicial_set(knn_graph(pts, 8), 8);
  for (const auto& e : g.edges) {
    CHECK(e.i != e.j);
    CHECK(e.weight > 0.0);
    CHECK(e.weight <= 1.0);
    CHECK(g.weight(e.j, e.i) == e.weight);
  }
  for (double r : g.sigma_residual) CHECK(r < 1e-4);

  // nearest neighbour gets directed weight one, so its union weight is one too
  const auto knn = knn_graph(pts, 8);
  for (std::size_t i = 0; i < pts.rows(); ++i) CHECK(std::abs(g.weight(i, knn.indices[i][0]) - 1.0) < 1e-12);

  // reversing the row order permutes the weights
  std::vector<std::vector<double>> rev;
  for (std::size_t i = pts.rows(); i-- > 0;) rev.emplace_back(pts.row(i).begin(), pts.row(i).end());
  const auto gr = fuzzy_simplicial_set(knn_graph(Matrix::from_rows(rev), 8), 8);
  const std::size_t n = pts.rows();
  for (const auto& e : g.edges) CHECK(std::abs(gr.weight(n - 1 - e.i, n - 1 - e.j) - e.weight) < 1e-12);
}

TEST_CASE("layout determinism and loss") {
  const auto pts = two_blobs(7);
  UmapConfig cfg;
  cfg.n_neighbors = 10;
  cfg.n_components = 2;
  cfg.seed = 7;
  const auto a = umap_fit(pts, cfg);
  const auto b = umap_fit(pts, cfg);
  CHECK(a.points == b.points);
  CHECK(a.final_loss == b.final_loss);
  for (double v : a.points.data()) CHECK(std::isfinite(v));

  REQUIRE(a.loss_history.size() == static_cast<std::size_t>(cfg.n_epochs));
  auto avg = [&](std::size_t from) {
    double s = 0;
    for (std::size_t i = from; i < from + 10; ++i) s += a.loss_history[i];
    return s / 10.0;
  };
  CHECK(avg(a.loss_history.size() - 10) <= avg(0));

  cfg.n_epochs = 0;
  const auto graph = fuzzy_simplicial_set(knn_graph(pts, cfg.n_neighbors), cfg.n_neighbors);
  const auto init = optimize_layout(graph, cfg);
  for (double v : init.points.data()) {
    CHECK(v >= -10.0);
    CHECK(v <= 10.0);
  }
  CHECK(optimize_layout(graph, cfg).points == init.points);
}

TEST_CASE("two blobs stay apart") {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    UmapConfig cfg;
    cfg.seed = seed;
    cfg.n_components = 2;
    const auto e = umap_fit(two_blobs(seed), cfg);
    INFO(seed);
    CHECK(separation(e.points) >= 0.95);
  }
}

TEST_CASE("config validation") {
  UmapConfig cfg;
  CHECK_THROWS_AS(validate(cfg, 10, 20), TooFewPoints);
  cfg.n_neighbors = 3;
  CHECK_NOTHROW(validate(cfg, 10, 20));
  CHECK_THROWS_AS(validate(cfg, 10, 5), ConfigError);
  cfg.min_dist = 0.0;
  CHECK_THROWS_AS(validate(cfg, 10, 20), ConfigError);
}
