#pragma once

#include <cstdint>
#include <vector>

#include "policyforge/error.hpp"
#include "policyforge/matrix.hpp"

namespace policyforge::reduce {

POLICYFORGE_DEFINE_ERROR(TooFewPoints, Validation)

struct UmapConfig {
  int n_neighbors = 15;
  int n_components = 5;
  double min_dist = 0.1;
  double spread = 1.0;
  int n_epochs = 200;
  double learning_rate = 1.0;
  int negative_samples = 5;
  std::uint64_t seed = 42;
};

// Throws ConfigError / TooFewPoints when the config cannot be fit to data of
// the given shape.
void validate(const UmapConfig& config, std::size_t n_points, std::size_t input_dim);

struct KnnGraph {
  std::size_t k = 0;
  // indices[i][r] is the r-th nearest neighbour of i (self excluded).
  std::vector<std::vector<std::size_t>> indices;
  std::vector<std::vector<double>> distances;
};

// Exact Euclidean kNN; ties go to the lower index.
KnnGraph knn_graph(const Matrix& points, int k);

struct FuzzyEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 0.0;
};

struct FuzzyGraph {
  std::size_t n_points = 0;
  // Symmetric: every (i, j, w) has a matching (j, i, w). Sorted by (i, j).
  std::vector<FuzzyEdge> edges;
  std::vector<double> rho;
  std::vector<double> sigma;
  // |sum_j exp(-max(0, d_ij - rho_i) / sigma_i) - log2(k)| per point.
  std::vector<double> sigma_residual;

  double weight(std::size_t i, std::size_t j) const;  // 0 when absent
};

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn, int n_neighbors);

// Low-dimensional similarity 1 / (1 + a * d^(2b)).
struct CurveParams {
  double a = 1.0;
  double b = 1.0;
};

// Least-squares fit of the similarity curve to the min_dist/spread target on
// 300 points of [0, 3 * spread].
CurveParams fit_curve(double min_dist, double spread = 1.0);

double low_dim_similarity(double distance, CurveParams curve);

// Sum over undirected edges of
//   w_h ln(w_h / w_l) + (1 - w_h) ln((1 - w_h) / (1 - w_l))
// with every logarithm taken of max(x, eps).
double cross_entropy(const FuzzyGraph& graph, const Matrix& points, double a, double b,
                     double eps = 1e-4);

struct Embedding2 {
  Matrix points;
  UmapConfig config;
  CurveParams curve;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // one entry per epoch
};

Embedding2 optimize_layout(const FuzzyGraph& graph, const UmapConfig& config);

Embedding2 umap_fit(const Matrix& points, const UmapConfig& config);

}  // namespace policyforge::reduce
