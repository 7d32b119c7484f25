#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "policyforge/error.hpp"
#include "policyforge/matrix.hpp"

namespace policyforge::cluster {

POLICYFORGE_DEFINE_ERROR(TooManyClusters, Validation)

enum class Algorithm { KMeans, Hdbscan };

std::string_view to_string(Algorithm algorithm);
Algorithm algorithm_from_string(std::string_view name);

struct ClusterAssignment {
  std::vector<int> labels;  // -1 marks noise (HDBSCAN only)
  int k = 0;                // number of non-noise clusters
  Algorithm algorithm = Algorithm::KMeans;
  std::map<std::string, double> params;
  // K-means: inertia of the returned partition. HDBSCAN: summed stability
  // of the selected clusters.
  double inertia_or_stability = 0.0;

  std::size_t noise_count() const;
  std::vector<std::size_t> cluster_sizes() const;
};

// ---- K-means -------------------------------------------------------------

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-6;  // max centroid shift
};

struct KMeansRun {
  // Squared-Euclidean inertia after each assignment step.
  std::vector<double> inertia_history;
  int iterations = 0;
  bool converged = false;
};

struct KMeansResult {
  ClusterAssignment assignment;
  Matrix centroids;  // row c is the centroid of label c
  std::vector<KMeansRun> runs;
  std::size_t best_run = 0;
};

// k-means++ seeding, Lloyd iterations, best of `restarts` by inertia. Rows
// are visited in lexicographic order and labels are numbered by first
// appearance in that order, so the result depends only on the point set.
KMeansResult kmeans(const Matrix& points, int n_clusters, std::uint64_t seed,
                    const KMeansOptions& options = {});

ClusterAssignment kmeans_fit(const Matrix& points, int n_clusters, std::uint64_t seed);

// ---- HDBSCAN -------------------------------------------------------------

// Distances of zero map to this density level.
inline constexpr double kLambdaCap = 1e12;

struct MstEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double weight = 0.0;
};

// Distance from each point to its `min_samples`-th nearest other point.
std::vector<double> core_distances(const Matrix& points, int min_samples);

// Prim's algorithm over mutual reachability distances
// max(core_a, core_b, d(a, b)). Returns n-1 edges in the order added.
std::vector<MstEdge> mutual_reachability_mst(const Matrix& points, int min_samples);

struct CondensedNode {
  int id = 0;
  int parent = -1;
  double birth_lambda = 0.0;
  double death_lambda = 0.0;
  std::vector<int> children;
  // Points leaving this cluster directly, with the level at which they leave.
  std::vector<std::pair<std::size_t, double>> fallen_points;
  // Every point in the cluster at birth.
  std::vector<std::size_t> members;
  double stability = 0.0;
};

struct CondensedTree {
  std::vector<CondensedNode> nodes;  // nodes[0] is the root; parents precede children
  std::size_t n_points = 0;
  int min_cluster_size = 0;
};

double lambda_of(double distance);

// Splits at equal distance are handled as one multi-way split, so the tree
// does not depend on how ties in the MST were ordered.
CondensedTree condense_tree(const std::vector<MstEdge>& mst, std::size_t n_points,
                            int min_cluster_size);

// Excess-of-mass selection over the stability of each condensed node.
ClusterAssignment select_clusters(const CondensedTree& tree);

struct HdbscanResult {
  ClusterAssignment assignment;
  CondensedTree tree;
};

// min_samples defaults to min_cluster_size and is clamped to n-1.
HdbscanResult hdbscan(const Matrix& points, int min_cluster_size,
                      std::optional<int> min_samples = std::nullopt);

ClusterAssignment hdbscan_fit(const Matrix& points, int min_cluster_size,
                              std::optional<int> min_samples = std::nullopt);

}  // namespace policyforge::cluster
