#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfw/sparse.hpp"

namespace cfw {

enum class KnnMetric { cosine, pearson, adjusted_cosine, jaccard };

KnnMetric knn_metric_from_string(const std::string& name);

struct KnnConfig {
    KnnMetric metric = KnnMetric::cosine;
    Index k = 100;
    double shrink = 0.0;
};

struct GraphConfig {
    double alpha = 1.0;         // walk exponent
    double pop_exponent = 0.0;  // RP3beta popularity penalty
    Index k = 100;
};

struct SlimConfig {
    double l1 = 1e-3;
    double l2 = 1e-3;
    double learning_rate = 0.05;
    int epochs = 50;
    Index k = 100;
    std::uint64_t seed = 42;
};

// Item-item KNN over the columns of `m` (users x items for collaborative
// KNN, features x items for content KNN). Diagonal excluded, top-k pruned
// per column.
SimilarityMatrix knn_similarity(const SparseMatrix& m, const KnnConfig& cfg);

// Two-hop random walk item -> user -> item on the binarized matrix, both
// transition matrices raised element-wise to alpha.
SimilarityMatrix p3alpha(const InteractionMatrix& urm, const GraphConfig& cfg);

// P3alpha scores divided by pop(j)^pop_exponent before pruning.
SimilarityMatrix rp3beta(const InteractionMatrix& urm, const GraphConfig& cfg);

struct SlimMseResult {
    SimilarityMatrix s;
    std::vector<Index> non_converged;  // columns that hit the epoch cap
};

// Per-column ElasticNet: min 1/2 ||r_j - R w||^2 + l1 |w|_1 + l2/2 ||w||^2
// with w_jj = 0, solved by cyclic coordinate descent with soft-thresholding.
SlimMseResult slim_mse(const InteractionMatrix& urm, const SlimConfig& cfg);

// The per-column ElasticNet objective at weights w; used for reporting.
double slim_mse_objective(const InteractionMatrix& urm, Index j,
                          const std::vector<double>& w, double l1, double l2);

// One BPR update on a dense item-item weight buffer (row-major n x n).
// user_items is the sampled user's positive item set.
void slim_bpr_step(std::vector<double>& w, Index n_items,
                   std::span<const Index> user_items, Index pos, Index neg,
                   double learning_rate, double l2);

SimilarityMatrix slim_bpr(const InteractionMatrix& urm, const SlimConfig& cfg);

}  // namespace cfw
