#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfw/sparse.hpp"

namespace cfw {

/// Learned feature weights: diagonal d (length n_F) plus an optional
/// low-rank block v (n_latent x n_F, row-major). n_latent == 0 is the
/// diagonal-only model; v stays empty on that path.
struct FeatureWeights {
    std::vector<double> d;
    std::vector<double> v;
    Index n_latent = 0;

    Index n_features() const { return static_cast<Index>(d.size()); }
    double v_at(Index l, Index f) const {
        return v[static_cast<std::size_t>(l) * d.size() + f];
    }
};

struct CfwTrainConfig {
    Index n_latent = 0;
    double lambda = 0.0;  // diagonal regularization
    double beta = 0.0;    // latent block regularization
    double learning_rate = 0.05;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 100;
    double zero_sample_ratio = 1.0;  // zero pairs sampled per nonzero, per epoch
    bool symmetrize_target = true;
    bool squared_reg = true;  // squared Frobenius norms (toggle for plain norms)
    bool clamp_nonnegative = false;
    int batch_size = 128;
    std::uint64_t seed = 42;
};

struct AdamState {
    std::vector<double> m_d, v_d;  // first/second moments for d
    std::vector<double> m_v, v_v;  // first/second moments for v
    long step_count = 0;
};

struct TrainTrace {
    std::vector<double> mse_term;
    std::vector<double> reg_term;
    std::vector<std::size_t> pair_count;
};

struct ItemPair {
    Index i;
    Index j;
};

// f_i^T (diag(d) + V^T V) f_j over the sparse feature rows.
double bilinear_similarity(const FeatureMatrix& icm, const FeatureWeights& w,
                           Index i, Index j);

// (mse_term, reg_term) of the fit objective over the given pair set.
std::pair<double, double> cfw_loss(const FeatureWeights& w,
                                   const SimilarityMatrix& target,
                                   const FeatureMatrix& icm,
                                   std::span<const ItemPair> pairs,
                                   const CfwTrainConfig& cfg);

// Accumulates the analytic gradient into grad_d / grad_v (resized and
// zeroed here). reg_scale multiplies the regularization part, so
// mini-batches can spread it across an epoch.
void cfw_gradients(const FeatureWeights& w, const SimilarityMatrix& target,
                   const FeatureMatrix& icm, std::span<const ItemPair> pairs,
                   const CfwTrainConfig& cfg, std::vector<double>& grad_d,
                   std::vector<double>& grad_v, double reg_scale = 1.0);

// Bias-corrected Adam update applied jointly to d and v.
void adam_step(AdamState& state, FeatureWeights& w,
               const std::vector<double>& grad_d,
               const std::vector<double>& grad_v, const CfwTrainConfig& cfg);

// Two-step wrapper training: fit d (and v when n_latent > 0) so the
// weighted content similarity approximates the collaborative target.
std::pair<FeatureWeights, TrainTrace> train_cfw(const SimilarityMatrix& target,
                                                const FeatureMatrix& icm,
                                                const CfwTrainConfig& cfg);

// Scores every item pair with shared feature support, diagonal excluded,
// top-k pruned per column. The latent part goes through the n_latent-dim
// projections V f_i rather than feature-space work.
SimilarityMatrix weighted_content_similarity(const FeatureMatrix& icm,
                                             const FeatureWeights& w, Index k);

// One BPR ascent step for the bilinear model; exposed for the trainer and
// its tests. user_items is the user's positive support.
void fbsm_bpr_step(FeatureWeights& w, const FeatureMatrix& icm,
                   std::span<const Index> user_items, Index pos, Index neg,
                   const CfwTrainConfig& cfg);

// FBSM baseline: bilinear weights trained directly on interactions with a
// BPR loss, sharing the CFW inference path.
FeatureWeights train_fbsm(const InteractionMatrix& urm, const FeatureMatrix& icm,
                          const CfwTrainConfig& cfg);

// Seeded default initialization: d ~ U[0, 0.1], v ~ N(0, 0.01/sqrt(n_L)).
FeatureWeights init_weights(Index n_features, Index n_latent, std::uint64_t seed);

// Versioned TSV dump; round-trips doubles exactly.
void save_weights(const std::string& path, const FeatureWeights& w);
FeatureWeights load_weights(const std::string& path);

}  // namespace cfw
