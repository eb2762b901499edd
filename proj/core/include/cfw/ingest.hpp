#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfw/sparse.hpp"

namespace cfw {

struct RawDatasetConfig {
    std::string interactions_path;
    std::string features_path;
    int min_items_per_feature = 5;
    double max_feature_item_share = 0.30;
    int user_core = 0;
    int item_core = 0;
};

struct IdMap {
    std::vector<std::string> names;                   // index -> external id
    std::unordered_map<std::string, Index> indices;   // external id -> index

    Index add(const std::string& id);
    Index get(const std::string& id) const;           // -1 when unknown
    std::size_t size() const { return names.size(); }
};

struct Dataset {
    InteractionMatrix urm;
    FeatureMatrix icm;
    IdMap users;
    IdMap items;
    IdMap features;
};

// Loads both TSV files and applies the feature frequency filter.
// Items present only in the feature file still get indices; the URM keeps
// n_items = max over both files.
Dataset load_dataset(const RawDatasetConfig& cfg);

InteractionMatrix load_interactions_tsv(const std::string& path, IdMap& users,
                                        IdMap& items);
// Feature value column optional, defaults to 1.0.
FeatureMatrix load_features_tsv(const std::string& path, IdMap& items,
                                IdMap& features);

void write_interactions_tsv(const std::string& path, const InteractionMatrix& m,
                            const IdMap& users, const IdMap& items);

// Keeps features whose item count lies in [min_items, floor(max_share * n_items)],
// re-densifying feature indices. kept_features (optional) receives the old
// indices of the surviving features.
FeatureMatrix filter_features(const FeatureMatrix& icm, int min_items,
                              double max_share,
                              std::vector<Index>* kept_features = nullptr);

// Iterative deletion until every user has >= user_core and every item
// >= item_core interactions. May return an empty matrix.
InteractionMatrix k_core(const InteractionMatrix& urm, int user_core,
                         int item_core);

enum class SplitLabel : std::uint8_t { A, B, C };

/// Item-wise A/B/C partition of the URM. A and B hold warm items, C the cold
/// test items. Access to the cold view is counted so the pipeline can prove
/// it never touched C before final evaluation.
class SplitBundle {
public:
    SplitBundle(const InteractionMatrix& urm, std::vector<SplitLabel> assignment,
                double holdout_fraction, std::uint64_t seed);

    const InteractionMatrix& warm_train() const { return a_; }
    const InteractionMatrix& warm_validation() const { return b_; }
    const InteractionMatrix& warm_all() const { return warm_; }

    // Warm interactions minus the step-1 holdout, and the holdout itself.
    const InteractionMatrix& warm_tune_train() const { return warm_tune_; }
    const InteractionMatrix& warm_holdout() const { return holdout_; }

    const InteractionMatrix& cold_test() const {
        ++cold_reads_;
        return c_;
    }
    long cold_access_count() const { return cold_reads_.load(); }

    const std::vector<SplitLabel>& item_assignment() const { return assignment_; }
    std::vector<Index> items_with(SplitLabel label) const;

private:
    std::vector<SplitLabel> assignment_;
    InteractionMatrix a_, b_, c_, warm_, warm_tune_, holdout_;
    mutable std::atomic<long> cold_reads_{0};
};

// Random item partition by ratio (largest-remainder rounding), then a 20%
// per-user holdout over warm interactions for step-1 tuning. Throws when a
// split would receive zero items.
SplitBundle split_cold_items(const InteractionMatrix& urm, double ratio_a,
                             double ratio_b, double ratio_c, std::uint64_t seed,
                             double holdout_fraction = 0.20);

void write_split_manifest(const std::string& path,
                          const std::vector<SplitLabel>& assignment,
                          const IdMap& items);
std::vector<SplitLabel> read_split_manifest(const std::string& path,
                                            const IdMap& items);

}  // namespace cfw
