#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cfw/ingest.hpp"
#include "cfw/sparse.hpp"

namespace cfw {

struct MetricReport {
    double precision = 0;
    double recall = 0;
    double mrr = 0;
    double map = 0;
    double ndcg = 0;
    int cutoff = 10;
    int n_users_evaluated = 0;
    int n_users_skipped = 0;  // users with no relevant items in the split
};

// Per-ranking metric row (one user).
struct MetricRow {
    double precision = 0, recall = 0, mrr = 0, map = 0, ndcg = 0;
};

// Item-based scoring: score(j) = sum_i profile[i] * s[i,j] over the
// candidates; items already in the profile are never returned. Ties broken
// by lower item index.
std::vector<Index> recommend(const InteractionMatrix& profile_matrix, Index user,
                             const SimilarityMatrix& s,
                             std::span<const Index> candidates, int n);

// Throws std::invalid_argument when relevant is empty.
MetricRow ranking_metrics(std::span<const Index> ranked,
                          std::span<const Index> relevant_sorted, int cutoff);

// Generic holdout ranking evaluation: per user, profile from profile_matrix,
// relevant from relevant_matrix restricted to candidates.
MetricReport evaluate_ranking(const SimilarityMatrix& s,
                              const InteractionMatrix& profile_matrix,
                              const InteractionMatrix& relevant_matrix,
                              std::span<const Index> candidates, int cutoff);

// Cold-item protocol: profile = warm (A u B) interactions, candidates =
// C items, relevant = the user's C interactions. Asserts the leakage
// guards on every run. Throws std::runtime_error when no user is evaluable.
MetricReport evaluate_cold(const SimilarityMatrix& s, const SplitBundle& bundle,
                           int cutoff);

double metric_by_name(const MetricReport& r, const std::string& name);

using GridPoint = std::map<std::string, std::string>;

struct GridSpec {
    std::map<std::string, std::vector<std::string>> values;
    std::string objective = "map";
    int cutoff = 10;
};

// Cartesian product in key order; deterministic.
std::vector<GridPoint> expand_grid(const GridSpec& spec);

struct GridResult {
    GridPoint best;
    std::vector<std::pair<GridPoint, double>> leaderboard;  // objective desc
};

// Exhaustive search; evaluator maps a grid point to a report. Individual
// failures are collected, and an aggregate error is thrown only when every
// point fails.
GridResult grid_search(const std::vector<GridPoint>& points,
                       const std::function<MetricReport(const GridPoint&)>& evaluator,
                       const std::string& objective);

}  // namespace cfw
