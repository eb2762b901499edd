#include "cfw/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfw {

std::vector<Index> recommend(const InteractionMatrix& profile_matrix, Index user,
                             const SimilarityMatrix& s,
                             std::span<const Index> candidates, int n) {
    if (candidates.empty())
        throw std::invalid_argument("recommend: empty candidate set");
    std::vector<double> scores = sparse_dot_row(profile_matrix, user, s);
    auto seen = profile_matrix.row_indices(user);

    std::vector<Index> ranked;
    ranked.reserve(candidates.size());
    for (Index c : candidates) {
        if (scores[c] == 0.0) continue;  // no evidence, not rankable
        if (!std::binary_search(seen.begin(), seen.end(), c)) ranked.push_back(c);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](Index a, Index b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    if (ranked.size() > static_cast<std::size_t>(n)) ranked.resize(n);
    return ranked;
}

MetricRow ranking_metrics(std::span<const Index> ranked,
                          std::span<const Index> relevant_sorted, int cutoff) {
    if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
    if (relevant_sorted.empty())
        throw std::invalid_argument("ranking_metrics: empty relevant set");

    const std::size_t c = static_cast<std::size_t>(cutoff);
    const std::size_t depth = std::min(c, ranked.size());
    const std::size_t n_rel = relevant_sorted.size();

    int hits = 0;
    double mrr = 0, ap = 0, dcg = 0;
    for (std::size_t r = 0; r < depth; ++r) {
        bool hit = std::binary_search(relevant_sorted.begin(),
                                      relevant_sorted.end(), ranked[r]);
        if (!hit) continue;
        ++hits;
        if (mrr == 0) mrr = 1.0 / static_cast<double>(r + 1);
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        dcg += 1.0 / std::log2(static_cast<double>(r + 2));
    }
    const std::size_t ideal = std::min(n_rel, c);
    double idcg = 0;
    for (std::size_t r = 0; r < ideal; ++r)
        idcg += 1.0 / std::log2(static_cast<double>(r + 2));

    MetricRow row;
    row.precision = static_cast<double>(hits) / static_cast<double>(c);
    row.recall = static_cast<double>(hits) / static_cast<double>(n_rel);
    row.mrr = mrr;
    row.map = ap / static_cast<double>(ideal);
    row.ndcg = idcg > 0 ? dcg / idcg : 0.0;
    return row;
}

MetricReport evaluate_ranking(const SimilarityMatrix& s,
                              const InteractionMatrix& profile_matrix,
                              const InteractionMatrix& relevant_matrix,
                              std::span<const Index> candidates, int cutoff) {
    if (candidates.empty())
        throw std::invalid_argument("evaluate_ranking: empty candidate set");
    std::vector<char> is_candidate(static_cast<std::size_t>(s.n_items()), 0);
    for (Index c : candidates) is_candidate[c] = 1;

    MetricReport report;
    report.cutoff = cutoff;
    for (Index u = 0; u < profile_matrix.rows(); ++u) {
        if (profile_matrix.row_nnz(u) == 0) continue;  // nothing to score from
        std::vector<Index> relevant;
        for (Index item : relevant_matrix.row_indices(u))
            if (is_candidate[item]) relevant.push_back(item);
        if (relevant.empty()) {
            ++report.n_users_skipped;
            continue;
        }
        auto ranked = recommend(profile_matrix, u, s, candidates, cutoff);
        MetricRow row = ranking_metrics(ranked, relevant, cutoff);
        report.precision += row.precision;
        report.recall += row.recall;
        report.mrr += row.mrr;
        report.map += row.map;
        report.ndcg += row.ndcg;
        ++report.n_users_evaluated;
    }
    if (report.n_users_evaluated == 0)
        throw std::runtime_error("evaluate_ranking: no evaluable users");
    const double n = report.n_users_evaluated;
    report.precision /= n;
    report.recall /= n;
    report.mrr /= n;
    report.map /= n;
    report.ndcg /= n;
    return report;
}

MetricReport evaluate_cold(const SimilarityMatrix& s, const SplitBundle& bundle,
                           int cutoff) {
    const auto& profile = bundle.warm_all();
    const auto& cold = bundle.cold_test();
    auto candidates = bundle.items_with(SplitLabel::C);

    // Leakage guards: warm views must not touch C columns, the cold view
    // must not touch warm columns.
    for (Index c : candidates)
        if (profile.col_nnz(c) != 0)
            throw std::runtime_error("leakage: cold item has warm interactions");
    const auto& assignment = bundle.item_assignment();
    for (Index item = 0; item < cold.cols(); ++item)
        if (assignment[item] != SplitLabel::C && cold.col_nnz(item) != 0)
            throw std::runtime_error("leakage: warm item in cold view");

    return evaluate_ranking(s, profile, cold, candidates, cutoff);
}

double metric_by_name(const MetricReport& r, const std::string& name) {
    if (name == "precision") return r.precision;
    if (name == "recall") return r.recall;
    if (name == "mrr") return r.mrr;
    if (name == "map") return r.map;
    if (name == "ndcg") return r.ndcg;
    throw std::invalid_argument("unknown metric '" + name + "'");
}

std::vector<GridPoint> expand_grid(const GridSpec& spec) {
    for (const auto& [key, vals] : spec.values)
        if (vals.empty())
            throw std::invalid_argument("empty grid for parameter '" + key + "'");

    std::vector<GridPoint> points{GridPoint{}};
    for (const auto& [key, vals] : spec.values) {
        std::vector<GridPoint> next;
        next.reserve(points.size() * vals.size());
        for (const auto& p : points)
            for (const auto& v : vals) {
                GridPoint q = p;
                q[key] = v;
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }
    return points;
}

GridResult grid_search(const std::vector<GridPoint>& points,
                       const std::function<MetricReport(const GridPoint&)>& evaluator,
                       const std::string& objective) {
    if (points.empty()) throw std::invalid_argument("grid_search: no grid points");
    GridResult result;
    std::vector<std::string> failures;
    for (const auto& p : points) {
        try {
            MetricReport r = evaluator(p);
            result.leaderboard.emplace_back(p, metric_by_name(r, objective));
        } catch (const std::exception& e) {
            std::string desc;
            for (const auto& [k, v] : p) desc += k + "=" + v + " ";
            failures.push_back(desc + "-> " + e.what());
        }
    }
    if (result.leaderboard.empty()) {
        std::string msg = "grid_search: every configuration failed:";
        for (const auto& f : failures) msg += "\n  " + f;
        throw std::runtime_error(msg);
    }
    std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    result.best = result.leaderboard.front().first;
    return result;
}

}  // namespace cfw
