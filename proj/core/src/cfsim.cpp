#include "cfw/cfsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cfw {

KnnMetric knn_metric_from_string(const std::string& name) {
    if (name == "cosine") return KnnMetric::cosine;
    if (name == "pearson") return KnnMetric::pearson;
    if (name == "adjusted_cosine") return KnnMetric::adjusted_cosine;
    if (name == "jaccard") return KnnMetric::jaccard;
    throw std::invalid_argument("unknown knn metric '" + name + "'");
}

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// Pearson over the co-rated support of columns i and j: both columns are
// centered by their mean over the common users only.
double pearson_corated(const SparseMatrix& m, Index i, Index j, double shrink) {
    auto ri = m.col_indices(i);
    auto vi = m.col_values(i);
    auto rj = m.col_indices(j);
    auto vj = m.col_values(j);
    std::size_t a = 0, b = 0;
    double n = 0, si = 0, sj = 0, sii = 0, sjj = 0, sij = 0;
    while (a < ri.size() && b < rj.size()) {
        if (ri[a] < rj[b]) ++a;
        else if (rj[b] < ri[a]) ++b;
        else {
            double x = vi[a], y = vj[b];
            n += 1; si += x; sj += y;
            sii += x * x; sjj += y * y; sij += x * y;
            ++a; ++b;
        }
    }
    if (n == 0) return 0.0;
    double num = sij - si * sj / n;
    double di = sii - si * si / n;
    double dj = sjj - sj * sj / n;
    double den = std::sqrt(std::max(di, 0.0)) * std::sqrt(std::max(dj, 0.0)) + shrink;
    return den > 0 ? num / den : 0.0;
}

}  // namespace

SimilarityMatrix knn_similarity(const SparseMatrix& m, const KnnConfig& cfg) {
    if (m.nnz() == 0) throw std::invalid_argument("knn_similarity on empty matrix");
    if (cfg.k < 1) throw std::invalid_argument("knn requires k >= 1");
    const Index n_items = m.cols();
    const Index n_rows = m.rows();

    std::vector<double> norm(static_cast<std::size_t>(n_items), 0.0);
    for (Index i = 0; i < n_items; ++i) {
        double s = 0;
        for (double v : m.col_values(i)) s += v * v;
        norm[i] = std::sqrt(s);
    }

    // Row (user) means over rated entries, for adjusted cosine.
    std::vector<double> row_mean(static_cast<std::size_t>(n_rows), 0.0);
    std::vector<double> cnorm;
    if (cfg.metric == KnnMetric::adjusted_cosine) {
        for (Index u = 0; u < n_rows; ++u) {
            auto vals = m.row_values(u);
            if (vals.empty()) continue;
            double s = 0;
            for (double v : vals) s += v;
            row_mean[u] = s / static_cast<double>(vals.size());
        }
        cnorm.assign(static_cast<std::size_t>(n_items), 0.0);
        for (Index i = 0; i < n_items; ++i) {
            auto rows = m.col_indices(i);
            auto vals = m.col_values(i);
            double s = 0;
            for (std::size_t t = 0; t < rows.size(); ++t) {
                double c = vals[t] - row_mean[rows[t]];
                s += c * c;
            }
            cnorm[i] = std::sqrt(s);
        }
    }

    std::vector<double> acc(static_cast<std::size_t>(n_items), 0.0);
    std::vector<char> touched(static_cast<std::size_t>(n_items), 0);
    std::vector<Index> candidates;
    std::vector<Entry> out;

    for (Index j = 0; j < n_items; ++j) {
        candidates.clear();
        auto rows = m.col_indices(j);
        auto vals = m.col_values(j);
        for (std::size_t t = 0; t < rows.size(); ++t) {
            Index u = rows[t];
            double vj = vals[t];
            double cj = vj - row_mean[u];
            auto uitems = m.row_indices(u);
            auto uvals = m.row_values(u);
            for (std::size_t p = 0; p < uitems.size(); ++p) {
                Index i = uitems[p];
                if (i == j) continue;
                if (!touched[i]) {
                    touched[i] = 1;
                    acc[i] = 0.0;
                    candidates.push_back(i);
                }
                switch (cfg.metric) {
                    case KnnMetric::cosine:
                        acc[i] += vj * uvals[p];
                        break;
                    case KnnMetric::adjusted_cosine:
                        acc[i] += cj * (uvals[p] - row_mean[u]);
                        break;
                    case KnnMetric::jaccard:
                        acc[i] += 1.0;
                        break;
                    case KnnMetric::pearson:
                        break;  // per-pair pass below
                }
            }
        }
        for (Index i : candidates) {
            double sim = 0.0;
            switch (cfg.metric) {
                case KnnMetric::cosine: {
                    double den = norm[i] * norm[j] + cfg.shrink;
                    sim = den > 0 ? acc[i] / den : 0.0;
                    break;
                }
                case KnnMetric::adjusted_cosine: {
                    double den = cnorm[i] * cnorm[j] + cfg.shrink;
                    sim = den > 0 ? acc[i] / den : 0.0;
                    break;
                }
                case KnnMetric::jaccard: {
                    double uni = static_cast<double>(m.col_nnz(i)) +
                                 static_cast<double>(m.col_nnz(j)) - acc[i];
                    double den = uni + cfg.shrink;
                    sim = den > 0 ? acc[i] / den : 0.0;
                    break;
                }
                case KnnMetric::pearson:
                    sim = pearson_corated(m, i, j, cfg.shrink);
                    break;
            }
            if (sim != 0.0) out.push_back({i, j, sim});
            touched[i] = 0;
        }
    }
    return prune_topk(SimilarityMatrix(n_items, std::move(out), true), cfg.k);
}

namespace {

// Full two-hop walk scores, diagonal excluded, no pruning.
std::vector<Entry> two_hop_walk(const InteractionMatrix& urm, double alpha) {
    const Index n_items = urm.cols();
    std::vector<double> user_w(static_cast<std::size_t>(urm.rows()), 0.0);
    for (Index u = 0; u < urm.rows(); ++u) {
        auto deg = urm.row_nnz(u);
        if (deg > 0) user_w[u] = std::pow(1.0 / static_cast<double>(deg), alpha);
    }
    std::vector<double> acc(static_cast<std::size_t>(n_items), 0.0);
    std::vector<char> touched(static_cast<std::size_t>(n_items), 0);
    std::vector<Index> hit;
    std::vector<Entry> out;
    for (Index i = 0; i < n_items; ++i) {
        auto users = urm.col_indices(i);
        if (users.empty()) continue;
        double item_w = std::pow(1.0 / static_cast<double>(users.size()), alpha);
        hit.clear();
        for (Index u : users) {
            double w = item_w * user_w[u];
            for (Index j : urm.row_indices(u)) {
                if (!touched[j]) {
                    touched[j] = 1;
                    acc[j] = 0.0;
                    hit.push_back(j);
                }
                acc[j] += w;
            }
        }
        for (Index j : hit) {
            if (j != i && acc[j] != 0.0) out.push_back({i, j, acc[j]});
            touched[j] = 0;
        }
    }
    return out;
}

}  // namespace

SimilarityMatrix p3alpha(const InteractionMatrix& urm, const GraphConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("p3alpha requires k >= 1");
    auto entries = two_hop_walk(urm, cfg.alpha);
    return prune_topk(SimilarityMatrix(urm.cols(), std::move(entries), true),
                      cfg.k);
}

SimilarityMatrix rp3beta(const InteractionMatrix& urm, const GraphConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("rp3beta requires k >= 1");
    auto entries = two_hop_walk(urm, cfg.alpha);
    for (auto& e : entries) {
        double pop = static_cast<double>(urm.col_nnz(e.col));
        e.value /= std::pow(pop, cfg.pop_exponent);
    }
    return prune_topk(SimilarityMatrix(urm.cols(), std::move(entries), true),
                      cfg.k);
}

double slim_mse_objective(const InteractionMatrix& urm, Index j,
                          const std::vector<double>& w, double l1, double l2) {
    std::vector<double> residual(static_cast<std::size_t>(urm.rows()), 0.0);
    {
        auto rows = urm.col_indices(j);
        auto vals = urm.col_values(j);
        for (std::size_t t = 0; t < rows.size(); ++t) residual[rows[t]] = vals[t];
    }
    double reg1 = 0, reg2 = 0;
    for (Index i = 0; i < urm.cols(); ++i) {
        if (w[i] == 0.0) continue;
        reg1 += std::abs(w[i]);
        reg2 += w[i] * w[i];
        auto rows = urm.col_indices(i);
        auto vals = urm.col_values(i);
        for (std::size_t t = 0; t < rows.size(); ++t)
            residual[rows[t]] -= w[i] * vals[t];
    }
    double sq = 0;
    for (double r : residual) sq += r * r;
    return 0.5 * sq + l1 * reg1 + 0.5 * l2 * reg2;
}

SlimMseResult slim_mse(const InteractionMatrix& urm, const SlimConfig& cfg) {
    if (urm.nnz() == 0) throw std::invalid_argument("slim_mse on empty matrix");
    if (cfg.epochs < 1) throw std::invalid_argument("slim_mse requires epochs >= 1");
    const Index n_items = urm.cols();
    constexpr double kTol = 1e-4;

    std::vector<double> sq_norm(static_cast<std::size_t>(n_items), 0.0);
    for (Index i = 0; i < n_items; ++i) {
        double s = 0;
        for (double v : urm.col_values(i)) s += v * v;
        sq_norm[i] = s;
    }

    std::vector<Entry> out;
    std::vector<Index> non_converged;
    std::vector<double> w(static_cast<std::size_t>(n_items));
    std::vector<double> residual(static_cast<std::size_t>(urm.rows()));

    for (Index j = 0; j < n_items; ++j) {
        std::fill(w.begin(), w.end(), 0.0);
        std::fill(residual.begin(), residual.end(), 0.0);
        auto jr = urm.col_indices(j);
        auto jv = urm.col_values(j);
        for (std::size_t t = 0; t < jr.size(); ++t) residual[jr[t]] = jv[t];

        double max_delta = 0.0;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            max_delta = 0.0;
            for (Index i = 0; i < n_items; ++i) {
                if (i == j || sq_norm[i] == 0.0) continue;
                auto rows = urm.col_indices(i);
                auto vals = urm.col_values(i);
                double rho = w[i] * sq_norm[i];
                for (std::size_t t = 0; t < rows.size(); ++t)
                    rho += vals[t] * residual[rows[t]];
                double w_new = soft_threshold(rho, cfg.l1) / (sq_norm[i] + cfg.l2);
                double delta = w_new - w[i];
                if (delta != 0.0) {
                    for (std::size_t t = 0; t < rows.size(); ++t)
                        residual[rows[t]] -= delta * vals[t];
                    w[i] = w_new;
                    max_delta = std::max(max_delta, std::abs(delta));
                }
            }
            if (max_delta < kTol) break;
        }
        if (max_delta >= kTol) non_converged.push_back(j);
        for (Index i = 0; i < n_items; ++i)
            if (w[i] != 0.0) out.push_back({i, j, w[i]});
    }
    auto s = prune_topk(SimilarityMatrix(n_items, std::move(out), true), cfg.k);
    return {std::move(s), std::move(non_converged)};
}

void slim_bpr_step(std::vector<double>& w, Index n_items,
                   std::span<const Index> user_items, Index pos, Index neg,
                   double learning_rate, double l2) {
    double x_pos = 0, x_neg = 0;
    for (Index l : user_items) {
        if (l != pos) x_pos += w[static_cast<std::size_t>(l) * n_items + pos];
        if (l != neg) x_neg += w[static_cast<std::size_t>(l) * n_items + neg];
    }
    double g = 1.0 / (1.0 + std::exp(x_pos - x_neg));
    for (Index l : user_items) {
        if (l != pos) {
            double& wp = w[static_cast<std::size_t>(l) * n_items + pos];
            wp += learning_rate * (g - l2 * wp);
        }
        if (l != neg) {
            double& wn = w[static_cast<std::size_t>(l) * n_items + neg];
            wn += learning_rate * (-g - l2 * wn);
        }
    }
}

SimilarityMatrix slim_bpr(const InteractionMatrix& urm, const SlimConfig& cfg) {
    const Index n_items = urm.cols();
    const Index n_users = urm.rows();
    std::vector<double> w(static_cast<std::size_t>(n_items) * n_items, 0.0);

    bool any_sampleable = false;
    for (Index u = 0; u < n_users; ++u) {
        auto nu = urm.row_nnz(u);
        if (nu > 0 && nu < static_cast<std::size_t>(n_items)) {
            any_sampleable = true;
            break;
        }
    }
    if (cfg.epochs > 0 && !any_sampleable)
        throw std::invalid_argument("slim_bpr: no user with both positive and negative items");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<Index> user_dist(0, n_users - 1);
    std::uniform_int_distribution<Index> item_dist(0, n_items - 1);
    const std::size_t steps_per_epoch = urm.nnz();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            Index u, pos, neg;
            while (true) {
                u = user_dist(rng);
                auto items = urm.row_indices(u);
                if (items.empty() || items.size() == static_cast<std::size_t>(n_items))
                    continue;
                std::uniform_int_distribution<std::size_t> pos_dist(0, items.size() - 1);
                pos = items[pos_dist(rng)];
                do {
                    neg = item_dist(rng);
                } while (std::binary_search(items.begin(), items.end(), neg));
                break;
            }
            slim_bpr_step(w, n_items, urm.row_indices(u), pos, neg,
                          cfg.learning_rate, cfg.l2);
        }
    }

    std::vector<Entry> out;
    for (Index i = 0; i < n_items; ++i)
        for (Index j = 0; j < n_items; ++j) {
            double v = w[static_cast<std::size_t>(i) * n_items + j];
            if (i != j && v != 0.0) out.push_back({i, j, v});
        }
    return prune_topk(SimilarityMatrix(n_items, std::move(out), true), cfg.k);
}

}  // namespace cfw
