#include "cfw/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cfw {

namespace {

// p = V f_i, length n_latent.
void project(const FeatureMatrix& icm, const FeatureWeights& w, Index i,
             std::vector<double>& p) {
    p.assign(static_cast<std::size_t>(w.n_latent), 0.0);
    auto idx = icm.row_indices(i);
    auto val = icm.row_values(i);
    for (Index l = 0; l < w.n_latent; ++l) {
        const double* vrow = w.v.data() + static_cast<std::size_t>(l) * w.d.size();
        double s = 0;
        for (std::size_t t = 0; t < idx.size(); ++t) s += vrow[idx[t]] * val[t];
        p[l] = s;
    }
}

double diag_term(const FeatureMatrix& icm, const FeatureWeights& w, Index i,
                 Index j) {
    auto fi = icm.row_indices(i);
    auto vi = icm.row_values(i);
    auto fj = icm.row_indices(j);
    auto vj = icm.row_values(j);
    std::size_t a = 0, b = 0;
    double s = 0;
    while (a < fi.size() && b < fj.size()) {
        if (fi[a] < fj[b]) ++a;
        else if (fj[b] < fi[a]) ++b;
        else {
            s += w.d[fi[a]] * vi[a] * vj[b];
            ++a; ++b;
        }
    }
    return s;
}

double norm2(const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace

double bilinear_similarity(const FeatureMatrix& icm, const FeatureWeights& w,
                           Index i, Index j) {
    double s = diag_term(icm, w, i, j);
    if (w.n_latent > 0) {
        static thread_local std::vector<double> pi, pj;
        project(icm, w, i, pi);
        project(icm, w, j, pj);
        for (Index l = 0; l < w.n_latent; ++l) s += pi[l] * pj[l];
    }
    return s;
}

std::pair<double, double> cfw_loss(const FeatureWeights& w,
                                   const SimilarityMatrix& target,
                                   const FeatureMatrix& icm,
                                   std::span<const ItemPair> pairs,
                                   const CfwTrainConfig& cfg) {
    double mse = 0;
    for (const auto& p : pairs) {
        double e = bilinear_similarity(icm, w, p.i, p.j) -
                   target.matrix().at(p.i, p.j);
        mse += 0.5 * e * e;
    }
    double reg;
    if (cfg.squared_reg) {
        double dd = 0, vv = 0;
        for (double x : w.d) dd += x * x;
        for (double x : w.v) vv += x * x;
        reg = cfg.lambda * dd + cfg.beta * vv;
    } else {
        reg = cfg.lambda * norm2(w.d) + cfg.beta * norm2(w.v);
    }
    return {mse, reg};
}

void cfw_gradients(const FeatureWeights& w, const SimilarityMatrix& target,
                   const FeatureMatrix& icm, std::span<const ItemPair> pairs,
                   const CfwTrainConfig& cfg, std::vector<double>& grad_d,
                   std::vector<double>& grad_v, double reg_scale) {
    const std::size_t nf = w.d.size();
    grad_d.assign(nf, 0.0);
    grad_v.assign(w.v.size(), 0.0);

    std::vector<double> pi, pj;
    for (const auto& p : pairs) {
        double e = bilinear_similarity(icm, w, p.i, p.j) -
                   target.matrix().at(p.i, p.j);
        if (e == 0.0) continue;

        auto fi = icm.row_indices(p.i);
        auto vi = icm.row_values(p.i);
        auto fj = icm.row_indices(p.j);
        auto vj = icm.row_values(p.j);
        std::size_t a = 0, b = 0;
        while (a < fi.size() && b < fj.size()) {
            if (fi[a] < fj[b]) ++a;
            else if (fj[b] < fi[a]) ++b;
            else {
                grad_d[fi[a]] += e * vi[a] * vj[b];
                ++a; ++b;
            }
        }
        if (w.n_latent > 0) {
            project(icm, w, p.i, pi);
            project(icm, w, p.j, pj);
            for (Index l = 0; l < w.n_latent; ++l) {
                double* grow = grad_v.data() + static_cast<std::size_t>(l) * nf;
                double epi = e * pi[l];
                double epj = e * pj[l];
                for (std::size_t t = 0; t < fj.size(); ++t)
                    grow[fj[t]] += epi * vj[t];
                for (std::size_t t = 0; t < fi.size(); ++t)
                    grow[fi[t]] += epj * vi[t];
            }
        }
    }

    if (cfg.squared_reg) {
        if (cfg.lambda != 0)
            for (std::size_t f = 0; f < nf; ++f)
                grad_d[f] += reg_scale * 2.0 * cfg.lambda * w.d[f];
        if (cfg.beta != 0 && w.n_latent > 0)
            for (std::size_t t = 0; t < w.v.size(); ++t)
                grad_v[t] += reg_scale * 2.0 * cfg.beta * w.v[t];
    } else {
        double nd = norm2(w.d);
        if (cfg.lambda != 0 && nd > 0)
            for (std::size_t f = 0; f < nf; ++f)
                grad_d[f] += reg_scale * cfg.lambda * w.d[f] / nd;
        double nv = norm2(w.v);
        if (cfg.beta != 0 && nv > 0)
            for (std::size_t t = 0; t < w.v.size(); ++t)
                grad_v[t] += reg_scale * cfg.beta * w.v[t] / nv;
    }
}

void adam_step(AdamState& state, FeatureWeights& w,
               const std::vector<double>& grad_d,
               const std::vector<double>& grad_v, const CfwTrainConfig& cfg) {
    if (state.m_d.size() != w.d.size()) {
        state.m_d.assign(w.d.size(), 0.0);
        state.v_d.assign(w.d.size(), 0.0);
        state.m_v.assign(w.v.size(), 0.0);
        state.v_v.assign(w.v.size(), 0.0);
    }
    ++state.step_count;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, state.step_count);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, state.step_count);

    auto update = [&](std::vector<double>& param, std::vector<double>& m,
                      std::vector<double>& v, const std::vector<double>& g) {
        for (std::size_t t = 0; t < param.size(); ++t) {
            m[t] = cfg.adam_beta1 * m[t] + (1.0 - cfg.adam_beta1) * g[t];
            v[t] = cfg.adam_beta2 * v[t] + (1.0 - cfg.adam_beta2) * g[t] * g[t];
            param[t] -= cfg.learning_rate * (m[t] / c1) /
                        (std::sqrt(v[t] / c2) + cfg.adam_eps);
        }
    };
    update(w.d, state.m_d, state.v_d, grad_d);
    if (w.n_latent > 0) update(w.v, state.m_v, state.v_v, grad_v);
    if (cfg.clamp_nonnegative)
        for (double& x : w.d) x = std::max(x, 0.0);
}

FeatureWeights init_weights(Index n_features, Index n_latent,
                            std::uint64_t seed) {
    FeatureWeights w;
    w.n_latent = n_latent;
    w.d.resize(static_cast<std::size_t>(n_features));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 0.1);
    for (double& x : w.d) x = ud(rng);
    if (n_latent > 0) {
        w.v.resize(static_cast<std::size_t>(n_latent) * n_features);
        std::normal_distribution<double> nd(0.0, 0.01 / std::sqrt(n_latent));
        for (double& x : w.v) x = nd(rng);
    }
    return w;
}

namespace {

SimilarityMatrix symmetrize(const SimilarityMatrix& s) {
    struct Key {
        Index i, j;
        bool operator<(const Key& o) const {
            return i != o.i ? i < o.i : j < o.j;
        }
    };
    std::vector<std::pair<Key, double>> acc;
    for (const auto& e : s.matrix().entries()) {
        if (e.row == e.col) continue;
        acc.push_back({{e.row, e.col}, e.value * 0.5});
        acc.push_back({{e.col, e.row}, e.value * 0.5});
    }
    std::sort(acc.begin(), acc.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Entry> out;
    for (std::size_t t = 0; t < acc.size(); ++t) {
        if (!out.empty() && out.back().row == acc[t].first.i &&
            out.back().col == acc[t].first.j)
            out.back().value += acc[t].second;
        else
            out.push_back({acc[t].first.i, acc[t].first.j, acc[t].second});
    }
    return SimilarityMatrix(s.n_items(), std::move(out), true);
}

}  // namespace

std::pair<FeatureWeights, TrainTrace> train_cfw(const SimilarityMatrix& target_in,
                                                const FeatureMatrix& icm,
                                                const CfwTrainConfig& cfg) {
    if (target_in.n_items() != icm.rows())
        throw std::invalid_argument("target and icm disagree on n_items");
    if (cfg.adam_beta1 <= 0 || cfg.adam_beta1 >= 1 || cfg.adam_beta2 <= 0 ||
        cfg.adam_beta2 >= 1)
        throw std::invalid_argument("adam betas must lie in (0, 1)");

    SimilarityMatrix target =
        cfg.symmetrize_target ? symmetrize(target_in) : target_in;

    std::vector<ItemPair> nonzero;
    for (const auto& e : target.matrix().entries())
        if (e.row != e.col) nonzero.push_back({e.row, e.col});

    FeatureWeights w = init_weights(icm.cols(), cfg.n_latent, cfg.seed);
    AdamState state;
    TrainTrace trace;
    const Index n_items = icm.rows();
    std::mt19937_64 rng(cfg.seed + 1);
    std::uniform_int_distribution<Index> item_dist(0, n_items - 1);
    std::vector<double> grad_d, grad_v;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<ItemPair> pairs = nonzero;
        std::size_t n_zero = static_cast<std::size_t>(
            cfg.zero_sample_ratio * static_cast<double>(nonzero.size()));
        for (std::size_t t = 0; t < n_zero; ++t) {
            Index i, j;
            int guard = 0;
            do {
                i = item_dist(rng);
                j = item_dist(rng);
            } while ((i == j || target.matrix().at(i, j) != 0.0) && ++guard < 1000);
            if (guard < 1000) pairs.push_back({i, j});
        }
        std::shuffle(pairs.begin(), pairs.end(), rng);

        const double total = static_cast<double>(pairs.size());
        for (std::size_t start = 0; start < pairs.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t len = std::min<std::size_t>(cfg.batch_size,
                                                    pairs.size() - start);
            std::span<const ItemPair> batch(pairs.data() + start, len);
            cfw_gradients(w, target, icm, batch, cfg, grad_d, grad_v,
                          static_cast<double>(len) / total);
            adam_step(state, w, grad_d, grad_v, cfg);
        }

        auto [mse, reg] = cfw_loss(w, target, icm, pairs, cfg);
        if (!std::isfinite(mse) || !std::isfinite(reg))
            throw std::runtime_error("train_cfw: non-finite loss at epoch " +
                                     std::to_string(epoch + 1));
        trace.mse_term.push_back(mse);
        trace.reg_term.push_back(reg);
        trace.pair_count.push_back(pairs.size());
    }
    return {std::move(w), std::move(trace)};
}

SimilarityMatrix weighted_content_similarity(const FeatureMatrix& icm,
                                             const FeatureWeights& w, Index k) {
    if (k < 1) throw std::invalid_argument("weighted_content_similarity requires k >= 1");
    const Index n_items = icm.rows();

    // Latent projections, computed once per item.
    std::vector<double> proj;
    if (w.n_latent > 0) {
        proj.resize(static_cast<std::size_t>(n_items) * w.n_latent);
        std::vector<double> p;
        for (Index i = 0; i < n_items; ++i) {
            project(icm, w, i, p);
            std::copy(p.begin(), p.end(),
                      proj.begin() + static_cast<std::size_t>(i) * w.n_latent);
        }
    }

    std::vector<double> acc(static_cast<std::size_t>(n_items), 0.0);
    std::vector<char> touched(static_cast<std::size_t>(n_items), 0);
    std::vector<Index> hit;
    std::vector<Entry> out;
    for (Index i = 0; i < n_items; ++i) {
        hit.clear();
        auto fi = icm.row_indices(i);
        auto vi = icm.row_values(i);
        for (std::size_t t = 0; t < fi.size(); ++t) {
            Index f = fi[t];
            double base = w.d[f] * vi[t];
            auto items = icm.col_indices(f);
            auto vals = icm.col_values(f);
            for (std::size_t p = 0; p < items.size(); ++p) {
                Index j = items[p];
                if (j == i) continue;
                if (!touched[j]) {
                    touched[j] = 1;
                    acc[j] = 0.0;
                    hit.push_back(j);
                }
                acc[j] += base * vals[p];
            }
        }
        for (Index j : hit) {
            double v = acc[j];
            if (w.n_latent > 0) {
                const double* pi = proj.data() + static_cast<std::size_t>(i) * w.n_latent;
                const double* pj = proj.data() + static_cast<std::size_t>(j) * w.n_latent;
                for (Index l = 0; l < w.n_latent; ++l) v += pi[l] * pj[l];
            }
            if (v != 0.0) out.push_back({i, j, v});
            touched[j] = 0;
        }
    }
    return prune_topk(SimilarityMatrix(n_items, std::move(out), true), k);
}

void fbsm_bpr_step(FeatureWeights& w, const FeatureMatrix& icm,
                   std::span<const Index> user_items, Index pos, Index neg,
                   const CfwTrainConfig& cfg) {
    const std::size_t nf = w.d.size();
    // base = sum of feature rows over the user's support.
    static thread_local std::vector<double> base;
    static thread_local std::vector<char> base_touched;
    base.assign(nf, 0.0);
    base_touched.assign(nf, 0);
    std::vector<Index> base_feats;
    for (Index l : user_items) {
        auto idx = icm.row_indices(l);
        auto val = icm.row_values(l);
        for (std::size_t t = 0; t < idx.size(); ++t) {
            if (!base_touched[idx[t]]) {
                base_touched[idx[t]] = 1;
                base_feats.push_back(idx[t]);
            }
            base[idx[t]] += val[t];
        }
    }

    auto fp = icm.row_indices(pos);
    auto vp = icm.row_values(pos);
    auto fn = icm.row_indices(neg);
    auto vn = icm.row_values(neg);

    // sum_pos = base - f_pos (pos is in the support); sum_neg = base.
    auto sum_pos_at = [&](Index f) {
        double v = base[f];
        auto it = std::lower_bound(fp.begin(), fp.end(), f);
        if (it != fp.end() && *it == f)
            v -= vp[static_cast<std::size_t>(it - fp.begin())];
        return v;
    };

    double x_pos = 0, x_neg = 0;
    for (std::size_t t = 0; t < fp.size(); ++t)
        x_pos += w.d[fp[t]] * sum_pos_at(fp[t]) * vp[t];
    for (std::size_t t = 0; t < fn.size(); ++t)
        x_neg += w.d[fn[t]] * base[fn[t]] * vn[t];

    std::vector<double> q_base, q_pos, q_neg;
    if (w.n_latent > 0) {
        q_base.assign(static_cast<std::size_t>(w.n_latent), 0.0);
        for (Index l = 0; l < w.n_latent; ++l) {
            const double* vrow = w.v.data() + static_cast<std::size_t>(l) * nf;
            double s = 0;
            for (Index f : base_feats) s += vrow[f] * base[f];
            q_base[l] = s;
        }
        project(icm, w, pos, q_pos);
        project(icm, w, neg, q_neg);
        for (Index l = 0; l < w.n_latent; ++l) {
            x_pos += (q_base[l] - q_pos[l]) * q_pos[l];
            x_neg += q_base[l] * q_neg[l];
        }
    }

    const double g = 1.0 / (1.0 + std::exp(x_pos - x_neg));
    const double lr = cfg.learning_rate;

    for (std::size_t t = 0; t < fp.size(); ++t)
        w.d[fp[t]] += lr * g * sum_pos_at(fp[t]) * vp[t];
    for (std::size_t t = 0; t < fn.size(); ++t)
        w.d[fn[t]] -= lr * g * base[fn[t]] * vn[t];

    if (w.n_latent > 0) {
        for (Index l = 0; l < w.n_latent; ++l) {
            double* vrow = w.v.data() + static_cast<std::size_t>(l) * nf;
            double qsp = q_base[l] - q_pos[l];
            // positive item: q_sum_pos f_pos^T + q_pos f_sum_pos^T
            for (std::size_t t = 0; t < fp.size(); ++t)
                vrow[fp[t]] += lr * g * qsp * vp[t];
            for (Index f : base_feats)
                vrow[f] += lr * g * q_pos[l] * sum_pos_at(f);
            // negative item
            for (std::size_t t = 0; t < fn.size(); ++t)
                vrow[fn[t]] -= lr * g * q_base[l] * vn[t];
            for (Index f : base_feats)
                vrow[f] -= lr * g * q_neg[l] * base[f];
        }
    }

    if (cfg.lambda != 0) {
        if (cfg.squared_reg) {
            for (double& x : w.d) x -= lr * 2.0 * cfg.lambda * x;
        } else {
            double nd = norm2(w.d);
            if (nd > 0)
                for (double& x : w.d) x -= lr * cfg.lambda * x / nd;
        }
    }
    if (cfg.beta != 0 && w.n_latent > 0) {
        if (cfg.squared_reg) {
            for (double& x : w.v) x -= lr * 2.0 * cfg.beta * x;
        } else {
            double nv = norm2(w.v);
            if (nv > 0)
                for (double& x : w.v) x -= lr * cfg.beta * x / nv;
        }
    }
}

FeatureWeights train_fbsm(const InteractionMatrix& urm, const FeatureMatrix& icm,
                          const CfwTrainConfig& cfg) {
    if (urm.cols() != icm.rows())
        throw std::invalid_argument("urm and icm disagree on n_items");
    FeatureWeights w = init_weights(icm.cols(), cfg.n_latent, cfg.seed);
    if (cfg.epochs == 0) return w;

    const Index n_items = urm.cols();
    const Index n_users = urm.rows();
    bool any_sampleable = false;
    for (Index u = 0; u < n_users; ++u) {
        auto nu = urm.row_nnz(u);
        if (nu > 0 && nu < static_cast<std::size_t>(n_items)) {
            any_sampleable = true;
            break;
        }
    }
    if (!any_sampleable)
        throw std::invalid_argument("train_fbsm: no user with both positive and negative items");

    std::mt19937_64 rng(cfg.seed + 2);
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
            fbsm_bpr_step(w, icm, urm.row_indices(u), pos, neg, cfg);
        }
        for (double x : w.d)
            if (!std::isfinite(x))
                throw std::runtime_error("train_fbsm: non-finite weights at epoch " +
                                         std::to_string(epoch + 1));
    }
    return w;
}

void save_weights(const std::string& path, const FeatureWeights& w) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "cfw-weights\tv1\n";
    f << "n_features\t" << w.d.size() << '\n';
    f << "n_latent\t" << w.n_latent << '\n';
    char buf[64];
    for (std::size_t t = 0; t < w.d.size(); ++t) {
        std::snprintf(buf, sizeof buf, "d\t%zu\t%.17g\n", t, w.d[t]);
        f << buf;
    }
    for (Index l = 0; l < w.n_latent; ++l)
        for (std::size_t t = 0; t < w.d.size(); ++t) {
            std::snprintf(buf, sizeof buf, "v\t%d\t%zu\t%.17g\n", l, t,
                          w.v[static_cast<std::size_t>(l) * w.d.size() + t]);
            f << buf;
        }
    if (!f) throw std::runtime_error("write failed: " + path);
}

FeatureWeights load_weights(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string header;
    std::getline(f, header);
    if (header != "cfw-weights\tv1")
        throw std::runtime_error(path + ": unrecognized weights file header");
    FeatureWeights w;
    std::size_t n_features = 0;
    std::string tag;
    f >> tag >> n_features;
    if (tag != "n_features") throw std::runtime_error(path + ": missing n_features");
    f >> tag >> w.n_latent;
    if (tag != "n_latent") throw std::runtime_error(path + ": missing n_latent");
    w.d.assign(n_features, 0.0);
    w.v.assign(static_cast<std::size_t>(w.n_latent) * n_features, 0.0);
    while (f >> tag) {
        if (tag == "d") {
            std::size_t idx;
            double val;
            if (!(f >> idx >> val) || idx >= n_features)
                throw std::runtime_error(path + ": bad d line");
            w.d[idx] = val;
        } else if (tag == "v") {
            Index l;
            std::size_t idx;
            double val;
            if (!(f >> l >> idx >> val) || l < 0 || l >= w.n_latent ||
                idx >= n_features)
                throw std::runtime_error(path + ": bad v line");
            w.v[static_cast<std::size_t>(l) * n_features + idx] = val;
        } else {
            throw std::runtime_error(path + ": unknown record '" + tag + "'");
        }
    }
    return w;
}

}  // namespace cfw
