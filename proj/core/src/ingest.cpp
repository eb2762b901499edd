#include "cfw/ingest.hpp"

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

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
        fields.back().pop_back();
    return fields;
}

double parse_real(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(where + ": bad numeric value '" + s + "'");
    }
}

[[noreturn]] void fail_line(const std::string& path, std::size_t lineno,
                            const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + msg);
}

}  // namespace

Index IdMap::add(const std::string& id) {
    auto it = indices.find(id);
    if (it != indices.end()) return it->second;
    Index idx = static_cast<Index>(names.size());
    names.push_back(id);
    indices.emplace(id, idx);
    return idx;
}

Index IdMap::get(const std::string& id) const {
    auto it = indices.find(id);
    return it == indices.end() ? -1 : it->second;
}

InteractionMatrix load_interactions_tsv(const std::string& path, IdMap& users,
                                        IdMap& items) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<Entry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3)
            fail_line(path, lineno, "expected user<TAB>item<TAB>rating");
        double rating =
            parse_real(fields[2], path + ":" + std::to_string(lineno));
        if (!std::isfinite(rating) || rating <= 0)
            fail_line(path, lineno, "rating must be finite and > 0");
        entries.push_back({users.add(fields[0]), items.add(fields[1]), rating});
    }
    try {
        return InteractionMatrix(static_cast<Index>(users.size()),
                                 static_cast<Index>(items.size()),
                                 std::move(entries));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

FeatureMatrix load_features_tsv(const std::string& path, IdMap& items,
                                IdMap& features) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<Entry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2 && fields.size() != 3)
            fail_line(path, lineno, "expected item<TAB>feature[<TAB>value]");
        double value = fields.size() == 3
                           ? parse_real(fields[2], path + ":" + std::to_string(lineno))
                           : 1.0;
        if (!std::isfinite(value) || value < 0)
            fail_line(path, lineno, "feature value must be finite and >= 0");
        entries.push_back({items.add(fields[0]), features.add(fields[1]), value});
    }
    try {
        return FeatureMatrix(static_cast<Index>(items.size()),
                             static_cast<Index>(features.size()),
                             std::move(entries));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void write_interactions_tsv(const std::string& path, const InteractionMatrix& m,
                            const IdMap& users, const IdMap& items) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& e : m.entries()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "\t%.17g\n", e.value);
        f << users.names[e.row] << '\t' << items.names[e.col] << buf;
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const RawDatasetConfig& cfg) {
    if (cfg.max_feature_item_share <= 0 || cfg.max_feature_item_share > 1)
        throw std::runtime_error("max_feature_item_share must be in (0, 1]");
    Dataset ds;
    InteractionMatrix urm = load_interactions_tsv(cfg.interactions_path,
                                                  ds.users, ds.items);
    FeatureMatrix icm = load_features_tsv(cfg.features_path, ds.items,
                                          ds.features);
    // The feature file may introduce items unseen in the interactions;
    // widen the URM so both matrices agree on n_items.
    Index n_items = static_cast<Index>(ds.items.size());
    if (urm.cols() < n_items)
        urm = InteractionMatrix(urm.rows(), n_items, urm.entries());
    if (icm.rows() < n_items)
        icm = FeatureMatrix(n_items, icm.cols(), icm.entries());

    icm = filter_features(icm, cfg.min_items_per_feature,
                          cfg.max_feature_item_share);

    if (cfg.user_core > 0 || cfg.item_core > 0) {
        urm = k_core(urm, cfg.user_core, cfg.item_core);
        if (urm.nnz() == 0)
            throw std::runtime_error("k-core extraction removed every interaction");
    }
    ds.urm = std::move(urm);
    ds.icm = std::move(icm);
    return ds;
}

FeatureMatrix filter_features(const FeatureMatrix& icm, int min_items,
                              double max_share,
                              std::vector<Index>* kept_features) {
    const Index max_count =
        static_cast<Index>(std::floor(max_share * icm.rows()));
    std::vector<Index> remap(static_cast<std::size_t>(icm.cols()), -1);
    std::vector<Index> kept;
    for (Index f = 0; f < icm.cols(); ++f) {
        Index count = static_cast<Index>(icm.col_nnz(f));
        if (count >= min_items && count <= max_count) {
            remap[f] = static_cast<Index>(kept.size());
            kept.push_back(f);
        }
    }
    std::vector<Entry> entries;
    for (const auto& e : icm.entries())
        if (remap[e.col] >= 0) entries.push_back({e.row, remap[e.col], e.value});
    if (kept_features) *kept_features = kept;
    return FeatureMatrix(icm.rows(), static_cast<Index>(kept.size()),
                         std::move(entries));
}

InteractionMatrix k_core(const InteractionMatrix& urm, int user_core,
                         int item_core) {
    if (user_core < 0 || item_core < 0)
        throw std::invalid_argument("core sizes must be >= 0");
    if (user_core == 0 && item_core == 0) return urm;

    auto entries = urm.entries();
    std::vector<Index> user_deg(static_cast<std::size_t>(urm.rows()), 0);
    std::vector<Index> item_deg(static_cast<std::size_t>(urm.cols()), 0);
    for (const auto& e : entries) {
        ++user_deg[e.row];
        ++item_deg[e.col];
    }
    std::vector<char> alive(entries.size(), 1);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!alive[i]) continue;
            const auto& e = entries[i];
            if (user_deg[e.row] < user_core || item_deg[e.col] < item_core) {
                alive[i] = 0;
                --user_deg[e.row];
                --item_deg[e.col];
                changed = true;
            }
        }
    }
    std::vector<Entry> kept;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (alive[i]) kept.push_back(entries[i]);
    return InteractionMatrix(urm.rows(), urm.cols(), std::move(kept));
}

SplitBundle::SplitBundle(const InteractionMatrix& urm,
                         std::vector<SplitLabel> assignment,
                         double holdout_fraction, std::uint64_t seed)
    : assignment_(std::move(assignment)) {
    if (assignment_.size() != static_cast<std::size_t>(urm.cols()))
        throw std::invalid_argument("assignment size does not match n_items");
    std::vector<Entry> ea, eb, ec, ew;
    for (const auto& e : urm.entries()) {
        switch (assignment_[e.col]) {
            case SplitLabel::A: ea.push_back(e); ew.push_back(e); break;
            case SplitLabel::B: eb.push_back(e); ew.push_back(e); break;
            case SplitLabel::C: ec.push_back(e); break;
        }
    }
    a_ = InteractionMatrix(urm.rows(), urm.cols(), std::move(ea));
    b_ = InteractionMatrix(urm.rows(), urm.cols(), std::move(eb));
    c_ = InteractionMatrix(urm.rows(), urm.cols(), std::move(ec));
    warm_ = InteractionMatrix(urm.rows(), urm.cols(), std::move(ew));

    // Step-1 holdout: per user over warm interactions, users with fewer
    // than 5 warm interactions keep everything in the training part.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Entry> train, hold;
    for (Index u = 0; u < warm_.rows(); ++u) {
        auto idx = warm_.row_indices(u);
        auto val = warm_.row_values(u);
        std::size_t n = idx.size();
        std::size_t n_hold =
            n >= 5 ? static_cast<std::size_t>(holdout_fraction * n) : 0;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        if (n_hold > 0) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            Entry e{u, idx[order[i]], val[order[i]]};
            (i < n_hold ? hold : train).push_back(e);
        }
    }
    warm_tune_ = InteractionMatrix(urm.rows(), urm.cols(), std::move(train));
    holdout_ = InteractionMatrix(urm.rows(), urm.cols(), std::move(hold));
}

std::vector<Index> SplitBundle::items_with(SplitLabel label) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < assignment_.size(); ++i)
        if (assignment_[i] == label) out.push_back(static_cast<Index>(i));
    return out;
}

SplitBundle split_cold_items(const InteractionMatrix& urm, double ratio_a,
                             double ratio_b, double ratio_c, std::uint64_t seed,
                             double holdout_fraction) {
    if (ratio_a <= 0 || ratio_b <= 0 || ratio_c <= 0 ||
        std::abs(ratio_a + ratio_b + ratio_c - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must be positive and sum to 1");
    const Index n = urm.cols();
    const double exact[3] = {ratio_a * n, ratio_b * n, ratio_c * n};
    std::size_t counts[3];
    double remainder[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        counts[s] = static_cast<std::size_t>(std::floor(exact[s]));
        remainder[s] = exact[s] - std::floor(exact[s]);
        assigned += counts[s];
    }
    // Largest-remainder rounding, ties by split order A, B, C.
    std::vector<int> by_remainder{0, 1, 2};
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [&](int x, int y) { return remainder[x] > remainder[y]; });
    for (std::size_t i = 0; assigned < static_cast<std::size_t>(n); ++i, ++assigned)
        ++counts[by_remainder[i % 3]];
    for (int s = 0; s < 3; ++s)
        if (counts[s] == 0)
            throw std::invalid_argument("split " + std::string(1, "ABC"[s]) +
                                        " would receive zero items");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<SplitLabel> assignment(static_cast<std::size_t>(n));
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
        for (std::size_t i = 0; i < counts[s]; ++i, ++pos)
            assignment[order[pos]] = static_cast<SplitLabel>(s);

    return SplitBundle(urm, std::move(assignment), holdout_fraction, seed);
}

void write_split_manifest(const std::string& path,
                          const std::vector<SplitLabel>& assignment,
                          const IdMap& items) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < assignment.size(); ++i)
        f << items.names[i] << '\t'
          << "ABC"[static_cast<int>(assignment[i])] << '\n';
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<SplitLabel> read_split_manifest(const std::string& path,
                                            const IdMap& items) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<SplitLabel> assignment(items.size(), SplitLabel::A);
    std::vector<char> seen(items.size(), 0);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2 || fields[1].size() != 1)
            fail_line(path, lineno, "expected item<TAB>{A|B|C}");
        Index item = items.get(fields[0]);
        if (item < 0) fail_line(path, lineno, "unknown item '" + fields[0] + "'");
        char label = fields[1][0];
        if (label != 'A' && label != 'B' && label != 'C')
            fail_line(path, lineno, "bad split label '" + fields[1] + "'");
        assignment[item] = static_cast<SplitLabel>(label - 'A');
        seen[item] = 1;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw std::runtime_error(path + ": item '" + items.names[i] +
                                     "' missing from manifest");
    return assignment;
}

}  // namespace cfw
