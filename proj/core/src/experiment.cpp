#include "cfw/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "cfw/irweight.hpp"

namespace cfw {

namespace {

int log_level() {
    static int level = [] {
        const char* env = std::getenv("CFW_LOG");
        if (!env) return 1;
        std::string v(env);
        if (v == "quiet") return 0;
        if (v == "debug") return 2;
        return 1;
    }();
    return level;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& s, const std::string& key) {
    try {
        std::size_t used;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + s + "'");
    }
}

long to_long(const std::string& s, const std::string& key) {
    try {
        std::size_t used;
        long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + s + "'");
    }
}

bool to_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("bad boolean value for " + key + ": '" + s + "'");
}

const std::string* find(const IniFile& ini, const std::string& section,
                        const std::string& key) {
    auto s = ini.find(section);
    if (s == ini.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
}

std::string get_str(const IniFile& ini, const std::string& section,
                    const std::string& key, const std::string& def) {
    const std::string* v = find(ini, section, key);
    return v ? *v : def;
}

double get_double(const IniFile& ini, const std::string& section,
                  const std::string& key, double def) {
    const std::string* v = find(ini, section, key);
    return v ? to_double(*v, section + "." + key) : def;
}

long get_long(const IniFile& ini, const std::string& section,
              const std::string& key, long def) {
    const std::string* v = find(ini, section, key);
    return v ? to_long(*v, section + "." + key) : def;
}

bool get_bool(const IniFile& ini, const std::string& section,
              const std::string& key, bool def) {
    const std::string* v = find(ini, section, key);
    return v ? to_bool(*v, section + "." + key) : def;
}

const std::set<std::string> kAlgorithms = {"knn", "p3alpha", "rp3beta",
                                           "slim_mse", "slim_bpr"};
const std::set<std::string> kBaselines = {"cbf_raw", "cbf_tfidf", "cbf_bm25",
                                          "fbsm", "cfw_d", "cfw_dv"};
const std::set<std::string> kStep1Fixed = {"algorithm", "seed", "objective"};
const std::set<std::string> kStep2Fixed = {
    "n_latent", "epochs",   "zero_sample_ratio", "batch_size",
    "seed",     "symmetrize_target", "squared_reg", "k", "objective",
    "learning_rate"};

}  // namespace

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[cfw] " << msg << '\n';
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[cfw:debug] " << msg << '\n';
}

IniFile parse_ini(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    IniFile ini;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            ini[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        ini[section][key] = value;
    }
    return ini;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    IniFile ini = parse_ini(path);
    ExperimentConfig cfg;

    cfg.dataset.interactions_path = get_str(ini, "dataset", "interactions", "");
    cfg.dataset.features_path = get_str(ini, "dataset", "features", "");
    if (cfg.dataset.interactions_path.empty() || cfg.dataset.features_path.empty())
        throw ConfigError("dataset.interactions and dataset.features are required");
    cfg.dataset.min_items_per_feature =
        static_cast<int>(get_long(ini, "dataset", "min_items_per_feature", 5));
    cfg.dataset.max_feature_item_share =
        get_double(ini, "dataset", "max_feature_item_share", 0.30);
    cfg.dataset.user_core = static_cast<int>(get_long(ini, "dataset", "user_core", 0));
    cfg.dataset.item_core = static_cast<int>(get_long(ini, "dataset", "item_core", 0));

    cfg.ratio_a = get_double(ini, "split", "ratio_a", 0.6);
    cfg.ratio_b = get_double(ini, "split", "ratio_b", 0.2);
    cfg.ratio_c = get_double(ini, "split", "ratio_c", 0.2);
    cfg.split_seed = static_cast<std::uint64_t>(get_long(ini, "split", "seed", 42));

    cfg.step1_algorithm = get_str(ini, "step1", "algorithm", "knn");
    if (!kAlgorithms.count(cfg.step1_algorithm))
        throw ConfigError("unknown step1 algorithm '" + cfg.step1_algorithm + "'");
    cfg.step1_seed = static_cast<std::uint64_t>(get_long(ini, "step1", "seed", 42));
    cfg.step1_grid.objective = get_str(ini, "step1", "objective", "map");
    if (auto s = ini.find("step1"); s != ini.end())
        for (const auto& [key, value] : s->second)
            if (!kStep1Fixed.count(key)) cfg.step1_grid.values[key] = split_list(value);
    if (cfg.step1_grid.values.empty()) cfg.step1_grid.values["k"] = {"100"};

    cfg.step2.n_latent = static_cast<Index>(get_long(ini, "step2", "n_latent", 0));
    cfg.step2.epochs = static_cast<int>(get_long(ini, "step2", "epochs", 100));
    cfg.step2.learning_rate = get_double(ini, "step2", "learning_rate", 0.05);
    cfg.step2.zero_sample_ratio = get_double(ini, "step2", "zero_sample_ratio", 1.0);
    cfg.step2.batch_size = static_cast<int>(get_long(ini, "step2", "batch_size", 128));
    cfg.step2.seed = static_cast<std::uint64_t>(get_long(ini, "step2", "seed", 42));
    cfg.step2.symmetrize_target = get_bool(ini, "step2", "symmetrize_target", true);
    cfg.step2.squared_reg = get_bool(ini, "step2", "squared_reg", true);
    cfg.inference_k = static_cast<Index>(get_long(ini, "step2", "k", 100));
    cfg.step2_grid.objective = get_str(ini, "step2", "objective", "map");
    if (auto s = ini.find("step2"); s != ini.end())
        for (const auto& [key, value] : s->second)
            if (!kStep2Fixed.count(key)) {
                if (key != "lambda" && key != "beta")
                    throw ConfigError("unknown step2 parameter '" + key + "'");
                cfg.step2_grid.values[key] = split_list(value);
            }
    if (!cfg.step2_grid.values.count("lambda")) cfg.step2_grid.values["lambda"] = {"0"};
    if (!cfg.step2_grid.values.count("beta")) cfg.step2_grid.values["beta"] = {"0"};

    cfg.cutoff = static_cast<int>(get_long(ini, "eval", "cutoff", 10));
    cfg.step1_grid.cutoff = cfg.cutoff;
    cfg.step2_grid.cutoff = cfg.cutoff;
    cfg.ablation = get_bool(ini, "eval", "ablation", false);
    cfg.output_dir = get_str(ini, "eval", "output_dir", ".");
    for (const auto& b : split_list(get_str(ini, "eval", "baselines", ""))) {
        if (!kBaselines.count(b)) throw ConfigError("unknown baseline '" + b + "'");
        cfg.baselines.push_back(b);
    }
    return cfg;
}

SimilarityMatrix build_collaborative(const std::string& algorithm,
                                     const GridPoint& params,
                                     const InteractionMatrix& train,
                                     std::uint64_t seed) {
    auto param = [&](const std::string& key, double def) {
        auto it = params.find(key);
        return it == params.end() ? def : to_double(it->second, key);
    };
    Index k = static_cast<Index>(param("k", 100));

    if (algorithm == "knn") {
        KnnConfig cfg;
        auto it = params.find("metric");
        if (it != params.end()) cfg.metric = knn_metric_from_string(it->second);
        cfg.k = k;
        cfg.shrink = param("shrink", 0.0);
        return knn_similarity(train, cfg);
    }
    if (algorithm == "p3alpha" || algorithm == "rp3beta") {
        GraphConfig cfg;
        cfg.alpha = param("alpha", 1.0);
        cfg.pop_exponent = param("pop_exponent", algorithm == "rp3beta" ? 0.6 : 0.0);
        cfg.k = k;
        return algorithm == "p3alpha" ? p3alpha(train, cfg) : rp3beta(train, cfg);
    }
    SlimConfig cfg;
    cfg.l1 = param("l1", 1e-3);
    cfg.l2 = param("l2", 1e-3);
    cfg.learning_rate = param("learning_rate", 0.05);
    cfg.epochs = static_cast<int>(param("epochs", algorithm == "slim_mse" ? 50 : 10));
    cfg.k = k;
    cfg.seed = seed;
    if (algorithm == "slim_mse") {
        auto result = slim_mse(train, cfg);
        if (!result.non_converged.empty())
            log_info("slim_mse: " + std::to_string(result.non_converged.size()) +
                     " columns hit the epoch cap");
        return std::move(result.s);
    }
    if (algorithm == "slim_bpr") return slim_bpr(train, cfg);
    throw ConfigError("unknown collaborative algorithm '" + algorithm + "'");
}

namespace {

CfwTrainConfig apply_step2_point(CfwTrainConfig base, const GridPoint& p) {
    for (const auto& [key, value] : p) {
        if (key == "lambda") base.lambda = to_double(value, key);
        else if (key == "beta") base.beta = to_double(value, key);
        else throw ConfigError("unknown step2 grid parameter '" + key + "'");
    }
    return base;
}

std::string format_metrics(const MetricReport& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%d",
                  m.precision, m.recall, m.mrr, m.map, m.ndcg,
                  m.n_users_evaluated);
    return buf;
}

}  // namespace

std::vector<ReportRow> ablation_rows(const FeatureWeights& w,
                                     const FeatureMatrix& icm,
                                     const SplitBundle& bundle, Index k,
                                     int cutoff,
                                     const std::string& model_label) {
    FeatureWeights d_only = w;
    std::fill(d_only.v.begin(), d_only.v.end(), 0.0);
    FeatureWeights v_only = w;
    std::fill(v_only.d.begin(), v_only.d.end(), 0.0);

    std::vector<ReportRow> rows;
    rows.push_back({model_label + "/D",
                    evaluate_cold(weighted_content_similarity(icm, d_only, k),
                                  bundle, cutoff)});
    rows.push_back({model_label + "/V",
                    evaluate_cold(weighted_content_similarity(icm, v_only, k),
                                  bundle, cutoff)});
    rows.push_back({model_label + "/D+V",
                    evaluate_cold(weighted_content_similarity(icm, w, k), bundle,
                                  cutoff)});
    return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    ExperimentResult result;

    log_info("loading dataset");
    Dataset ds = load_dataset(cfg.dataset);
    log_info("urm: " + std::to_string(ds.urm.rows()) + " users x " +
             std::to_string(ds.urm.cols()) + " items, " +
             std::to_string(ds.urm.nnz()) + " interactions; icm: " +
             std::to_string(ds.icm.cols()) + " features");

    SplitBundle bundle = split_cold_items(ds.urm, cfg.ratio_a, cfg.ratio_b,
                                          cfg.ratio_c, cfg.split_seed);
    result.manifest_path = cfg.output_dir + "/split_manifest.tsv";
    write_split_manifest(result.manifest_path, bundle.item_assignment(), ds.items);

    // Step 1: tune the collaborative algorithm on the warm holdout.
    log_info("step 1: tuning " + cfg.step1_algorithm);
    auto warm_items_a = bundle.items_with(SplitLabel::A);
    auto warm_items_b = bundle.items_with(SplitLabel::B);
    std::vector<Index> warm_items = warm_items_a;
    warm_items.insert(warm_items.end(), warm_items_b.begin(), warm_items_b.end());
    std::sort(warm_items.begin(), warm_items.end());

    auto step1_points = expand_grid(cfg.step1_grid);
    GridResult step1 = grid_search(
        step1_points,
        [&](const GridPoint& p) {
            auto s = build_collaborative(cfg.step1_algorithm, p,
                                         bundle.warm_tune_train(), cfg.step1_seed);
            return evaluate_ranking(s, bundle.warm_tune_train(),
                                    bundle.warm_holdout(), warm_items,
                                    cfg.cutoff);
        },
        cfg.step1_grid.objective);
    result.step1_best = step1.best;

    // Retrain on split A only; this is the target CFW fits against.
    log_info("step 1: retraining on split A");
    SimilarityMatrix scf = build_collaborative(cfg.step1_algorithm, step1.best,
                                               bundle.warm_train(), cfg.step1_seed);
    result.similarity_path = cfg.output_dir + "/similarity_scf.tsv";
    write_similarity_tsv(result.similarity_path, scf);

    // Step 2: fit feature weights, tuned on split B treated as cold.
    log_info("step 2: tuning feature weights");
    auto step2_points = expand_grid(cfg.step2_grid);
    GridResult step2 = grid_search(
        step2_points,
        [&](const GridPoint& p) {
            CfwTrainConfig tc = apply_step2_point(cfg.step2, p);
            auto [w, trace] = train_cfw(scf, ds.icm, tc);
            auto sw = weighted_content_similarity(ds.icm, w, cfg.inference_k);
            return evaluate_ranking(sw, bundle.warm_train(),
                                    bundle.warm_validation(), warm_items_b,
                                    cfg.cutoff);
        },
        cfg.step2_grid.objective);
    result.step2_best = step2.best;

    CfwTrainConfig final_cfg = apply_step2_point(cfg.step2, step2.best);
    auto [weights, trace] = train_cfw(scf, ds.icm, final_cfg);
    result.model_path = cfg.output_dir + "/model.tsv";
    save_weights(result.model_path, weights);

    if (bundle.cold_access_count() != 0)
        throw std::runtime_error("leakage: cold split was read before evaluation");

    // Final evaluation on the cold split.
    log_info("final evaluation on cold items");
    std::string main_label =
        (final_cfg.n_latent > 0 ? std::string("cfw_dv(") : std::string("cfw_d(")) +
        cfg.step1_algorithm + ")";
    std::vector<ReportRow> rows;
    rows.push_back({main_label,
                    evaluate_cold(weighted_content_similarity(ds.icm, weights,
                                                              cfg.inference_k),
                                  bundle, cfg.cutoff)});

    for (const auto& baseline : cfg.baselines) {
        log_info("baseline: " + baseline);
        if (baseline == "cbf_raw" || baseline == "cbf_tfidf" ||
            baseline == "cbf_bm25") {
            FeatureMatrix icm = ds.icm;
            if (baseline == "cbf_tfidf") icm = tf_idf(icm);
            if (baseline == "cbf_bm25") icm = bm25(icm);
            KnnConfig kc;
            kc.k = cfg.inference_k;
            auto s = knn_similarity(transpose(icm), kc);
            rows.push_back({baseline, evaluate_cold(s, bundle, cfg.cutoff)});
        } else if (baseline == "fbsm") {
            CfwTrainConfig fc = final_cfg;
            if (fc.n_latent == 0) fc.n_latent = 2;
            FeatureWeights fw = train_fbsm(bundle.warm_train(), ds.icm, fc);
            auto s = weighted_content_similarity(ds.icm, fw, cfg.inference_k);
            rows.push_back({baseline, evaluate_cold(s, bundle, cfg.cutoff)});
        } else if (baseline == "cfw_d" || baseline == "cfw_dv") {
            CfwTrainConfig bc = final_cfg;
            bc.n_latent = baseline == "cfw_d" ? 0 : std::max<Index>(final_cfg.n_latent, 2);
            auto [bw, btrace] = train_cfw(scf, ds.icm, bc);
            auto s = weighted_content_similarity(ds.icm, bw, cfg.inference_k);
            rows.push_back({baseline + "(" + cfg.step1_algorithm + ")",
                            evaluate_cold(s, bundle, cfg.cutoff)});
        }
    }

    if (cfg.ablation && final_cfg.n_latent > 0) {
        auto ab = ablation_rows(weights, ds.icm, bundle, cfg.inference_k,
                                cfg.cutoff, main_label);
        rows.insert(rows.end(), ab.begin(), ab.end());
    }

    result.rows = std::move(rows);
    result.report_path = cfg.output_dir + "/report.tsv";
    write_report_tsv(result.report_path, result.rows);
    return result;
}

void write_report_tsv(const std::string& path,
                      const std::vector<ReportRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    if (!rows.empty()) f << "# cutoff\t" << rows.front().metrics.cutoff << '\n';
    f << "model\tprecision\trecall\tmrr\tmap\tndcg\tn_users\n";
    for (const auto& row : rows)
        f << row.model << '\t' << format_metrics(row.metrics) << '\n';
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<ReportRow> read_report_tsv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<ReportRow> rows;
    int cutoff = 10;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line.rfind("# cutoff\t", 0) == 0) {
            cutoff = static_cast<int>(to_long(line.substr(9), "cutoff"));
            continue;
        }
        if (line.rfind("model\t", 0) == 0 || line[0] == '#') continue;
        std::stringstream ss(line);
        ReportRow row;
        std::string field;
        std::getline(ss, row.model, '\t');
        ss >> row.metrics.precision >> row.metrics.recall >> row.metrics.mrr >>
            row.metrics.map >> row.metrics.ndcg >> row.metrics.n_users_evaluated;
        if (ss.fail())
            throw std::runtime_error(path + ": malformed report line: " + line);
        row.metrics.cutoff = cutoff;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ReportRow> compare_report(
    const std::vector<std::vector<ReportRow>>& reports) {
    std::vector<ReportRow> merged;
    for (const auto& r : reports) merged.insert(merged.end(), r.begin(), r.end());
    if (merged.empty()) throw ConfigError("compare_report: no report rows");
    for (const auto& row : merged)
        if (row.metrics.cutoff != merged.front().metrics.cutoff)
            throw ConfigError("compare_report: mismatched cutoffs (" +
                              std::to_string(merged.front().metrics.cutoff) +
                              " vs " + std::to_string(row.metrics.cutoff) + ")");
    return merged;
}

std::string render_report_table(const std::vector<ReportRow>& rows) {
    const char* names[5] = {"Precision", "Recall", "MRR", "MAP", "NDCG"};
    auto value = [](const MetricReport& m, int c) {
        switch (c) {
            case 0: return m.precision;
            case 1: return m.recall;
            case 2: return m.mrr;
            case 3: return m.map;
            default: return m.ndcg;
        }
    };
    double best[5];
    for (int c = 0; c < 5; ++c) {
        best[c] = -1;
        for (const auto& row : rows) best[c] = std::max(best[c], value(row.metrics, c));
    }
    std::size_t name_width = 5;
    for (const auto& row : rows) name_width = std::max(name_width, row.model.size());

    std::ostringstream out;
    out << std::string(name_width, ' ');
    for (int c = 0; c < 5; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "  %10s", names[c]);
        out << buf;
    }
    out << '\n';
    for (const auto& row : rows) {
        out << row.model << std::string(name_width - row.model.size(), ' ');
        for (int c = 0; c < 5; ++c) {
            double v = value(row.metrics, c);
            char buf[16];
            std::snprintf(buf, sizeof buf, "  %9.4f%c", v,
                          v == best[c] ? '*' : ' ');
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace cfw
