#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfw/cfsim.hpp"
#include "cfw/eval.hpp"
#include "cfw/ingest.hpp"
#include "cfw/weighting.hpp"

namespace cfw {

// Configuration problems get their own type so the CLI can map them to
// exit code 1 (runtime failures exit 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat INI: [section] headers, key = value lines, # and ; comments.
using IniFile = std::map<std::string, std::map<std::string, std::string>>;

IniFile parse_ini(const std::string& path);

struct ExperimentConfig {
    RawDatasetConfig dataset;

    double ratio_a = 0.6, ratio_b = 0.2, ratio_c = 0.2;
    std::uint64_t split_seed = 42;

    std::string step1_algorithm = "knn";  // knn|p3alpha|rp3beta|slim_mse|slim_bpr
    GridSpec step1_grid;
    std::uint64_t step1_seed = 42;

    CfwTrainConfig step2;      // fixed step-2 parameters
    GridSpec step2_grid;       // searched step-2 parameters (lambda, beta, ...)
    Index inference_k = 100;   // neighborhood size of the weighted scorer

    int cutoff = 10;
    std::vector<std::string> baselines;  // cbf_raw|cbf_tfidf|cbf_bm25|fbsm
    bool ablation = false;
    std::string output_dir = ".";
};

// Throws ConfigError on unknown algorithm/baseline names or bad values.
ExperimentConfig load_experiment_config(const std::string& path);

struct ReportRow {
    std::string model;
    MetricReport metrics;
};

// Renders a fixed-width table, best value per metric column marked with '*'.
std::string render_report_table(const std::vector<ReportRow>& rows);

void write_report_tsv(const std::string& path,
                      const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_tsv(const std::string& path);

// Merges reports into one comparison table; throws ConfigError on
// mismatched cutoffs.
std::vector<ReportRow> compare_report(
    const std::vector<std::vector<ReportRow>>& reports);

struct ExperimentResult {
    std::vector<ReportRow> rows;
    GridPoint step1_best;
    GridPoint step2_best;
    std::string report_path;
    std::string manifest_path;
    std::string similarity_path;
    std::string model_path;
};

// Full two-step pipeline: ingest, split, step-1 collaborative tuning on the
// warm holdout, retrain on A, step-2 weight fitting tuned on B, final
// cold evaluation on C for the trained model and all requested baselines.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Builds the configured collaborative similarity from `train`.
SimilarityMatrix build_collaborative(const std::string& algorithm,
                                     const GridPoint& params,
                                     const InteractionMatrix& train,
                                     std::uint64_t seed);

// D-only / V-only / D+V rows from a single trained model (component
// ablation); model_label prefixes the row names.
std::vector<ReportRow> ablation_rows(const FeatureWeights& w,
                                     const FeatureMatrix& icm,
                                     const SplitBundle& bundle, Index k,
                                     int cutoff,
                                     const std::string& model_label);

void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace cfw
