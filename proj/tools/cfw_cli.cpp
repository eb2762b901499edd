#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfw/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path) {
    cfw::ExperimentConfig cfg = cfw::load_experiment_config(config_path);
    cfw::ExperimentResult result = cfw::run_experiment(cfg);
    std::cout << cfw::render_report_table(result.rows);
    std::cout << "report: " << result.report_path << '\n';
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& manifest_path,
                 const std::string& config_path) {
    cfw::ExperimentConfig cfg = cfw::load_experiment_config(config_path);
    cfw::Dataset ds = cfw::load_dataset(cfg.dataset);
    auto assignment = cfw::read_split_manifest(manifest_path, ds.items);
    cfw::SplitBundle bundle(ds.urm, std::move(assignment), 0.20, cfg.split_seed);
    cfw::FeatureWeights w = cfw::load_weights(model_path);
    auto s = cfw::weighted_content_similarity(ds.icm, w, cfg.inference_k);
    cfw::ReportRow row{w.n_latent > 0 ? "cfw_dv" : "cfw_d",
                       cfw::evaluate_cold(s, bundle, cfg.cutoff)};
    std::cout << cfw::render_report_table({row});
    return 0;
}

int cmd_report(const std::vector<std::string>& paths) {
    std::vector<std::vector<cfw::ReportRow>> reports;
    for (const auto& p : paths) reports.push_back(cfw::read_report_tsv(p));
    std::cout << cfw::render_report_table(cfw::compare_report(reports));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-step collaborative feature weighting for cold-start items"};
    app.require_subcommand(1);

    std::string config_path, model_path, manifest_path;
    std::vector<std::string> report_paths;

    auto* run = app.add_subcommand("run", "Run the full two-step experiment");
    run->add_option("config", config_path, "experiment config (INI)")->required();

    auto* evaluate =
        app.add_subcommand("evaluate", "Evaluate a saved model on the cold split");
    evaluate->add_option("model", model_path, "model weights file")->required();
    evaluate->add_option("split-manifest", manifest_path, "split manifest TSV")
        ->required();
    evaluate->add_option("--config", config_path, "experiment config (INI)")
        ->required();

    auto* report = app.add_subcommand("report", "Merge metric reports into one table");
    report->add_option("files", report_paths, "report TSV files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (evaluate->parsed())
            return cmd_evaluate(model_path, manifest_path, config_path);
        return cmd_report(report_paths);
    } catch (const cfw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
