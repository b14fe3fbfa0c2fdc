#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lesen/config.hpp"
#include "lesen/harness.hpp"

namespace {

lesen::TrainConfig resolve_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides,
                                  const std::string& out_dir) {
    lesen::TrainConfig cfg;
    if (!config_path.empty()) cfg = lesen::parse_config_file(config_path);
    for (const auto& o : overrides) lesen::apply_override(cfg, o);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LESEN semi-supervised dual-modality segmentation harness"};
    app.require_subcommand(1);
    app.fallthrough();  // allow the global options after the subcommand too

    std::string config_path, out_dir, resume_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "config file (key=value lines)");
    app.add_option("--override", overrides, "override key=value (repeatable)");
    app.add_option("--out", out_dir, "output directory");

    auto* gen = app.add_subcommand("generate", "generate the synthetic dataset and splits");
    auto* train = app.add_subcommand("train", "run the mean-teacher training loop");
    train->add_option("--resume", resume_path, "checkpoint to resume from");
    auto* ablate = app.add_subcommand("ablate", "run the component ablation study");

    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    std::string ckpt, dataset_dir, split_path, split_section = "test", model_section = "teacher";
    std::string report_path = "report.tsv";
    eval->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    eval->add_option("--dataset", dataset_dir, "dataset directory")->required();
    eval->add_option("--splits", split_path, "split manifest file")->required();
    eval->add_option("--split", split_section, "labeled | unlabeled | test");
    eval->add_option("--model", model_section, "teacher | student");
    eval->add_option("--report", report_path, "output report path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            lesen::cmd_generate(resolve_config(config_path, overrides, out_dir));
        } else if (train->parsed()) {
            auto cfg = resolve_config(config_path, overrides, out_dir);
            auto result = lesen::cmd_train(cfg, resume_path);
            std::cout << "run_dir=" << result.run_dir << " test_dsc=" << result.test_dsc
                      << " test_asd=" << result.test_asd
                      << " checkpoint=" << result.scored_checkpoint << "\n";
        } else if (ablate->parsed()) {
            lesen::cmd_ablate(resolve_config(config_path, overrides, out_dir));
        } else if (eval->parsed()) {
            auto report = lesen::cmd_evaluate(ckpt, dataset_dir, split_path, split_section,
                                              model_section, report_path);
            std::cout << "dsc_mean=" << report.mean_dsc() << " asd_mean=" << report.mean_asd()
                      << " report=" << report_path << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
