#pragma once

#include <string>

#include "lesen/config.hpp"
#include "lesen/metrics.hpp"

namespace lesen {

// Generates the synthetic dataset and the split manifest described by cfg.
void cmd_generate(const TrainConfig& cfg);

struct TrainResult {
    std::string run_dir;
    std::string best_checkpoint;
    std::string final_checkpoint;
    double best_val_dsc = 0.0;
    double test_dsc = 0.0;  // from the final report
    double test_asd = 0.0;
    std::string scored_checkpoint;  // which checkpoint the report scores
};

// Full training run under cfg.out_dir: config.resolved, metrics.tsv,
// checkpoints/, report.tsv. Resumes from `resume_path` when non-empty.
TrainResult cmd_train(const TrainConfig& cfg, const std::string& resume_path = "");

// Evaluates one checkpoint section ("teacher" or "student") on a split
// section and writes the report.
EvalReport cmd_evaluate(const std::string& checkpoint_path, const std::string& dataset_dir,
                        const std::string& split_manifest_path, const std::string& split_section,
                        const std::string& model_section, const std::string& report_path);

// Runs the three component variants (all, wo_russ, wo_sa) over cfg.ablate_seeds
// seeds and writes ablation_report.tsv plus ablation_plot.dat under out_dir.
void cmd_ablate(const TrainConfig& cfg);

EvalReport evaluate_model(const ModelState& model, const NetworkConfig& net,
                          const std::string& dataset_dir,
                          const std::vector<std::string>& sample_ids);

}  // namespace lesen
