#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesen/augment.hpp"
#include "lesen/losses.hpp"
#include "lesen/mean_teacher.hpp"
#include "lesen/network.hpp"
#include "lesen/synth_data.hpp"

namespace lesen {

// Full experiment description. Serialized as flat key=value text with section
// prefixes (e.g. loss.alpha_sup=0.5); unknown keys are an error.
struct TrainConfig {
    std::string dataset_path = "data";
    std::string split_path;  // defaults to <dataset_path>/splits.txt
    std::string out_dir = "runs/run";

    DatasetSpec data;
    int n_labeled = 16;
    int n_unlabeled = 66;
    int n_test = 10;
    std::uint64_t split_seed = 0;

    AugmentPolicy aug;
    NetworkConfig net;
    LossWeights loss;
    EmaConfig ema;
    OptimizerConfig opt;

    int total_epochs = 200;
    int labeled_batch = 4;
    int unlabeled_batch = 8;
    std::uint64_t init_seed = 1;
    std::uint64_t train_seed = 2;
    bool use_russ = true;
    bool supervised_only = false;  // skip the unlabeled pass entirely
    double labeled_noise_sigma = 0.2;  // input noise on the supervised pass
    int validation_count = 2;      // carved from the labeled split
    int checkpoint_interval = 20;
    int ablate_seeds = 2;
    int ablate_jobs = 1;

    std::string resolved_split_path() const {
        return split_path.empty() ? dataset_path + "/splits.txt" : split_path;
    }

    void validate() const;
};

TrainConfig parse_config_file(const std::string& path);
void apply_override(TrainConfig& cfg, const std::string& key_value);  // "key=value"
void write_resolved_config(const TrainConfig& cfg, const std::string& path);

}  // namespace lesen
