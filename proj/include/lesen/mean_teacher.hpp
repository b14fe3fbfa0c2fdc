#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesen/augment.hpp"
#include "lesen/losses.hpp"
#include "lesen/network.hpp"
#include "lesen/russ.hpp"
#include "lesen/synth_data.hpp"

namespace lesen {

struct EmaConfig {
    double decay = 0.99;
    void validate() const;
};

struct OptimizerConfig {
    double learning_rate = 0.0002;
    double weight_decay = 0.00001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment state per trainable parameter, aligned with ModelState order.
struct AdamState {
    struct Slot {
        std::string name;
        Tensor m;
        Tensor v;
    };
    std::vector<Slot> slots;
    std::uint64_t t = 0;

    static AdamState init(const ModelState& model);
};

struct TrainState {
    ModelState student;
    ModelState teacher;
    AdamState optimizer;
    long global_step = 0;
    int epoch = 0;  // last completed epoch
    std::uint64_t rng_seed = 0;
};

struct StepStats {
    double l_sup = 0.0;
    double l_cons = 0.0;
    double l_total = 0.0;
    double lambda = 0.0;
    int q = 0;
    bool russ_active = false;  // exposes which consistency code path ran
    std::vector<std::string> selected_ids;
};

struct StepConfig {
    AugmentPolicy aug;
    NetworkConfig net;
    LossWeights loss;
    EmaConfig ema;
    OptimizerConfig opt;
    bool use_russ = true;
    int total_epochs = 1;
    // Additive input noise on the supervised pass. The labeled view reuses the
    // augmentation policy but with this noise level; keeping the student
    // stochastic is what turns the averaged teacher into an ensemble.
    double labeled_noise_sigma = 0.2;
};

// θ_k^T = decay · θ_{k-1}^T + (1 - decay) · θ_k^S, over every array including
// normalization statistics. The student is never modified.
void ema_update(ModelState& teacher, const ModelState& student, double decay);

// One Adam step with L2 weight decay folded into the gradient. Gradients are
// looked up by parameter name from the tape leaves of `graph`.
void adam_step(ModelState& model, AdamState& opt, Tape& tape,
               const std::vector<std::pair<std::string, VarId>>& leaves,
               const OptimizerConfig& cfg);

// One optimization step: augment + score + select on the unlabeled batch,
// consistency loss on the selected samples, supervised loss on the labeled
// batch, gradient step on the student, then the EMA teacher update.
// `epoch` is 1-based. Throws on non-finite loss.
StepStats train_step(TrainState& state, const std::vector<MultiModalSample>& labeled,
                     const std::vector<MultiModalSample>& unlabeled, const StepConfig& config,
                     int epoch, std::uint64_t step_aug_seed);

}  // namespace lesen
