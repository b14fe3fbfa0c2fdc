#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lesen/autodiff.hpp"
#include "lesen/tensor.hpp"

namespace lesen {

struct NetworkConfig {
    int in_channels_per_modality = 1;
    int base_width = 8;
    int depth = 3;
    int n_classes = 2;
    bool use_spatial_attention = true;

    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

// Flat ordered parameter collection. Names ending in ".running_mean" /
// ".running_var" are normalization statistics: part of the state (EMA and
// checkpoints cover them) but never touched by the gradient optimizer.
struct ModelState {
    struct Entry {
        std::string name;
        Tensor value;
    };
    std::vector<Entry> entries;

    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;
    bool same_structure(const ModelState& other) const;
};

bool is_trainable_param(const std::string& name);

ModelState init_state(const NetworkConfig& config, std::uint64_t seed);

// Builds one forward pass on the tape. `trainable` decides whether parameters
// enter as leaves or constants; `training` selects batch vs running statistics
// (running stats in `state` are updated only when training && update_stats).
class NetworkGraph {
  public:
    NetworkGraph(Tape& tape, ModelState& state, const NetworkConfig& config, bool trainable);

    VarId forward(const Tensor& x_a, const Tensor& x_b, bool training, bool update_stats);

    Tape& tape() { return tape_; }

    // (name, tape id) of every parameter the graph has touched so far.
    std::vector<std::pair<std::string, VarId>> leaves() const {
        return {leaves_.begin(), leaves_.end()};
    }

  private:
    VarId param(const std::string& name);
    VarId conv_block(VarId x, const std::string& prefix, bool training, bool update_stats);

    Tape& tape_;
    ModelState& state_;
    NetworkConfig config_;
    bool trainable_;
    std::map<std::string, VarId> leaves_;
};

// Spatial attention fusion of two same-shape feature streams: a learned
// single-channel gate blends them, and the block output concatenates both
// streams with the blend. Returns (weight_map, fused_features).
std::pair<VarId, VarId> spatial_attention(Tape& tape, VarId f_a, VarId f_b, VarId w1, VarId b1,
                                          VarId w2, VarId b2);

// Convenience single-sample inference (no gradients). Eval-mode running
// statistics by default; instance_stats switches to per-instance
// normalization (still without touching model state), matching how the
// student normalizes during training.
Tensor forward(const ModelState& state, const NetworkConfig& config, const Tensor& x_a,
               const Tensor& x_b, bool instance_stats = false);

void check_probability_map(const Tensor& prob);

}  // namespace lesen
