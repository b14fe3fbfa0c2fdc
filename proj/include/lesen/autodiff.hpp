#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "lesen/tensor.hpp"

namespace lesen {

using VarId = int;

// Reverse-mode tape over Tensor. One tape per optimization step: leaves are
// the trainable parameters, constants carry no gradient, every op records a
// backward closure. Per-sample subgraphs are disjoint, so backward() only
// visits nodes whose output gradient was actually touched.
class Tape {
  public:
    VarId leaf(Tensor value);      // participates in gradients
    VarId constant(Tensor value);  // gradient never tracked

    const Tensor& val(VarId id) const { return nodes_[id].value; }
    Tensor& grad(VarId id);  // zero-allocated on first access
    bool requires_grad(VarId id) const { return nodes_[id].requires_grad; }

    // Seeds d(scalar)/d(scalar) = 1 and runs the recorded closures in reverse.
    void backward(VarId scalar_id);

    std::size_t node_count() const { return nodes_.size(); }

    // --- ops ---
    // 2D convolution, same padding, odd square kernel. x:(Ci,H,W),
    // w:(Co,Ci,k,k), b:(Co) -> (Co,H,W)
    VarId conv2d(VarId x, VarId w, VarId b);

    // Per-channel normalization over the spatial extent. In training mode the
    // batch statistics of x are used and, when running_* are given, folded
    // into them; in eval mode running_* are the normalizers.
    VarId instance_norm(VarId x, VarId gamma, VarId beta, bool training,
                        Tensor* running_mean, Tensor* running_var,
                        double momentum = 0.9, double eps = 1e-5);

    VarId relu(VarId x);
    VarId sigmoid(VarId x);
    VarId avg_pool2(VarId x);  // (C,H,W) -> (C,H/2,W/2)
    VarId upsample2(VarId x);  // nearest neighbour, (C,H,W) -> (C,2H,2W)
    VarId concat_ch(const std::vector<VarId>& xs);

    // out = w ⊙ fa + (1-w) ⊙ fb with a single-channel gate broadcast over C.
    VarId gate_blend(VarId w, VarId fa, VarId fb);

    VarId softmax_ch(VarId x);

    // Mean cross-entropy plus soft Dice complement on the foreground channel.
    // prob:(2,H,W) probabilities, target:(H,W) in {0,1}. Returns a scalar.
    VarId supervised_loss(VarId prob, const Tensor& target, double dice_smooth);

    VarId mean_of(const std::vector<VarId>& xs);  // elementwise mean over M maps
    VarId mse_to(VarId x, Tensor target);         // mean squared diff, scalar

    // Scalar-weighted sum of scalar nodes.
    VarId affine(const std::vector<std::pair<double, VarId>>& terms);

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;

    VarId push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
};

}  // namespace lesen
