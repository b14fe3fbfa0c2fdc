#pragma once

#include <vector>

#include "lesen/tensor.hpp"

namespace lesen {

struct LossWeights {
    double alpha_sup = 0.5;
    double lambda_max = 1.0;
    int rampup_epochs = 30;
    double dice_smooth = 1e-5;

    void validate() const;
};

// Mean per-pixel cross-entropy plus soft Dice complement on the foreground
// channel. pred:(2,H,W) probabilities, target:(H,W) binary.
double supervised_loss(const Tensor& pred, const Tensor& target, double dice_smooth = 1e-5);

// Mean squared difference over all samples, classes and pixels. Inputs are
// per-sample mean probability maps over the M augmented copies, already
// restricted to the selected samples. Empty selection yields 0.
double consistency_loss(const std::vector<Tensor>& student_mean,
                        const std::vector<Tensor>& teacher_mean);

// Gaussian ramp-up: lambda_max * exp(-5 (1 - min(epoch/rampup, 1))^2).
double lambda_schedule(int epoch, const LossWeights& weights);

double total_loss(double l_sup, double l_cons, int epoch, const LossWeights& weights);

}  // namespace lesen
