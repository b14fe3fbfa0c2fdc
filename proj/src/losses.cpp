#include "lesen/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "lesen/autodiff.hpp"

namespace lesen {

void LossWeights::validate() const {
    if (alpha_sup <= 0.0 || alpha_sup > 1.0)
        throw std::invalid_argument("LossWeights.alpha_sup must be in (0,1]");
    // zero disables the consistency term; used by supervised-only baselines
    if (lambda_max < 0.0) throw std::invalid_argument("LossWeights.lambda_max must be >= 0");
    if (rampup_epochs < 0) throw std::invalid_argument("LossWeights.rampup_epochs must be >= 0");
    if (dice_smooth <= 0.0) throw std::invalid_argument("LossWeights.dice_smooth must be > 0");
}

double supervised_loss(const Tensor& pred, const Tensor& target, double dice_smooth) {
    Tape tape;
    VarId p = tape.constant(pred);
    return tape.val(tape.supervised_loss(p, target, dice_smooth))[0];
}

double consistency_loss(const std::vector<Tensor>& student_mean,
                        const std::vector<Tensor>& teacher_mean) {
    if (student_mean.size() != teacher_mean.size())
        throw std::invalid_argument("consistency_loss: selection size mismatch");
    if (student_mean.empty()) return 0.0;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < student_mean.size(); ++s) {
        const Tensor& a = student_mean[s];
        const Tensor& b = teacher_mean[s];
        if (!a.same_shape(b)) throw std::invalid_argument("consistency_loss: shape mismatch");
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
        }
        count += a.size();
    }
    return sum / static_cast<double>(count);
}

double lambda_schedule(int epoch, const LossWeights& weights) {
    if (epoch < 0) throw std::invalid_argument("lambda_schedule: epoch must be >= 0");
    double t = weights.rampup_epochs <= 0
                   ? 1.0
                   : std::min(static_cast<double>(epoch) / weights.rampup_epochs, 1.0);
    return weights.lambda_max * std::exp(-5.0 * (1.0 - t) * (1.0 - t));
}

double total_loss(double l_sup, double l_cons, int epoch, const LossWeights& weights) {
    if (!std::isfinite(l_sup) || !std::isfinite(l_cons))
        throw std::invalid_argument("total_loss: non-finite input");
    return weights.alpha_sup * l_sup + lambda_schedule(epoch, weights) * l_cons;
}

}  // namespace lesen
