#include "lesen/mean_teacher.hpp"

#include <cmath>
#include <stdexcept>

#include "lesen/rng.hpp"

namespace lesen {

void EmaConfig::validate() const {
    if (decay < 0.0 || decay > 1.0)
        throw std::invalid_argument("EmaConfig.decay must be in [0,1]");
}

AdamState AdamState::init(const ModelState& model) {
    AdamState s;
    for (const auto& e : model.entries)
        if (is_trainable_param(e.name))
            s.slots.push_back({e.name, Tensor(e.value.shape), Tensor(e.value.shape)});
    return s;
}

void ema_update(ModelState& teacher, const ModelState& student, double decay) {
    if (!teacher.same_structure(student))
        throw std::invalid_argument("ema_update: structural mismatch");
    if (decay < 0.0 || decay > 1.0) throw std::invalid_argument("ema_update: decay out of [0,1]");
    for (std::size_t i = 0; i < teacher.entries.size(); ++i) {
        Tensor& t = teacher.entries[i].value;
        const Tensor& s = student.entries[i].value;
        for (std::size_t k = 0; k < t.size(); ++k)
            t[k] = decay * t[k] + (1.0 - decay) * s[k];
    }
}

void adam_step(ModelState& model, AdamState& opt, Tape& tape,
               const std::vector<std::pair<std::string, VarId>>& leaves,
               const OptimizerConfig& cfg) {
    ++opt.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
    for (auto& slot : opt.slots) {
        Tensor& w = model.find(slot.name);
        VarId leaf = -1;
        for (const auto& [name, id] : leaves)
            if (name == slot.name) {
                leaf = id;
                break;
            }
        if (leaf < 0) throw std::runtime_error("adam_step: no tape leaf for " + slot.name);
        const Tensor& g = tape.grad(leaf);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double grad = g[i] + cfg.weight_decay * w[i];
            slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * grad;
            slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * grad * grad;
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

StepStats train_step(TrainState& state, const std::vector<MultiModalSample>& labeled,
                     const std::vector<MultiModalSample>& unlabeled, const StepConfig& config,
                     int epoch, std::uint64_t step_aug_seed) {
    config.ema.validate();
    config.loss.validate();
    StepStats stats;
    stats.lambda = lambda_schedule(epoch - 1, config.loss);

    Tape tape;
    NetworkGraph student_graph(tape, state.student, config.net, /*trainable=*/true);

    // ---- unsupervised path: augment, score, select, consistency loss ----
    VarId l_cons_var = tape.constant(Tensor({1}));
    if (!unlabeled.empty()) {
        const int b = static_cast<int>(unlabeled.size());
        std::vector<ConsistencyRecord> records(b);
        std::vector<VarId> student_means(b);
        std::vector<Tensor> teacher_means(b);
        for (int u = 0; u < b; ++u) {
            auto copies = augment_copies(unlabeled[u], config.aug, step_aug_seed);
            std::vector<VarId> sprobs;
            Tensor tmean;
            ConsistencyRecord& rec = records[u];
            rec.sample_id = unlabeled[u].sample_id;
            for (const auto& copy : copies) {
                // student keeps batch-statistic normalization here but leaves
                // its running averages alone: only the labeled pass below may
                // touch them, so disabling the consistency term cannot perturb
                // the supervised trajectory
                VarId sp = student_graph.forward(copy.modality_a, copy.modality_b,
                                                 /*training=*/true, /*update_stats=*/false);
                sprobs.push_back(sp);
                // the teacher normalizes the same way (per-instance statistics,
                // state untouched) so the consistency target is not biased by
                // a train/eval normalization mismatch
                Tensor tp = forward(state.teacher, config.net, copy.modality_a, copy.modality_b,
                                    /*instance_stats=*/true);
                rec.probs_student.push_back(class_probability_vector(tape.val(sp)));
                rec.probs_teacher.push_back(class_probability_vector(tp));
                if (tmean.empty())
                    tmean = tp;
                else
                    for (std::size_t i = 0; i < tmean.size(); ++i) tmean[i] += tp[i];
            }
            for (double& v : tmean.data) v /= static_cast<double>(copies.size());
            rec.cons_student = consistency_score(rec.probs_student);
            rec.cons_teacher = consistency_score(rec.probs_teacher);
            student_means[u] = tape.mean_of(sprobs);
            teacher_means[u] = std::move(tmean);
        }

        stats.russ_active = config.use_russ;
        const int q = config.use_russ ? q_schedule(epoch, config.total_epochs, b) : b;
        SelectionMask mask = select(records, q);
        stats.q = mask.q_used;

        std::vector<std::pair<double, VarId>> terms;
        for (int u = 0; u < b; ++u)
            if (mask.selected[u]) {
                terms.emplace_back(1.0 / q, tape.mse_to(student_means[u], teacher_means[u]));
                stats.selected_ids.push_back(records[u].sample_id);
            }
        l_cons_var = tape.affine(terms);
    }

    // ---- supervised path ----
    VarId l_sup_var = tape.constant(Tensor({1}));
    if (!labeled.empty()) {
        // the labeled pass sees one fresh augmented view per step: the input
        // noise keeps the student stochastic, which is what makes the EMA
        // teacher an ensemble rather than a lagged copy. The stream is derived
        // from the step seed alone, so supervised-only runs draw identically.
        AugmentPolicy labeled_policy = config.aug;
        labeled_policy.m_copies = 1;
        labeled_policy.noise_sigma = config.labeled_noise_sigma;
        const std::uint64_t labeled_seed = derive_seed(step_aug_seed, "labeled");
        std::vector<std::pair<double, VarId>> terms;
        for (const auto& s : labeled) {
            if (!s.mask) throw std::invalid_argument("train_step: labeled sample without mask");
            MultiModalSample view = augment_copies(s, labeled_policy, labeled_seed)[0];
            VarId p = student_graph.forward(view.modality_a, view.modality_b, /*training=*/true,
                                            /*update_stats=*/true);
            terms.emplace_back(1.0 / labeled.size(),
                               tape.supervised_loss(p, *s.mask, config.loss.dice_smooth));
        }
        l_sup_var = tape.affine(terms);
    }

    VarId total =
        tape.affine({{config.loss.alpha_sup, l_sup_var}, {stats.lambda, l_cons_var}});
    stats.l_sup = tape.val(l_sup_var)[0];
    stats.l_cons = tape.val(l_cons_var)[0];
    stats.l_total = tape.val(total)[0];
    if (!std::isfinite(stats.l_total))
        throw std::runtime_error("train_step: non-finite loss");

    tape.backward(total);
    adam_step(state.student, state.optimizer, tape, student_graph.leaves(), config.opt);
    ema_update(state.teacher, state.student, config.ema.decay);
    ++state.global_step;
    return stats;
}

}  // namespace lesen
