#pragma once

#include <string>
#include <vector>

#include "lesen/tensor.hpp"

namespace lesen {

// Per-unlabeled-sample record: one class-probability vector per augmented
// copy, for each of the student and teacher models, plus the derived scores.
struct ConsistencyRecord {
    std::string sample_id;
    std::vector<std::vector<double>> probs_student;  // (M, K)
    std::vector<std::vector<double>> probs_teacher;  // (M, K)
    double cons_student = 0.0;
    double cons_teacher = 0.0;
};

struct SelectionMask {
    std::vector<std::string> sample_ids;  // batch order preserved
    std::vector<bool> selected;
    int q_used = 0;
};

// Spatial mean of each class channel; entries sum to 1 (up to fp error).
std::vector<double> class_probability_vector(const Tensor& prob_map);

// -sum_j std([p_j^1 .. p_j^M]) with population standard deviation. 0 iff all
// rows identical, negative otherwise.
double consistency_score(const std::vector<std::vector<double>>& probs);

// q = clamp(round(b * exp(-(1 - epoch/total_epochs)^2)), 1, b), epoch 1-based
// so the final epoch hits exponent 0 exactly. Rounding is half-away-from-zero.
int q_schedule(int epoch, int total_epochs, int b);

// Rank by cons_student + cons_teacher descending, ties broken by ascending
// sample_id; keep the top q.
SelectionMask select(const std::vector<ConsistencyRecord>& records, int q);

}  // namespace lesen
