#include "lesen/russ.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lesen {

std::vector<double> class_probability_vector(const Tensor& prob_map) {
    if (prob_map.shape.size() != 3)
        throw std::invalid_argument("class_probability_vector: expects (K,H,W)");
    const int K = prob_map.shape[0];
    const std::size_t n = static_cast<std::size_t>(prob_map.shape[1]) * prob_map.shape[2];
    std::vector<double> v(K, 0.0);
    for (int c = 0; c < K; ++c) {
        const double* p = &prob_map.data[c * n];
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += p[i];
        v[c] = s / static_cast<double>(n);
    }
    return v;
}

double consistency_score(const std::vector<std::vector<double>>& probs) {
    if (probs.empty()) throw std::invalid_argument("consistency_score: M must be >= 1");
    const std::size_t m = probs.size();
    const std::size_t k = probs[0].size();
    for (const auto& row : probs)
        if (row.size() != k) throw std::invalid_argument("consistency_score: ragged rows");
    double score = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (const auto& row : probs) mean += row[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (const auto& row : probs) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(m);  // population form
        score -= std::sqrt(var);
    }
    return score;
}

int q_schedule(int epoch, int total_epochs, int b) {
    if (b < 1) throw std::invalid_argument("q_schedule: batch size must be >= 1");
    if (epoch < 1 || epoch > total_epochs)
        throw std::invalid_argument("q_schedule: epoch out of [1, total_epochs]");
    const double t = 1.0 - static_cast<double>(epoch) / total_epochs;
    const double raw = b * std::exp(-t * t);
    const int q = static_cast<int>(std::round(raw));  // half away from zero
    return std::clamp(q, 1, b);
}

SelectionMask select(const std::vector<ConsistencyRecord>& records, int q) {
    const int b = static_cast<int>(records.size());
    if (q < 1 || q > b) throw std::invalid_argument("select: q out of [1, batch size]");
    std::vector<int> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        const double si = records[i].cons_student + records[i].cons_teacher;
        const double sj = records[j].cons_student + records[j].cons_teacher;
        if (si != sj) return si > sj;
        return records[i].sample_id < records[j].sample_id;
    });
    SelectionMask mask;
    mask.q_used = q;
    mask.selected.assign(records.size(), false);
    for (const auto& r : records) mask.sample_ids.push_back(r.sample_id);
    for (int i = 0; i < q; ++i) mask.selected[order[i]] = true;
    return mask;
}

}  // namespace lesen
