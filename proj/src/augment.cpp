#include "lesen/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "lesen/rng.hpp"

namespace lesen {

void AugmentPolicy::validate() const {
    if (m_copies < 1) throw std::invalid_argument("AugmentPolicy.m_copies must be >= 1");
    if (noise_sigma < 0.0) throw std::invalid_argument("AugmentPolicy.noise_sigma must be >= 0");
    if (brightness_delta < 0.0)
        throw std::invalid_argument("AugmentPolicy.brightness_delta must be >= 0");
    if (gamma_min <= 0.0 || gamma_max < gamma_min)
        throw std::invalid_argument("AugmentPolicy gamma range invalid");
}

namespace {

void perturb(Tensor& img, const AugmentPolicy& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> gamma_dist(p.gamma_min, p.gamma_max);
    std::uniform_real_distribution<double> bright_dist(-p.brightness_delta, p.brightness_delta);
    double gamma = gamma_dist(rng);
    double bright = bright_dist(rng);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double& v : img.data) {
        double u = std::pow(std::clamp(v, 0.0, 1.0), gamma) + bright;
        if (p.noise_sigma > 0.0) u += p.noise_sigma * noise(rng);
        v = std::clamp(u, 0.0, 1.0);
    }
}

bool is_identity(const AugmentPolicy& p) {
    return p.noise_sigma == 0.0 && p.brightness_delta == 0.0 && p.gamma_min == 1.0 &&
           p.gamma_max == 1.0;
}

}  // namespace

std::vector<MultiModalSample> augment_copies(const MultiModalSample& sample,
                                             const AugmentPolicy& policy, std::uint64_t seed) {
    sample.validate();
    policy.validate();
    std::vector<MultiModalSample> copies;
    copies.reserve(policy.m_copies);
    for (int m = 0; m < policy.m_copies; ++m) {
        MultiModalSample c = sample;
        if (!is_identity(policy)) {
            auto rng = make_rng(
                derive_seed(seed, "augment", hash_str(0xcbf29ce484222325ULL, sample.sample_id),
                            static_cast<std::uint64_t>(m)));
            perturb(c.modality_a, policy, rng);
            perturb(c.modality_b, policy, rng);
        }
        copies.push_back(std::move(c));
    }
    return copies;
}

}  // namespace lesen
