#pragma once

#include <cstdint>
#include <vector>

#include "lesen/synth_data.hpp"

namespace lesen {

// Intensity-only perturbations so per-pixel predictions stay spatially
// aligned across the M copies; masks pass through untouched.
struct AugmentPolicy {
    double noise_sigma = 0.05;
    double gamma_min = 0.9;
    double gamma_max = 1.1;
    double brightness_delta = 0.05;
    int m_copies = 5;

    void validate() const;
};

// Copy m draws from an RNG stream keyed by (seed, sample_id, m), so the
// copies are independent of batch composition and loader concurrency.
std::vector<MultiModalSample> augment_copies(const MultiModalSample& sample,
                                             const AugmentPolicy& policy, std::uint64_t seed);

}  // namespace lesen
