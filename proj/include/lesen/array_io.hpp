#pragma once

#include <string>

#include "lesen/tensor.hpp"

namespace lesen {

// Flat 2D image files: 4 magic bytes "VPI1", 1-byte dtype code (1 = float32),
// uint32 height, uint32 width (little-endian), then row-major little-endian
// float32 samples. Self-describing and trivially readable from any language.
void write_image(const std::string& path, const Tensor& img);
Tensor read_image(const std::string& path);

}  // namespace lesen
