#pragma once

#include <string>

#include "dg/tensor.hpp"

namespace dg::tool {

/// Tiles a batch of square grid samples into one binary PGM (P5) image.
/// Accepts [n, side*side], [n, h, w] (h = w), [h, w], or a single flat
/// square vector; values map [0,1] -> [0,255] with clamping. Tiles are
/// laid out row-major in a ceil(sqrt(n))-column grid with 1-pixel
/// separators; missing tiles in the last row stay black.
void render_grid(const Tensor& samples, const std::string& path);

}  // namespace dg::tool
