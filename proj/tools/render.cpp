#include "render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace dg::tool {
namespace {

constexpr unsigned char kSeparator = 128;

int square_side(std::size_t cells) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells))));
  if (static_cast<std::size_t>(side) * side != cells)
    throw std::invalid_argument("render_grid: samples are not square grids");
  return side;
}

unsigned char to_byte(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::lround(clamped * 255.0f));
}

}  // namespace

void render_grid(const Tensor& samples, const std::string& path) {
  std::size_t n = 0;
  int side = 0;
  if (samples.rank() == 1) {
    n = 1;
    side = square_side(samples.shape()[0]);
  } else if (samples.rank() == 2) {
    // Either one [h, w] image or a stack of flattened grids; a stack of
    // square count means ambiguity resolved in favor of the stack.
    n = samples.shape()[0];
    side = square_side(samples.shape()[1]);
  } else if (samples.rank() == 3) {
    if (samples.shape()[1] != samples.shape()[2])
      throw std::invalid_argument("render_grid: grids must be square");
    n = samples.shape()[0];
    side = static_cast<int>(samples.shape()[1]);
  } else {
    throw std::invalid_argument("render_grid: rank must be 1, 2, or 3");
  }
  if (n == 0) throw std::invalid_argument("render_grid: empty batch");

  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = static_cast<int>((n + cols - 1) / cols);
  const int width = cols * side + (cols - 1);
  const int height = rows * side + (rows - 1);

  std::vector<unsigned char> img(static_cast<std::size_t>(width) * height, 0);
  // separator rows / columns
  for (int r = side; r < height; r += side + 1)
    for (int c = 0; c < width; ++c) img[static_cast<std::size_t>(r) * width + c] = kSeparator;
  for (int c = side; c < width; c += side + 1)
    for (int r = 0; r < height; ++r) img[static_cast<std::size_t>(r) * width + c] = kSeparator;

  const std::size_t cells = static_cast<std::size_t>(side) * side;
  for (std::size_t i = 0; i < n; ++i) {
    const int tr = static_cast<int>(i) / cols;
    const int tc = static_cast<int>(i) % cols;
    const int r0 = tr * (side + 1);
    const int c0 = tc * (side + 1);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c)
        img[static_cast<std::size_t>(r0 + r) * width + (c0 + c)] =
            to_byte(samples[i * cells + static_cast<std::size_t>(r) * side + c]);
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!os) throw std::runtime_error(path + ": write failed");
}

}  // namespace dg::tool
