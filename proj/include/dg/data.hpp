#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dg/gmm.hpp"
#include "dg/tensor.hpp"

namespace dg {

struct DatasetRecord {
  Tensor x;
  std::optional<int> class_label;
  std::vector<std::uint8_t> attributes;  // bit flags
  std::vector<int> mask;                 // per-cell classes, empty when absent
};

struct Dataset {
  std::vector<DatasetRecord> records;
  int mask_h = 0;  // grid extents when masks are present
  int mask_w = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  std::vector<Tensor> xs() const;
  std::vector<int> labels() const;  // throws if any record lacks one
  std::vector<std::vector<int>> masks() const;
};

/// Procedural grid images: low-intensity background, one axis-aligned
/// rectangle per image painted in its class's intensity band, exact mask.
struct GridMaskSpec {
  int h = 8;
  int w = 8;
  int num_fg_classes = 3;  // mask classes 1..num_fg_classes; 0 = background
  double bg_lo = 0.0;
  double bg_hi = 0.2;
  double band_lo = 0.3;   // foreground bands live in [band_lo, 1]
  double band_fill = 0.6;  // fraction of each class slot its band occupies
  int min_side = 2;
  int max_side = 5;
  double noise_level = 0.02;

  void validate() const;
  /// Disjoint intensity band [lo, hi] for foreground class c in 1..num_fg_classes.
  std::pair<double, double> band(int c) const;
};

/// Mixture draws; class_label = generating component, attribute bit 0 =
/// sign of the component's first mean coordinate.
Dataset gen_gmm_dataset(const GmmSpec& gmm, int n, std::uint64_t seed);

Dataset gen_gridmask_dataset(const GridMaskSpec& spec, int n, std::uint64_t seed);

/// Per-cell class of a grid image by nearest intensity band; exact
/// inverse of the generator at noise_level 0.
std::vector<int> oracle_segment(const Tensor& image, const GridMaskSpec& spec);

/// Seeded shuffle, then a largest-remainder contiguous cut.
std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions,
                           std::uint64_t seed);

/// Directory container: data.dtns (stacked x), optional masks.dtns,
/// meta.jsonl (one object per record). Round-trips bit-exactly.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace dg
