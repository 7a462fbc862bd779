#include "dg/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dg/rng.hpp"

namespace dg {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<Tensor> Dataset::xs() const {
  std::vector<Tensor> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.x);
  return out;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.class_label.has_value())
      throw std::runtime_error("dataset record has no class label");
    out.push_back(*r.class_label);
  }
  return out;
}

std::vector<std::vector<int>> Dataset::masks() const {
  std::vector<std::vector<int>> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.mask.empty()) throw std::runtime_error("dataset record has no mask");
    out.push_back(r.mask);
  }
  return out;
}

void GridMaskSpec::validate() const {
  if (h < 1 || w < 1) throw std::invalid_argument("gridmask: grid extents must be positive");
  if (num_fg_classes < 1) throw std::invalid_argument("gridmask: need at least one class");
  if (!(0.0 <= bg_lo && bg_lo <= bg_hi && bg_hi < band_lo))
    throw std::invalid_argument("gridmask: background range must sit below the bands");
  if (!(band_lo < 1.0) || !(band_fill > 0.0 && band_fill <= 1.0))
    throw std::invalid_argument("gridmask: invalid band layout");
  if (min_side < 1 || max_side < min_side || max_side > std::min(h, w))
    throw std::invalid_argument("gridmask: rectangle sides must fit the grid");
  if (noise_level < 0.0) throw std::invalid_argument("gridmask: negative noise level");
}

std::pair<double, double> GridMaskSpec::band(int c) const {
  if (c < 1 || c > num_fg_classes) throw std::invalid_argument("gridmask: class out of range");
  const double slot = (1.0 - band_lo) / num_fg_classes;
  const double center = band_lo + (c - 0.5) * slot;
  const double half = 0.5 * band_fill * slot;
  return {center - half, center + half};
}

Dataset gen_gmm_dataset(const GmmSpec& gmm, int n, std::uint64_t seed) {
  gmm.validate();
  if (n < 1) throw std::invalid_argument("gen_gmm_dataset: n < 1");
  Dataset ds;
  ds.records.reserve(n);
  Rng rng(seed);
  const std::size_t d = static_cast<std::size_t>(gmm.dim());
  for (int i = 0; i < n; ++i) {
    int comp = 0;
    std::vector<double> x = gmm_draw(gmm, rng, &comp);
    DatasetRecord rec;
    rec.x = Tensor::from_doubles({d}, x);
    rec.class_label = comp;
    rec.attributes = {static_cast<std::uint8_t>(gmm.means[comp][0] > 0.0 ? 1 : 0)};
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Dataset gen_gridmask_dataset(const GridMaskSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("gen_gridmask_dataset: n < 1");
  Dataset ds;
  ds.mask_h = spec.h;
  ds.mask_w = spec.w;
  ds.records.reserve(n);
  Rng rng(seed);
  const std::size_t cells = static_cast<std::size_t>(spec.h) * spec.w;
  for (int i = 0; i < n; ++i) {
    DatasetRecord rec;
    rec.x = Tensor(std::vector<std::size_t>{static_cast<std::size_t>(spec.h),
                                            static_cast<std::size_t>(spec.w)});
    rec.mask.assign(cells, 0);
    for (std::size_t c = 0; c < cells; ++c)
      rec.x[c] = static_cast<float>(spec.bg_lo + (spec.bg_hi - spec.bg_lo) * rng.next_double());

    const int cls = 1 + static_cast<int>(rng.next_index(spec.num_fg_classes));
    const int sh = spec.min_side + static_cast<int>(rng.next_index(spec.max_side - spec.min_side + 1));
    const int sw = spec.min_side + static_cast<int>(rng.next_index(spec.max_side - spec.min_side + 1));
    const int top = static_cast<int>(rng.next_index(spec.h - sh + 1));
    const int left = static_cast<int>(rng.next_index(spec.w - sw + 1));
    const auto [lo, hi] = spec.band(cls);
    for (int r = top; r < top + sh; ++r) {
      for (int c = left; c < left + sw; ++c) {
        const std::size_t cell = static_cast<std::size_t>(r) * spec.w + c;
        rec.x[cell] = static_cast<float>(lo + (hi - lo) * rng.next_double());
        rec.mask[cell] = cls;
      }
    }
    if (spec.noise_level > 0.0) {
      for (std::size_t c = 0; c < cells; ++c) {
        double v = rec.x[c] + spec.noise_level * rng.next_normal();
        rec.x[c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    rec.class_label = cls - 1;  // 0-based class ids for classifier heads
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::vector<int> oracle_segment(const Tensor& image, const GridMaskSpec& spec) {
  const std::size_t cells = static_cast<std::size_t>(spec.h) * spec.w;
  if (image.size() != cells) throw std::invalid_argument("oracle_segment: size mismatch");
  std::vector<int> mask(cells);
  auto interval_dist = [](double v, double lo, double hi) {
    if (v < lo) return lo - v;
    if (v > hi) return v - hi;
    return 0.0;
  };
  for (std::size_t c = 0; c < cells; ++c) {
    const double v = image[c];
    double best = interval_dist(v, spec.bg_lo, spec.bg_hi);
    int best_cls = 0;
    for (int k = 1; k <= spec.num_fg_classes; ++k) {
      const auto [lo, hi] = spec.band(k);
      double d = interval_dist(v, lo, hi);
      if (d < best) {
        best = d;
        best_cls = k;
      }
    }
    mask[c] = best_cls;
  }
  return mask;
}

std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions,
                           std::uint64_t seed) {
  if (fractions.empty()) throw std::invalid_argument("split: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw std::invalid_argument("split: negative fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");

  const std::size_t n = ds.size();
  // largest-remainder apportionment of n across the fractions
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += sizes[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) sizes[remainders[i % remainders.size()].second] += 1;

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.next_index(i);
    std::swap(perm[i - 1], perm[j]);
  }

  std::vector<Dataset> parts(fractions.size());
  std::size_t pos = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    parts[p].mask_h = ds.mask_h;
    parts[p].mask_w = ds.mask_w;
    parts[p].records.reserve(sizes[p]);
    for (std::size_t i = 0; i < sizes[p]; ++i)
      parts[p].records.push_back(ds.records[perm[pos++]]);
  }
  return parts;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("save_dataset: empty dataset");
  fs::create_directories(dir);

  std::vector<Tensor> xs = ds.xs();
  save_tensor((fs::path(dir) / "data.dtns").string(), stack(xs));

  const bool with_masks = !ds.records[0].mask.empty();
  if (with_masks) {
    std::vector<Tensor> masks;
    masks.reserve(ds.size());
    for (const auto& r : ds.records) {
      if (static_cast<int>(r.mask.size()) != ds.mask_h * ds.mask_w)
        throw std::invalid_argument("save_dataset: mask size mismatch");
      Tensor m(std::vector<std::size_t>{static_cast<std::size_t>(ds.mask_h),
                                        static_cast<std::size_t>(ds.mask_w)});
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(r.mask[i]);
      masks.push_back(std::move(m));
    }
    save_tensor((fs::path(dir) / "masks.dtns").string(), stack(masks));
  }

  std::ofstream meta(fs::path(dir) / "meta.jsonl", std::ios::trunc);
  if (!meta) throw std::runtime_error("save_dataset: cannot write meta.jsonl");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    json line;
    line["index"] = i;
    if (r.class_label.has_value())
      line["class_label"] = *r.class_label;
    else
      line["class_label"] = nullptr;
    line["attributes"] = json::array();
    for (auto b : r.attributes) line["attributes"].push_back(static_cast<int>(b));
    meta << line.dump() << "\n";
  }
  if (!meta.good()) throw std::runtime_error("save_dataset: write failed for meta.jsonl");
}

Dataset load_dataset(const std::string& dir) {
  const fs::path base(dir);
  if (!fs::exists(base / "meta.jsonl"))
    throw std::runtime_error("load_dataset: missing " + (base / "meta.jsonl").string());

  Tensor data = load_tensor((base / "data.dtns").string());
  if (data.rank() < 2) throw std::runtime_error("load_dataset: data.dtns must be stacked");
  const std::size_t n = data.shape()[0];

  Dataset ds;
  bool with_masks = fs::exists(base / "masks.dtns");
  Tensor masks;
  if (with_masks) {
    masks = load_tensor((base / "masks.dtns").string());
    if (masks.rank() != 3 || masks.shape()[0] != n)
      throw std::runtime_error("load_dataset: masks.dtns does not match data.dtns");
    ds.mask_h = static_cast<int>(masks.shape()[1]);
    ds.mask_w = static_cast<int>(masks.shape()[2]);
  }

  std::ifstream meta(base / "meta.jsonl");
  std::string line;
  std::size_t i = 0;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    if (i >= n) throw std::runtime_error("load_dataset: more meta lines than records");
    json j = json::parse(line, nullptr, true);
    if (j.value("index", static_cast<std::size_t>(-1)) != i)
      throw std::runtime_error("load_dataset: meta.jsonl index mismatch at line " +
                               std::to_string(i));
    DatasetRecord rec;
    rec.x = unstack_row(data, i);
    if (!j.at("class_label").is_null()) rec.class_label = j.at("class_label").get<int>();
    for (const auto& b : j.at("attributes"))
      rec.attributes.push_back(static_cast<std::uint8_t>(b.get<int>()));
    if (with_masks) {
      Tensor m = unstack_row(masks, i);
      rec.mask.resize(m.size());
      for (std::size_t c = 0; c < m.size(); ++c) rec.mask[c] = static_cast<int>(m[c]);
    }
    ds.records.push_back(std::move(rec));
    ++i;
  }
  if (i != n)
    throw std::runtime_error("load_dataset: meta.jsonl has " + std::to_string(i) +
                             " lines for " + std::to_string(n) + " records");
  return ds;
}

}  // namespace dg
