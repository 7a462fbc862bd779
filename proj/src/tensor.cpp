#include "dg/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "DTNS io assumes a little-endian host");

namespace dg {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extent must be positive");
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(shape_product(shape_), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size())
    throw std::invalid_argument("tensor shape does not match data length");
}

Tensor Tensor::full(std::vector<std::size_t> shape, float value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

bool Tensor::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::ensure_finite(const char* what) const {
  if (!all_finite()) throw std::runtime_error(std::string("non-finite values in ") + what);
}

std::vector<double> Tensor::as_doubles() const {
  return std::vector<double>(data_.begin(), data_.end());
}

Tensor Tensor::from_doubles(std::vector<std::size_t> shape, const std::vector<double>& v) {
  std::vector<float> f(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(v[i]);
  return Tensor(std::move(shape), std::move(f));
}

namespace {

constexpr char kMagic[4] = {'D', 'T', 'N', 'S'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::uint8_t kDtypeF32 = 0x01;

template <typename T>
void write_le(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw std::runtime_error("truncated DTNS stream");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_dtns(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  write_le<std::uint8_t>(os, kVersion);
  write_le<std::uint8_t>(os, kDtypeF32);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape()) write_le<std::uint64_t>(os, static_cast<std::uint64_t>(e));
  os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!os) throw std::runtime_error("DTNS write failed");
}

Tensor read_dtns(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad DTNS magic");
  const auto version = read_le<std::uint8_t>(is);
  if (version != kVersion) throw std::runtime_error("unsupported DTNS version");
  const auto dtype = read_le<std::uint8_t>(is);
  if (dtype != kDtypeF32) throw std::runtime_error("unsupported DTNS dtype");
  const auto rank = read_le<std::uint32_t>(is);
  if (rank > 16) throw std::runtime_error("implausible DTNS rank");
  std::vector<std::size_t> shape(rank);
  std::size_t n = 1;
  for (auto& e : shape) {
    e = static_cast<std::size_t>(read_le<std::uint64_t>(is));
    if (e == 0) throw std::runtime_error("zero DTNS extent");
    n *= e;
  }
  std::vector<float> data(n);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw std::runtime_error("truncated DTNS payload");
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  write_dtns(os, t);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  try {
    return read_dtns(is);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(e.what()) + " in " + path);
  }
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack of zero tensors");
  std::vector<std::size_t> shape{parts.size()};
  for (std::size_t e : parts[0].shape()) shape.push_back(e);
  std::vector<float> data;
  data.reserve(parts.size() * parts[0].size());
  for (const auto& p : parts) {
    if (!p.same_shape(parts[0])) throw std::invalid_argument("stack of unequal shapes");
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor unstack_row(const Tensor& stacked, std::size_t i) {
  if (stacked.rank() < 1 || i >= stacked.shape()[0]) throw std::out_of_range("unstack_row index");
  std::vector<std::size_t> shape(stacked.shape().begin() + 1, stacked.shape().end());
  if (shape.empty()) shape.push_back(1);
  std::size_t row = stacked.size() / stacked.shape()[0];
  std::vector<float> data(stacked.data() + i * row, stacked.data() + (i + 1) * row);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace dg
