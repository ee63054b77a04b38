#include "sscnn/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "sscnn/error.hpp"
#include "sscnn/random.hpp"

namespace sscnn {

static_assert(std::endian::native == std::endian::little,
              "SSTN I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'S', 'T', 'N'};

void validate(const Shape& shape) {
  if (shape.empty()) {
    throw InvalidShapeError("tensor rank must be at least 1");
  }
  for (std::size_t e : shape) {
    if (e == 0) {
      throw InvalidShapeError("tensor extent must be >= 1, got shape " +
                              shape_to_string(shape));
    }
  }
}

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& source) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw DataError("truncated tensor file: " + source);
  }
  return value;
}

}  // namespace

std::size_t shape_volume(const Shape& shape) {
  std::size_t v = 1;
  for (std::size_t e : shape) v *= e;
  return v;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Shape checked_shape(std::span<const std::int64_t> extents) {
  Shape shape;
  shape.reserve(extents.size());
  for (std::int64_t e : extents) {
    if (e < 1) {
      throw InvalidShapeError("tensor extent must be >= 1, got " +
                              std::to_string(e));
    }
    shape.push_back(static_cast<std::size_t>(e));
  }
  validate(shape);
  return shape;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate(shape_);
  data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate(shape_);
  if (data_.size() != shape_volume(shape_)) {
    throw InvalidShapeError("data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_to_string(shape_));
  }
}

Tensor::Tensor(Shape shape, const RandomFill& fill) : Tensor(std::move(shape)) {
  Rng rng(fill.seed);
  for (double& v : data_) v = rng.uniform(-fill.scale, fill.scale);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw InvalidShapeError("axis " + std::to_string(axis) +
                            " out of range for shape " + shape_to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw InvalidShapeError("index rank does not match tensor rank");
  }
  std::size_t flat = 0;
  for (std::size_t a = 0; a < index.size(); ++a) {
    if (index[a] >= shape_[a]) {
      throw InvalidShapeError("index out of range for shape " +
                              shape_to_string(shape_));
    }
    flat = flat * shape_[a] + index[a];
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::reshape(Shape shape) {
  validate(shape);
  if (shape_volume(shape) != data_.size()) {
    throw InvalidShapeError("cannot reshape " + shape_to_string(shape_) +
                            " to " + shape_to_string(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.empty()) {
    throw InvalidShapeError("cannot serialize an empty tensor");
  }
  if (t.rank() > std::numeric_limits<std::uint16_t>::max()) {
    throw InvalidShapeError("tensor rank too large to serialize");
  }
  out.write(kMagic.data(), kMagic.size());
  put<std::uint16_t>(out, kTensorFormatVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(t.rank()));
  for (std::size_t e : t.shape()) {
    if (e > std::numeric_limits<std::uint32_t>::max()) {
      throw InvalidShapeError("tensor extent too large to serialize");
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  }
  out.write(reinterpret_cast<const char*>(t.raw()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw DataError("bad tensor magic in " + source);
  }
  const auto version = get<std::uint16_t>(in, source);
  if (version != kTensorFormatVersion) {
    throw DataError("unsupported tensor format version " +
                    std::to_string(version) + " in " + source);
  }
  const auto rank = get<std::uint16_t>(in, source);
  if (rank == 0) {
    throw DataError("zero-rank tensor in " + source);
  }
  Shape shape(rank);
  for (auto& e : shape) {
    e = get<std::uint32_t>(in, source);
    if (e == 0) throw DataError("zero extent in " + source);
  }
  std::vector<double> data(shape_volume(shape));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) {
    throw DataError("truncated tensor data in " + source);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot open for writing: " + path.string());
  }
  write_tensor(out, t);
  if (!out) {
    throw DataError("write failed: " + path.string());
  }
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open tensor file: " + path.string());
  }
  Tensor t = read_tensor(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes in tensor file: " + path.string());
  }
  return t;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  const std::string s = os.str();
  return {s.begin(), s.end()};
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes,
                     const std::string& source) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()),
                        std::ios::binary);
  return read_tensor(is, source);
}

}  // namespace sscnn
