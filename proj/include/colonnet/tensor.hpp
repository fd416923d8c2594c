#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace colonnet {

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename Head, typename... Tail>
void format_into(std::ostringstream& os, Head&& head, Tail&&... tail) {
  os << std::forward<Head>(head);
  format_into(os, std::forward<Tail>(tail)...);
}

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  format_into(os, std::forward<Args>(args)...);
  return os.str();
}

}  // namespace detail

[[noreturn]] inline void fail(const std::string& message) {
  throw std::runtime_error(message);
}

template <typename First, typename Second, typename... Rest>
[[noreturn]] void fail(First&& first, Second&& second, Rest&&... rest) {
  fail(detail::concat(std::forward<First>(first), std::forward<Second>(second),
                      std::forward<Rest>(rest)...));
}

#define COLONNET_CHECK(condition, ...)                               \
  do {                                                               \
    if (!(condition)) {                                              \
      ::colonnet::fail(::colonnet::detail::concat(__VA_ARGS__));     \
    }                                                                \
  } while (0)

using Shape = std::vector<Eigen::Index>;

inline Eigen::Index shape_count(const Shape& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index d : shape) n *= d;
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

/// Dense row-major tensor over a dynamic shape. Image data is kept in
/// NHWC order throughout; rank-2 views map straight onto Eigen matrices
/// so heavy lifting stays inside Eigen GEMM kernels.
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Storage = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using MatrixMap =
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap = Eigen::Map<
      const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    for (Eigen::Index d : shape_) {
      COLONNET_CHECK(d >= 0, "tensor dimension must be non-negative, got ",
                     shape_string(shape_));
    }
    data_ = Storage::Zero(shape_count(shape_));
  }

  Tensor(std::initializer_list<Eigen::Index> shape) : Tensor(Shape(shape)) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Eigen::Index dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](Eigen::Index i) { return data_[i]; }
  const T& operator[](Eigen::Index i) const { return data_[i]; }

  T& operator()(Eigen::Index i, Eigen::Index j) {
    return data_[i * shape_[1] + j];
  }
  const T& operator()(Eigen::Index i, Eigen::Index j) const {
    return data_[i * shape_[1] + j];
  }
  T& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k,
                      Eigen::Index l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  /// Flat vector / array views (Eigen expressions).
  auto vec() { return Eigen::Map<Storage>(data_.data(), data_.size()); }
  auto vec() const {
    return Eigen::Map<const Storage>(data_.data(), data_.size());
  }
  auto array() { return vec().array(); }
  auto array() const { return vec().array(); }

  /// Row-major matrix view of the flat buffer.
  MatrixMap matrix(Eigen::Index rows, Eigen::Index cols) {
    COLONNET_CHECK(rows * cols == size(), "matrix view ", rows, "x", cols,
                   " incompatible with tensor of ", size(), " elements");
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Eigen::Index rows, Eigen::Index cols) const {
    COLONNET_CHECK(rows * cols == size(), "matrix view ", rows, "x", cols,
                   " incompatible with tensor of ", size(), " elements");
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  /// Leading-dimension collapse: (d0, d1*...*dn) view.
  MatrixMap rows_by_rest() {
    COLONNET_CHECK(rank() >= 1, "rows_by_rest on rank-0 tensor");
    Eigen::Index r = shape_[0];
    return matrix(r, r == 0 ? 0 : size() / r);
  }
  ConstMatrixMap rows_by_rest() const {
    COLONNET_CHECK(rank() >= 1, "rows_by_rest on rank-0 tensor");
    Eigen::Index r = shape_[0];
    return matrix(r, r == 0 ? 0 : size() / r);
  }

  void reshape(Shape shape) {
    COLONNET_CHECK(shape_count(shape) == size(), "cannot reshape ",
                   shape_string(shape_), " into ", shape_string(shape));
    shape_ = std::move(shape);
  }

  Tensor reshaped(Shape shape) const {
    Tensor t = *this;
    t.reshape(std::move(shape));
    return t;
  }

  void set_zero() { data_.setZero(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  Storage data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;
using MaskTensor = Tensor<std::uint8_t>;

/// 64-bit FNV-1a, used for parameter checksums (bitwise identity checks).
inline std::uint64_t fnv1a(const void* bytes, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
std::uint64_t tensor_checksum(const Tensor<T>& t, std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(t.data(), static_cast<std::size_t>(t.size()) * sizeof(T), h);
}

/// Deterministic random source. All sampling helpers are implemented on
/// top of one raw 64-bit stream so that every draw is reproducible from
/// the seed alone, independent of the standard library's distribution
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    // xorshift* generator; full 2^64-1 period, trivially reproducible.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 2685821657736338717ull;
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  Eigen::Index uniform_index(Eigen::Index n) {
    COLONNET_CHECK(n > 0, "uniform_index requires n > 0");
    auto idx = static_cast<Eigen::Index>(uniform() * static_cast<double>(n));
    return idx >= n ? n - 1 : idx;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (pairs cached).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Independent child stream; deterministic in (seed, stream).
  Rng derive(std::uint64_t stream) const {
    return Rng(mix(seed_ ^ (0x9e3779b97f4a7c15ull + stream * 0xbf58476d1ce4e5b9ull)));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer; avoids weak low-entropy seeds for xorshift.
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
    return z == 0 ? 0x2545f4914f6cdd1dull : z;
  }

  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 1;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

template <typename V>
void shuffle(V& values, Rng& rng) {
  for (Eigen::Index i = static_cast<Eigen::Index>(values.size()) - 1; i > 0; --i) {
    Eigen::Index j = rng.uniform_index(i + 1);
    std::swap(values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(j)]);
  }
}

}  // namespace colonnet
