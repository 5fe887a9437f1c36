// SPDX-License-Identifier: Apache-2.0
//
// Shared aliases, tolerances and small utilities used across the library.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlqc {

using cx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;

// Tolerance policy, uniform across modules:
//   tol_input  validates caller-supplied objects (unitarity, normalization),
//   tol_output is what constructed objects guarantee,
//   tol_singular is the cutoff below which polar factors are refused,
//   tol_eig is the eigenvalue cutoff used when taking entropies.
inline constexpr double tol_input = 1e-9;
inline constexpr double tol_output = 1e-10;
inline constexpr double tol_singular = 1e-12;
inline constexpr double tol_eig = 1e-14;

struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void str_impl(std::ostringstream&) {}

template <class T, class... Rest>
void str_impl(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  str_impl(os, rest...);
}

template <class... Args>
std::string str(const Args&... args) {
  std::ostringstream os;
  os.precision(12);
  str_impl(os, args...);
  return os.str();
}

}  // namespace detail

template <class... Args>
[[noreturn]] void fail(const Args&... args) {
  throw error(detail::str(args...));
}

template <class... Args>
void require(bool cond, const Args&... args) {
  if (!cond) fail(args...);
}

inline std::int64_t checked_product(const std::vector<int>& dims) {
  std::int64_t p = 1;
  for (int d : dims) {
    require(d >= 1, "dimension must be positive, got ", d);
    p *= d;
    require(p <= (std::int64_t(1) << 26), "total dimension ", p, " exceeds the dense cap");
  }
  return p;
}

// Mixed-radix helpers. Factor 0 is the most significant digit, so ascending
// factor order corresponds to the usual row-major kron convention:
// embed(Z at factor 0 of [2,2]) == Z (x) I == diag(1,1,-1,-1).
inline std::vector<std::int64_t> strides_of(const std::vector<int>& dims) {
  std::vector<std::int64_t> s(dims.size());
  std::int64_t acc = 1;
  for (int i = int(dims.size()) - 1; i >= 0; --i) {
    s[size_t(i)] = acc;
    acc *= dims[size_t(i)];
  }
  return s;
}

using Rng = std::mt19937_64;

inline cx randn_cx(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  double re = g(rng), im = g(rng);
  return cx(re, im) / std::sqrt(2.0);
}

// Haar unitary via QR of a Ginibre matrix with phase fix.
inline Mat haar_unitary(int dim, Rng& rng) {
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = randn_cx(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    cx d = r(j, j);
    double a = std::abs(d);
    q.col(j) *= (a < 1e-300) ? cx(1, 0) : d / a;
  }
  return q;
}

inline Vec haar_state(int dim, Rng& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = randn_cx(rng);
  v.normalize();
  return v;
}

// FNV-1a, used only to fingerprint configs inside reports.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace nlqc
