// Copyright 2026 The DPMS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpms/error.hpp"

namespace dpms {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kMaxCovariates = 64;

// Subset of covariates, stored as a bit-set. Bit j (zero-based) set means
// column j of the design matrix is active.
class ModelMask {
 public:
  constexpr ModelMask() = default;
  constexpr explicit ModelMask(std::uint64_t bits) : bits_(bits) {}

  static ModelMask from_indices(std::span<const int> zero_based) {
    std::uint64_t bits = 0;
    for (int j : zero_based) {
      if (j < 0 || j >= kMaxCovariates) {
        throw ConfigError("covariate index " + std::to_string(j) +
                          " outside [0, 64)");
      }
      bits |= std::uint64_t{1} << j;
    }
    return ModelMask(bits);
  }

  static ModelMask full(int d) {
    return d >= kMaxCovariates ? ModelMask(~std::uint64_t{0})
                               : ModelMask((std::uint64_t{1} << d) - 1);
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(int j) const { return (bits_ >> j) & 1U; }
  constexpr bool is_subset_of(ModelMask other) const {
    return (bits_ & ~other.bits_) == 0;
  }
  // Highest index + 1; a mask fits in d columns iff width() <= d.
  constexpr int width() const { return 64 - std::countl_zero(bits_); }

  std::vector<int> indices() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(std::countr_zero(b));
    }
    return out;
  }

  friend constexpr bool operator==(ModelMask, ModelMask) = default;

 private:
  std::uint64_t bits_ = 0;
};

// Canonical order: cardinality first, then numeric bit value.
struct CanonicalOrder {
  constexpr bool operator()(ModelMask a, ModelMask b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.bits() < b.bits();
  }
};

struct ModelMaskHash {
  std::size_t operator()(ModelMask m) const noexcept {
    return std::hash<std::uint64_t>{}(m.bits());
  }
};

// Design matrix with entries in [-1, 1] and response with entries in
// [-r, r]. Bounds are checked on construction and violations throw.
class Dataset {
 public:
  Dataset(Matrix x, Vector y, double r, std::vector<std::string> names = {},
          bool r_data_dependent = false)
      : x_(std::move(x)),
        y_(std::move(y)),
        r_(r),
        names_(std::move(names)),
        r_data_dependent_(r_data_dependent) {
    if (x_.rows() < 1 || x_.cols() < 1) {
      throw DataError("dataset needs at least one row and one column");
    }
    if (x_.cols() > kMaxCovariates) {
      throw DataError("at most 64 covariates are supported");
    }
    if (x_.rows() != y_.size()) {
      throw DataError("design has " + std::to_string(x_.rows()) +
                      " rows but response has " + std::to_string(y_.size()));
    }
    if (!(r_ > 0) || !std::isfinite(r_)) {
      throw DataError("response bound r must be positive and finite");
    }
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      for (Eigen::Index j = 0; j < x_.cols(); ++j) {
        const double v = x_(i, j);
        if (!(std::abs(v) <= 1.0)) {
          throw DataError("row " + std::to_string(i + 1) + ", column " +
                          std::to_string(j + 1) + ": covariate value " +
                          std::to_string(v) + " outside [-1, 1]");
        }
      }
      if (!(std::abs(y_(i)) <= r_)) {
        throw DataError("row " + std::to_string(i + 1) + ": response " +
                        std::to_string(y_(i)) + " outside [-r, r] with r = " +
                        std::to_string(r_));
      }
    }
    if (names_.empty()) {
      for (Eigen::Index j = 0; j < x_.cols(); ++j) {
        names_.push_back("x" + std::to_string(j + 1));
      }
    } else if (static_cast<Eigen::Index>(names_.size()) != x_.cols()) {
      throw DataError("column name count does not match design width");
    }
  }

  const Matrix& x() const { return x_; }
  const Vector& y() const { return y_; }
  double r() const { return r_; }
  Eigen::Index n() const { return x_.rows(); }
  int d() const { return static_cast<int>(x_.cols()); }
  const std::vector<std::string>& names() const { return names_; }
  // True when r was taken from the observed responses rather than supplied.
  bool r_data_dependent() const { return r_data_dependent_; }

 private:
  Matrix x_;
  Vector y_;
  double r_;
  std::vector<std::string> names_;
  bool r_data_dependent_;
};

struct SufficientStats {
  Matrix xtx;
  Vector xty;
  double yty = 0.0;
  Eigen::Index n = 0;

  int d() const { return static_cast<int>(xty.size()); }

  // ||Y - X beta||^2 from the stored moments. Clamped at zero because the
  // expansion can go slightly negative through cancellation.
  double rss(const Vector& beta) const {
    const double v = yty - 2.0 * beta.dot(xty) + beta.dot(xtx * beta);
    return std::max(v, 0.0);
  }
};

inline SufficientStats sufficient_stats(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) throw DataError("X and Y row counts differ");
  SufficientStats s;
  const auto d = x.cols();
  s.xtx = Matrix::Zero(d, d);
  s.xtx.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  s.xtx = s.xtx.selfadjointView<Eigen::Lower>();
  s.xty = x.transpose() * y;
  s.yty = y.squaredNorm();
  s.n = x.rows();
  return s;
}

inline SufficientStats sufficient_stats(const Dataset& data) {
  return sufficient_stats(data.x(), data.y());
}

// Principal sub-problem on the columns in m, in ascending index order.
inline SufficientStats restrict(const SufficientStats& s, ModelMask m) {
  if (m.width() > s.d()) {
    throw DataError("model mask references a column beyond d = " +
                    std::to_string(s.d()));
  }
  const std::vector<int> idx = m.indices();
  const auto k = static_cast<Eigen::Index>(idx.size());
  SufficientStats out;
  out.xtx.resize(k, k);
  out.xty.resize(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    out.xty(a) = s.xty(idx[a]);
    for (Eigen::Index b = 0; b < k; ++b) out.xtx(a, b) = s.xtx(idx[a], idx[b]);
  }
  out.yty = s.yty;
  out.n = s.n;
  return out;
}

enum class StandardizePolicy { kNone, kClip, kRescale };

struct Range {
  double lo = -1.0;
  double hi = 1.0;
};

struct StandardizeOptions {
  // Public response bound. When absent, r is set to max|Y| after the
  // transform and the dataset is flagged as r_data_dependent.
  std::optional<double> r;
  // Per-column public ranges, required by kRescale.
  std::vector<Range> x_ranges;
  std::optional<Range> y_range;
  std::vector<std::string> names;
};

namespace detail {

inline double affine_to_unit(double v, Range range) {
  return 2.0 * (v - range.lo) / (range.hi - range.lo) - 1.0;
}

inline void check_range(Range range, const std::string& what) {
  if (!(range.hi > range.lo) || !std::isfinite(range.lo) ||
      !std::isfinite(range.hi)) {
    throw ConfigError("rescale range for " + what + " has zero width");
  }
}

}  // namespace detail

// Maps raw data into the bounded form required by the privacy calibration.
// kClip truncates, kRescale maps affinely from caller-supplied public ranges,
// kNone leaves values alone (and construction fails on any violation).
inline Dataset standardize(Matrix raw_x, Vector raw_y, StandardizePolicy policy,
                           const StandardizeOptions& opts = {}) {
  if (raw_x.rows() != raw_y.size()) {
    throw DataError("design has " + std::to_string(raw_x.rows()) +
                    " rows but response has " + std::to_string(raw_y.size()));
  }
  if (opts.r && !(*opts.r > 0)) throw ConfigError("r must be positive");

  switch (policy) {
    case StandardizePolicy::kNone:
      break;
    case StandardizePolicy::kClip:
      raw_x = raw_x.cwiseMax(-1.0).cwiseMin(1.0);
      if (opts.r) raw_y = raw_y.cwiseMax(-*opts.r).cwiseMin(*opts.r);
      break;
    case StandardizePolicy::kRescale: {
      if (static_cast<Eigen::Index>(opts.x_ranges.size()) != raw_x.cols()) {
        throw ConfigError("rescale needs one range per covariate column");
      }
      if (!opts.y_range) throw ConfigError("rescale needs a response range");
      for (Eigen::Index j = 0; j < raw_x.cols(); ++j) {
        const Range range = opts.x_ranges[static_cast<std::size_t>(j)];
        detail::check_range(range, "column " + std::to_string(j + 1));
        for (Eigen::Index i = 0; i < raw_x.rows(); ++i) {
          raw_x(i, j) = detail::affine_to_unit(raw_x(i, j), range);
        }
      }
      detail::check_range(*opts.y_range, "response");
      const double target = opts.r.value_or(1.0);
      for (Eigen::Index i = 0; i < raw_y.size(); ++i) {
        raw_y(i) = target * detail::affine_to_unit(raw_y(i), *opts.y_range);
      }
      break;
    }
  }

  double r = 0.0;
  bool data_dependent = false;
  if (opts.r) {
    r = *opts.r;
  } else {
    r = raw_y.size() > 0 ? raw_y.cwiseAbs().maxCoeff() : 0.0;
    data_dependent = true;
    if (!(r > 0)) {
      throw DataError("response is identically zero; supply r explicitly");
    }
  }
  return Dataset(std::move(raw_x), std::move(raw_y), r, opts.names,
                 data_dependent);
}

// Prepends a column of ones. The intercept is an ordinary selectable column.
inline Matrix with_intercept(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

}  // namespace dpms
