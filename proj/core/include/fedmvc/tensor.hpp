#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "fedmvc/diagnostics.hpp"

namespace fedmvc {

/// Dense N-way tensor over double, row-major storage with the first index
/// slowest. All shape extents must be >= 1.
class DenseTensor {
public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> shape);
  DenseTensor(std::vector<std::size_t> shape, std::vector<double> values);

  std::size_t order() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t extent(std::size_t mode) const { return shape_[mode]; }
  std::size_t size() const { return data_.size(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Linear offset of a multi-index; inverse of multi_index().
  std::size_t linear_index(const std::vector<std::size_t>& index) const;
  std::vector<std::size_t> multi_index(std::size_t linear) const;

  double operator[](std::size_t linear) const { return data_[linear]; }
  double& operator[](std::size_t linear) { return data_[linear]; }

  template <class... Ix>
  double operator()(Ix... ix) const {
    return data_[offset(ix...)];
  }
  template <class... Ix>
  double& operator()(Ix... ix) {
    return data_[offset(ix...)];
  }

private:
  template <class... Ix>
  std::size_t offset(Ix... ix) const {
    const std::array<std::size_t, sizeof...(Ix)> idx{static_cast<std::size_t>(ix)...};
    std::size_t lin = 0;
    for (std::size_t m = 0; m < idx.size(); ++m) lin = lin * shape_[m] + idx[m];
    return lin;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Mode-n unfolding, shape (G_n, prod of the other extents). Columns
/// enumerate the non-mode indices with the earliest index varying fastest.
Eigen::MatrixXd matricize(const DenseTensor& t, std::size_t mode);

/// Inverse of matricize for a matrix whose row count matches shape[mode].
DenseTensor fold(const Eigen::MatrixXd& unfolded, const std::vector<std::size_t>& shape,
                 std::size_t mode);

/// Entries in storage (linearization) order.
Eigen::VectorXd vectorize(const DenseTensor& t);

/// t x_mode m, contracting the mode-th index with the columns of m.
DenseTensor mode_n_product(const DenseTensor& t, const Eigen::MatrixXd& m, std::size_t mode);

double scalar_product(const DenseTensor& a, const DenseTensor& b);
double frobenius_norm(const DenseTensor& t);

/// Location-kernel Mahalanobis-style distance between same-shape tensors:
/// sqrt((x-a)^T P (x-a)) with P_lm = exp(-||q_l - q_m||^2 / (2 theta)) / (2 pi theta)
/// over the multi-index coordinates q. Negative quadratic forms (P is not
/// guaranteed PSD) clamp to zero with a diagnostic. Standalone utility.
double tensor_distance(const DenseTensor& x, const DenseTensor& a, double theta,
                       Diagnostics* diag = nullptr);

/// Tucker factorization of a 3-way tensor: core (r1 x r2 x r3) with cluster
/// (G1 x r1), feature (G2 x r2) and view (G3 x r3) factors.
struct TuckerFactors {
  DenseTensor core;
  Eigen::MatrixXd cluster;
  Eigen::MatrixXd feature;
  Eigen::MatrixXd view;

  std::size_t parameter_count() const;
};

/// Truncated HOSVD of a 3-way tensor: per mode the leading left singular
/// vectors of the unfolding, each with its largest-magnitude entry made
/// positive, core = t contracted with the factor transposes.
TuckerFactors hosvd_init(const DenseTensor& t, const std::array<std::size_t, 3>& ranks);

/// core x1 cluster x2 feature x3 view.
DenseTensor tucker_reconstruct(const TuckerFactors& f);

}  // namespace fedmvc
