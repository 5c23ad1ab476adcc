#pragma once

#include <vector>

#include <Eigen/Dense>

namespace fedmvc {

enum class HkcEstimator { MinMax, MeanDev };

/// Per-view heat-kernel coefficient matrices (one n x d_h matrix per view,
/// entries >= 0), computed once per fit from the data alone.
struct HeatKernelCoefficients {
  std::vector<Eigen::MatrixXd> view_delta;
};

/// delta_ij = (x_ij - min_j) / (max_j - min_j + epsilon); every entry in [0, 1).
Eigen::MatrixXd hkc_minmax(const Eigen::MatrixXd& view, double epsilon = 1e-12);

/// delta_ij = |x_ij - mean_j|.
Eigen::MatrixXd hkc_meandev(const Eigen::MatrixXd& view);

HeatKernelCoefficients compute_coefficients(const std::vector<Eigen::MatrixXd>& views,
                                            HkcEstimator estimator, double epsilon = 1e-12);

/// Kernel Euclidean distance 1 - exp(-sum_j delta_j (x_j - a_j)^2), in [0, 1).
double ked(const Eigen::Ref<const Eigen::RowVectorXd>& x,
           const Eigen::Ref<const Eigen::RowVectorXd>& a,
           const Eigen::Ref<const Eigen::RowVectorXd>& delta);

/// KED between sample i and center k within view h, using that sample's
/// coefficient row. The exponent sums the features of the single view only.
double fked(const std::vector<Eigen::MatrixXd>& views,
            const std::vector<Eigen::MatrixXd>& centers, const HeatKernelCoefficients& coeffs,
            std::size_t i, std::size_t k, std::size_t h);

}  // namespace fedmvc
