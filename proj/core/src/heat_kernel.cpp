#include "fedmvc/heat_kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace fedmvc {

Eigen::MatrixXd hkc_minmax(const Eigen::MatrixXd& view, double epsilon) {
  if (view.rows() == 0 || view.cols() == 0)
    throw std::invalid_argument("hkc_minmax requires a nonempty view");
  if (!(epsilon > 0.0)) throw std::invalid_argument("hkc_minmax requires epsilon > 0");
  const Eigen::RowVectorXd lo = view.colwise().minCoeff();
  const Eigen::RowVectorXd span = view.colwise().maxCoeff() - lo;
  Eigen::MatrixXd delta = view.rowwise() - lo;
  delta.array().rowwise() /= (span.array() + epsilon);
  return delta;
}

Eigen::MatrixXd hkc_meandev(const Eigen::MatrixXd& view) {
  if (view.rows() == 0 || view.cols() == 0)
    throw std::invalid_argument("hkc_meandev requires a nonempty view");
  const Eigen::RowVectorXd mean = view.colwise().mean();
  return (view.rowwise() - mean).cwiseAbs();
}

HeatKernelCoefficients compute_coefficients(const std::vector<Eigen::MatrixXd>& views,
                                            HkcEstimator estimator, double epsilon) {
  HeatKernelCoefficients coeffs;
  coeffs.view_delta.reserve(views.size());
  for (const auto& view : views)
    coeffs.view_delta.push_back(estimator == HkcEstimator::MinMax ? hkc_minmax(view, epsilon)
                                                                  : hkc_meandev(view));
  return coeffs;
}

double ked(const Eigen::Ref<const Eigen::RowVectorXd>& x,
           const Eigen::Ref<const Eigen::RowVectorXd>& a,
           const Eigen::Ref<const Eigen::RowVectorXd>& delta) {
  if (x.size() != a.size() || x.size() != delta.size())
    throw std::invalid_argument("ked requires x, a and delta of equal length");
  const double s = (delta.array() * (x - a).array().square()).sum();
  return 1.0 - std::exp(-s);
}

double fked(const std::vector<Eigen::MatrixXd>& views,
            const std::vector<Eigen::MatrixXd>& centers, const HeatKernelCoefficients& coeffs,
            std::size_t i, std::size_t k, std::size_t h) {
  return ked(views[h].row(static_cast<Eigen::Index>(i)),
             centers[h].row(static_cast<Eigen::Index>(k)),
             coeffs.view_delta[h].row(static_cast<Eigen::Index>(i)));
}

}  // namespace fedmvc
