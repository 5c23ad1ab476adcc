#include "fedmvc/tensor.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedmvc {

namespace {

std::size_t checked_size(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have order >= 1");
  std::size_t total = 1;
  for (std::size_t g : shape) {
    if (g == 0) throw std::invalid_argument("tensor extents must be >= 1");
    total *= g;
  }
  return total;
}

void check_mode(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.order())
    throw std::invalid_argument("mode " + std::to_string(mode) + " out of range for order " +
                                std::to_string(t.order()));
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (checked_size(shape_) != data_.size())
    throw std::invalid_argument("tensor value count does not match shape");
}

std::size_t DenseTensor::linear_index(const std::vector<std::size_t>& index) const {
  if (index.size() != shape_.size())
    throw std::invalid_argument("multi-index order does not match tensor order");
  std::size_t lin = 0;
  for (std::size_t m = 0; m < index.size(); ++m) {
    if (index[m] >= shape_[m]) throw std::invalid_argument("multi-index out of range");
    lin = lin * shape_[m] + index[m];
  }
  return lin;
}

std::vector<std::size_t> DenseTensor::multi_index(std::size_t linear) const {
  std::vector<std::size_t> idx(shape_.size());
  for (std::size_t m = shape_.size(); m-- > 0;) {
    idx[m] = linear % shape_[m];
    linear /= shape_[m];
  }
  return idx;
}

Eigen::MatrixXd matricize(const DenseTensor& t, std::size_t mode) {
  check_mode(t, mode);
  const auto& shape = t.shape();
  const std::size_t rows = shape[mode];
  const std::size_t cols = t.size() / rows;
  Eigen::MatrixXd out(rows, cols);

  // Column strides per Definition 3: among the non-mode indices the earliest
  // varies fastest, so the stride of index l is the product of the extents of
  // the non-mode indices before it.
  std::vector<std::size_t> col_stride(shape.size(), 0);
  std::size_t acc = 1;
  for (std::size_t l = 0; l < shape.size(); ++l) {
    if (l == mode) continue;
    col_stride[l] = acc;
    acc *= shape[l];
  }

  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t lin = 0; lin < t.size(); ++lin) {
    std::size_t col = 0;
    for (std::size_t l = 0; l < shape.size(); ++l)
      if (l != mode) col += idx[l] * col_stride[l];
    out(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(col)) = t[lin];
    for (std::size_t m = shape.size(); m-- > 0;) {
      if (++idx[m] < shape[m]) break;
      idx[m] = 0;
    }
  }
  return out;
}

DenseTensor fold(const Eigen::MatrixXd& unfolded, const std::vector<std::size_t>& shape,
                 std::size_t mode) {
  const std::size_t total = checked_size(shape);
  if (mode >= shape.size()) throw std::invalid_argument("fold mode out of range");
  if (static_cast<std::size_t>(unfolded.rows()) != shape[mode] ||
      static_cast<std::size_t>(unfolded.cols()) != total / shape[mode])
    throw std::invalid_argument("unfolded matrix does not match target shape");

  DenseTensor t(shape);
  std::vector<std::size_t> col_stride(shape.size(), 0);
  std::size_t acc = 1;
  for (std::size_t l = 0; l < shape.size(); ++l) {
    if (l == mode) continue;
    col_stride[l] = acc;
    acc *= shape[l];
  }
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t col = 0;
    for (std::size_t l = 0; l < shape.size(); ++l)
      if (l != mode) col += idx[l] * col_stride[l];
    t[lin] = unfolded(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(col));
    for (std::size_t m = shape.size(); m-- > 0;) {
      if (++idx[m] < shape[m]) break;
      idx[m] = 0;
    }
  }
  return t;
}

Eigen::VectorXd vectorize(const DenseTensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data().data(),
                                           static_cast<Eigen::Index>(t.size()));
}

DenseTensor mode_n_product(const DenseTensor& t, const Eigen::MatrixXd& m, std::size_t mode) {
  check_mode(t, mode);
  if (static_cast<std::size_t>(m.cols()) != t.extent(mode))
    throw std::invalid_argument("mode-n product: matrix columns must match tensor extent");
  std::vector<std::size_t> out_shape = t.shape();
  out_shape[mode] = static_cast<std::size_t>(m.rows());
  return fold(m * matricize(t, mode), out_shape, mode);
}

double scalar_product(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("scalar product requires identical shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double frobenius_norm(const DenseTensor& t) { return std::sqrt(scalar_product(t, t)); }

double tensor_distance(const DenseTensor& x, const DenseTensor& a, double theta,
                       Diagnostics* diag) {
  if (x.shape() != a.shape())
    throw std::invalid_argument("tensor distance requires identical shapes");
  if (!(theta > 0.0)) throw std::invalid_argument("tensor distance requires theta > 0");

  const std::size_t total = x.size();
  std::vector<std::vector<std::size_t>> coords(total);
  for (std::size_t l = 0; l < total; ++l) coords[l] = x.multi_index(l);

  const double scale = 1.0 / (2.0 * std::numbers::pi * theta);
  double quad = 0.0;
  for (std::size_t l = 0; l < total; ++l) {
    const double rl = x[l] - a[l];
    if (rl == 0.0) continue;
    for (std::size_t m = 0; m < total; ++m) {
      const double rm = x[m] - a[m];
      if (rm == 0.0) continue;
      double sq = 0.0;
      for (std::size_t i = 0; i < coords[l].size(); ++i) {
        const double diff =
            static_cast<double>(coords[l][i]) - static_cast<double>(coords[m][i]);
        sq += diff * diff;
      }
      quad += scale * std::exp(-sq / (2.0 * theta)) * rl * rm;
    }
  }
  if (quad < 0.0) {
    diag_note(diag, "tensor_distance: negative quadratic form clamped to zero");
    quad = 0.0;
  }
  return std::sqrt(quad);
}

std::size_t TuckerFactors::parameter_count() const {
  return core.size() + static_cast<std::size_t>(cluster.size()) +
         static_cast<std::size_t>(feature.size()) + static_cast<std::size_t>(view.size());
}

namespace {

Eigen::MatrixXd leading_singular_vectors(const Eigen::MatrixXd& unfolded, std::size_t rank) {
  const auto want = static_cast<Eigen::Index>(rank);
  // Requests past the thin rank keep the orthogonal complement columns.
  const bool thin = want <= std::min(unfolded.rows(), unfolded.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(unfolded,
                                        thin ? Eigen::ComputeThinU : Eigen::ComputeFullU);
  Eigen::MatrixXd u = svd.matrixU().leftCols(want);
  // Deterministic sign: largest-magnitude entry of each vector positive.
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Eigen::Index at = 0;
    u.col(c).cwiseAbs().maxCoeff(&at);
    if (u(at, c) < 0.0) u.col(c) = -u.col(c);
  }
  return u;
}

}  // namespace

TuckerFactors hosvd_init(const DenseTensor& t, const std::array<std::size_t, 3>& ranks) {
  if (t.order() != 3) throw std::invalid_argument("hosvd_init requires a 3-way tensor");
  for (std::size_t m = 0; m < 3; ++m)
    if (ranks[m] == 0 || ranks[m] > t.extent(m))
      throw std::invalid_argument("hosvd_init rank " + std::to_string(m) +
                                  " must lie in [1, extent]");

  TuckerFactors f;
  f.cluster = leading_singular_vectors(matricize(t, 0), ranks[0]);
  f.feature = leading_singular_vectors(matricize(t, 1), ranks[1]);
  f.view = leading_singular_vectors(matricize(t, 2), ranks[2]);
  DenseTensor core = mode_n_product(t, f.cluster.transpose(), 0);
  core = mode_n_product(core, f.feature.transpose(), 1);
  f.core = mode_n_product(core, f.view.transpose(), 2);
  return f;
}

DenseTensor tucker_reconstruct(const TuckerFactors& f) {
  if (f.core.order() != 3) throw std::invalid_argument("tucker core must be 3-way");
  DenseTensor t = mode_n_product(f.core, f.cluster, 0);
  t = mode_n_product(t, f.feature, 1);
  return mode_n_product(t, f.view, 2);
}

}  // namespace fedmvc
