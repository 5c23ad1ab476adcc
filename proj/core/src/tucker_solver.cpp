#include "fedmvc/tucker_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedmvc {

namespace {

constexpr double kRidge = 1e-8;

std::vector<Eigen::MatrixXd> original_views(const TensorizedViews& tv) {
  std::vector<Eigen::MatrixXd> views(tv.views());
  for (std::size_t h = 0; h < tv.views(); ++h) views[h] = extract_view(tv, h);
  return views;
}

// Solves N x = b for a PSD normal matrix; all-zero systems keep `current`
// silently (flat objective), singular ones are ridge-regularized toward it.
Eigen::VectorXd solve_normal(const Eigen::MatrixXd& normal, const Eigen::VectorXd& rhs,
                             const Eigen::VectorXd& current, const std::string& what,
                             Diagnostics* diag) {
  if (normal.isZero(0.0)) return current;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (!lu.isInvertible()) {
    diag_note(diag, what + ": singular normal equations; ridge-regularized");
    const Eigen::MatrixXd reg =
        normal + kRidge * Eigen::MatrixXd::Identity(normal.rows(), normal.cols());
    return reg.ldlt().solve(rhs + kRidge * current);
  }
  return normal.ldlt().solve(rhs);
}

void check_rank_shapes(const TuckerFactors& f) {
  if (f.core.order() != 3) throw std::invalid_argument("tucker factors: core must be 3-way");
  if (static_cast<std::size_t>(f.cluster.cols()) != f.core.extent(0) ||
      static_cast<std::size_t>(f.feature.cols()) != f.core.extent(1) ||
      static_cast<std::size_t>(f.view.cols()) != f.core.extent(2))
    throw std::invalid_argument("tucker factors: factor columns must match core extents");
}

}  // namespace

std::vector<Eigen::MatrixXd> center_view_slices(const DenseTensor& centers,
                                                const std::vector<std::size_t>& view_dims) {
  if (centers.order() != 3 || centers.extent(2) != view_dims.size())
    throw std::invalid_argument("center_view_slices: centers tensor shape mismatch");
  const std::size_t c = centers.extent(0);
  std::vector<Eigen::MatrixXd> slices(view_dims.size());
  for (std::size_t h = 0; h < view_dims.size(); ++h) {
    if (view_dims[h] > centers.extent(1))
      throw std::invalid_argument("center_view_slices: view wider than centers tensor");
    slices[h].resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(view_dims[h]));
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t j = 0; j < view_dims[h]; ++j)
        slices[h](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
            centers(k, j, h);
  }
  return slices;
}

TensorizedViews tensorize_views(const MultiViewDataset& data, std::size_t min_padded_dim) {
  data.validate();
  const std::size_t n = data.samples();
  const std::size_t s = data.view_count();
  std::size_t padded = min_padded_dim;
  for (const auto& view : data.views)
    padded = std::max(padded, static_cast<std::size_t>(view.cols()));

  TensorizedViews tv;
  tv.data = DenseTensor({n, padded, s});
  tv.view_dims.resize(s);
  for (std::size_t h = 0; h < s; ++h) {
    tv.view_dims[h] = static_cast<std::size_t>(data.views[h].cols());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < tv.view_dims[h]; ++j)
        tv.data(i, j, h) =
            data.views[h](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return tv;
}

Eigen::MatrixXd extract_view(const TensorizedViews& tv, std::size_t h) {
  if (h >= tv.views()) throw std::invalid_argument("extract_view: view index out of range");
  Eigen::MatrixXd view(static_cast<Eigen::Index>(tv.samples()),
                       static_cast<Eigen::Index>(tv.view_dims[h]));
  for (std::size_t i = 0; i < tv.samples(); ++i)
    for (std::size_t j = 0; j < tv.view_dims[h]; ++j)
      view(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = tv.data(i, j, h);
  return view;
}

double tked(const TensorizedViews& tv, const DenseTensor& centers,
            const HeatKernelCoefficients& coeffs, std::size_t i, std::size_t k, std::size_t h) {
  if (centers.order() != 3 || centers.extent(1) != tv.padded_dim() ||
      centers.extent(2) != tv.views())
    throw std::invalid_argument("tked: centers tensor shape mismatch");
  const auto& delta = coeffs.view_delta.at(h);
  double exponent = 0.0;
  for (std::size_t j = 0; j < tv.view_dims[h]; ++j) {
    const double diff = tv.data(i, j, h) - centers(k, j, h);
    exponent += delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * diff * diff;
  }
  return 1.0 - std::exp(-exponent);
}

CenterTargets weighted_center_targets(const TensorizedViews& tv,
                                      const Eigen::MatrixXd& memberships,
                                      const Eigen::VectorXd& view_weights,
                                      const DenseTensor& reconstructed,
                                      const HeatKernelCoefficients& coeffs, double fuzzifier,
                                      double view_exponent) {
  const std::size_t n = tv.samples();
  const std::size_t c = static_cast<std::size_t>(memberships.cols());
  const std::size_t D = tv.padded_dim();
  const std::size_t s = tv.views();

  CenterTargets out{DenseTensor({c, D, s}), DenseTensor({c, D, s})};
  const Eigen::MatrixXd um = memberships.array().pow(fuzzifier);

  for (std::size_t h = 0; h < s; ++h) {
    const double vw = std::pow(view_weights(static_cast<Eigen::Index>(h)), view_exponent);
    const auto& delta = coeffs.view_delta[h];
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        double phi = 0.0;
        for (std::size_t j = 0; j < tv.view_dims[h]; ++j) {
          const double diff = tv.data(i, j, h) - reconstructed(k, j, h);
          phi += delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * diff * diff;
        }
        const double w =
            um(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * vw * std::exp(-phi);
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < tv.view_dims[h]; ++j) {
          const double wd =
              w * delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          out.weights(k, j, h) += wd;
          out.targets(k, j, h) += wd * tv.data(i, j, h);
        }
      }
      for (std::size_t j = 0; j < tv.view_dims[h]; ++j)
        if (out.weights(k, j, h) > 0.0) out.targets(k, j, h) /= out.weights(k, j, h);
    }
  }
  return out;
}

double weighted_fit_error(const CenterTargets& targets, const TuckerFactors& factors) {
  const DenseTensor recon = tucker_reconstruct(factors);
  if (recon.shape() != targets.weights.shape())
    throw std::invalid_argument("weighted_fit_error: shape mismatch");
  double total = 0.0;
  for (std::size_t l = 0; l < recon.size(); ++l) {
    const double r = recon[l] - targets.targets[l];
    total += targets.weights[l] * r * r;
  }
  return total;
}

DenseTensor update_core(const CenterTargets& targets, const TuckerFactors& factors,
                        Diagnostics* diag) {
  check_rank_shapes(factors);
  const std::size_t c = targets.weights.extent(0);
  const std::size_t D = targets.weights.extent(1);
  const std::size_t s = targets.weights.extent(2);
  const std::size_t r1 = factors.core.extent(0);
  const std::size_t r2 = factors.core.extent(1);
  const std::size_t r3 = factors.core.extent(2);
  const Eigen::Index dim = static_cast<Eigen::Index>(r1 * r2 * r3);

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd u(dim);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < D; ++j) {
      for (std::size_t h = 0; h < s; ++h) {
        const double w = targets.weights(k, j, h);
        if (w <= 0.0) continue;
        Eigen::Index at = 0;
        for (std::size_t a = 0; a < r1; ++a) {
          const double pa = factors.cluster(static_cast<Eigen::Index>(k),
                                            static_cast<Eigen::Index>(a));
          for (std::size_t b = 0; b < r2; ++b) {
            const double pq = pa * factors.feature(static_cast<Eigen::Index>(j),
                                                   static_cast<Eigen::Index>(b));
            for (std::size_t g = 0; g < r3; ++g)
              u(at++) = pq * factors.view(static_cast<Eigen::Index>(h),
                                          static_cast<Eigen::Index>(g));
          }
        }
        normal.selfadjointView<Eigen::Lower>().rankUpdate(u, w);
        rhs.noalias() += (w * targets.targets(k, j, h)) * u;
      }
    }
  }
  normal.triangularView<Eigen::StrictlyUpper>() = normal.transpose();

  const Eigen::Map<const Eigen::VectorXd> current(factors.core.data().data(), dim);
  const Eigen::VectorXd solved = solve_normal(normal, rhs, current, "update_core", diag);
  DenseTensor core({r1, r2, r3});
  Eigen::Map<Eigen::VectorXd>(core.data().data(), dim) = solved;
  return core;
}

Eigen::MatrixXd update_factor(const CenterTargets& targets, const TuckerFactors& factors,
                              FactorMode mode, Diagnostics* diag) {
  check_rank_shapes(factors);
  const std::size_t c = targets.weights.extent(0);
  const std::size_t D = targets.weights.extent(1);
  const std::size_t s = targets.weights.extent(2);

  // Contract the core with the two factors that stay fixed; rows of the
  // remaining factor then solve independent weighted least squares.
  DenseTensor design;
  const Eigen::MatrixXd* factor = nullptr;
  std::string what;
  switch (mode) {
    case FactorMode::Cluster:
      design = mode_n_product(mode_n_product(factors.core, factors.feature, 1), factors.view, 2);
      factor = &factors.cluster;
      what = "update_factor(cluster)";
      break;
    case FactorMode::Feature:
      design = mode_n_product(mode_n_product(factors.core, factors.cluster, 0), factors.view, 2);
      factor = &factors.feature;
      what = "update_factor(feature)";
      break;
    case FactorMode::View:
      design = mode_n_product(mode_n_product(factors.core, factors.cluster, 0),
                              factors.feature, 1);
      factor = &factors.view;
      what = "update_factor(view)";
      break;
  }

  Eigen::MatrixXd next = *factor;
  const Eigen::Index rank = factor->cols();
  Eigen::MatrixXd normal(rank, rank);
  Eigen::VectorXd rhs(rank), u(rank);

  const auto solve_row = [&](std::size_t row, auto&& for_each_slot) {
    normal.setZero();
    rhs.setZero();
    for_each_slot([&](double w, double target) {
      normal.selfadjointView<Eigen::Lower>().rankUpdate(u, w);
      rhs.noalias() += (w * target) * u;
    });
    normal.triangularView<Eigen::StrictlyUpper>() = normal.transpose();
    next.row(static_cast<Eigen::Index>(row)) =
        solve_normal(normal, rhs, factor->row(static_cast<Eigen::Index>(row)).transpose(),
                     what + " row " + std::to_string(row), diag)
            .transpose();
  };

  if (mode == FactorMode::Cluster) {
    for (std::size_t k = 0; k < c; ++k)
      solve_row(k, [&](auto&& accumulate) {
        for (std::size_t j = 0; j < D; ++j)
          for (std::size_t h = 0; h < s; ++h) {
            const double w = targets.weights(k, j, h);
            if (w <= 0.0) continue;
            for (Eigen::Index a = 0; a < rank; ++a)
              u(a) = design(static_cast<std::size_t>(a), j, h);
            accumulate(w, targets.targets(k, j, h));
          }
      });
  } else if (mode == FactorMode::Feature) {
    for (std::size_t j = 0; j < D; ++j)
      solve_row(j, [&](auto&& accumulate) {
        for (std::size_t k = 0; k < c; ++k)
          for (std::size_t h = 0; h < s; ++h) {
            const double w = targets.weights(k, j, h);
            if (w <= 0.0) continue;
            for (Eigen::Index b = 0; b < rank; ++b)
              u(b) = design(k, static_cast<std::size_t>(b), h);
            accumulate(w, targets.targets(k, j, h));
          }
      });
  } else {
    for (std::size_t h = 0; h < s; ++h)
      solve_row(h, [&](auto&& accumulate) {
        for (std::size_t k = 0; k < c; ++k)
          for (std::size_t j = 0; j < D; ++j) {
            const double w = targets.weights(k, j, h);
            if (w <= 0.0) continue;
            for (Eigen::Index g = 0; g < rank; ++g)
              u(g) = design(k, j, static_cast<std::size_t>(g));
            accumulate(w, targets.targets(k, j, h));
          }
      });
  }
  return next;
}

TensorizedModel fit_tensorized(const MultiViewDataset& data, const SolverConfig& config,
                               const TuckerRanks& ranks, const TuckerFactors* initial_factors,
                               const Eigen::VectorXd* initial_view_weights) {
  data.validate();
  config.validate();
  const std::size_t n = data.samples();
  const std::size_t s = data.view_count();
  const std::size_t c = config.clusters;
  if (c > n) throw std::invalid_argument("fit_tensorized: clusters must not exceed samples");

  const TensorizedViews tv = tensorize_views(data);
  const std::size_t D = tv.padded_dim();
  if (ranks.feature == 0 || ranks.feature > D)
    throw std::invalid_argument("fit_tensorized: feature rank must lie in [1, padded dim]");
  if (ranks.view == 0 || ranks.view > s)
    throw std::invalid_argument("fit_tensorized: view rank must lie in [1, view count]");

  const HeatKernelCoefficients coeffs =
      compute_coefficients(data.views, config.estimator, config.hkc_epsilon);

  TensorizedModel model;
  if (initial_factors != nullptr) {
    check_rank_shapes(*initial_factors);
    if (static_cast<std::size_t>(initial_factors->cluster.rows()) != c ||
        initial_factors->core.extent(1) != ranks.feature ||
        initial_factors->core.extent(2) != ranks.view ||
        static_cast<std::size_t>(initial_factors->feature.rows()) != D ||
        static_cast<std::size_t>(initial_factors->view.rows()) != s)
      throw std::invalid_argument("fit_tensorized: initial factor shapes mismatch");
    model.factors = *initial_factors;
  } else {
    std::mt19937_64 rng(config.seed);
    const auto dense_seed = seed_centers(data.views, c, rng);
    DenseTensor seed_tensor({c, D, s});
    for (std::size_t h = 0; h < s; ++h)
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t j = 0; j < tv.view_dims[h]; ++j)
          seed_tensor(k, j, h) = dense_seed[h](static_cast<Eigen::Index>(k),
                                               static_cast<Eigen::Index>(j));
    model.factors = hosvd_init(seed_tensor, {c, ranks.feature, ranks.view});
    // Absorb the orthogonal cluster factor so it starts at identity.
    model.factors.core = mode_n_product(model.factors.core, model.factors.cluster, 0);
    model.factors.cluster =
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  }
  if (initial_view_weights != nullptr) {
    if (initial_view_weights->size() != static_cast<Eigen::Index>(s))
      throw std::invalid_argument("fit_tensorized: initial view weight length mismatch");
    model.view_weights = *initial_view_weights;
  } else {
    model.view_weights =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s), 1.0 / static_cast<double>(s));
  }

  const std::vector<Eigen::MatrixXd> views = original_views(tv);
  Diagnostics diag;
  double previous = 0.0;
  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    DenseTensor recon = tucker_reconstruct(model.factors);
    auto dist = pairwise_distances(views, center_view_slices(recon, tv.view_dims), coeffs);
    model.memberships =
        update_memberships(dist, model.view_weights, config.fuzzifier, config.view_exponent);

    const CenterTargets targets =
        weighted_center_targets(tv, model.memberships, model.view_weights, recon, coeffs,
                                config.fuzzifier, config.view_exponent);
    model.factors.core = update_core(targets, model.factors, &diag);
    model.factors.cluster = update_factor(targets, model.factors, FactorMode::Cluster, &diag);
    model.factors.feature = update_factor(targets, model.factors, FactorMode::Feature, &diag);
    model.factors.view = update_factor(targets, model.factors, FactorMode::View, &diag);
    model.surrogate_trace.push_back(weighted_fit_error(targets, model.factors));

    recon = tucker_reconstruct(model.factors);
    dist = pairwise_distances(views, center_view_slices(recon, tv.view_dims), coeffs);
    model.view_weights =
        update_view_weights(dist, model.memberships, config.fuzzifier, config.view_exponent);
    const double objective = local_objective(dist, model.memberships, model.view_weights,
                                             config.fuzzifier, config.view_exponent);
    model.objective_trace.push_back(objective);
    if (iter > 0 &&
        std::abs(objective - previous) <= config.tolerance * std::max(std::abs(previous), 1e-300))
      break;
    previous = objective;
  }
  model.diagnostics = diag.notes();
  return model;
}

}  // namespace fedmvc
