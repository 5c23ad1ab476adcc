#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedmvc/dataset.hpp"
#include "fedmvc/diagnostics.hpp"
#include "fedmvc/heat_kernel.hpp"
#include "fedmvc/local_solver.hpp"
#include "fedmvc/tensor.hpp"

namespace fedmvc {

/// Views stacked into one n x D x s tensor, zero-padded to the widest view.
/// Slot (i, j, h) is valid iff j < view_dims[h]; padded slots are excluded
/// from every distance and least-squares sum.
struct TensorizedViews {
  DenseTensor data;
  std::vector<std::size_t> view_dims;

  std::size_t samples() const { return data.extent(0); }
  std::size_t padded_dim() const { return data.extent(1); }
  std::size_t views() const { return data.extent(2); }
  bool slot_valid(std::size_t j, std::size_t h) const { return j < view_dims[h]; }
};

/// Stacks the dataset's views. min_padded_dim can widen the tensor beyond
/// the largest view (extra slots are padding like any other).
TensorizedViews tensorize_views(const MultiViewDataset& data, std::size_t min_padded_dim = 0);

/// Recovers view h (n x d_h), dropping padded columns.
Eigen::MatrixXd extract_view(const TensorizedViews& tv, std::size_t h);

/// Cuts a c x D x s centers tensor into per-view c x d_h matrices.
std::vector<Eigen::MatrixXd> center_view_slices(const DenseTensor& centers,
                                                const std::vector<std::size_t>& view_dims);

/// Tucker ranks of the centers tensor; the cluster-mode rank is fixed to the
/// cluster count.
struct TuckerRanks {
  std::size_t feature = 1;  // r2 <= D
  std::size_t view = 1;     // r3 <= s
};

struct TensorizedModel {
  Eigen::MatrixXd memberships;
  TuckerFactors factors;
  Eigen::VectorXd view_weights;
  std::vector<double> objective_trace;  // true objective per iteration
  std::vector<double> surrogate_trace;  // weighted fit error after each factor sweep
  std::vector<std::string> diagnostics;
};

/// KED between sample i and reconstructed center row k inside view h,
/// summing only the valid feature slots.
double tked(const TensorizedViews& tv, const DenseTensor& centers,
            const HeatKernelCoefficients& coeffs, std::size_t i, std::size_t k, std::size_t h);

/// Elementwise weights and targets of the linearized center subproblem: per
/// valid slot W_kjh = sum_i mu^m v^alpha exp(-phi) delta_ij and the matching
/// weighted mean target; the exp factor is frozen at the reconstruction the
/// caller passes in. Padded slots carry zero weight.
struct CenterTargets {
  DenseTensor weights;  // c x D x s
  DenseTensor targets;  // c x D x s
};
CenterTargets weighted_center_targets(const TensorizedViews& tv,
                                      const Eigen::MatrixXd& memberships,
                                      const Eigen::VectorXd& view_weights,
                                      const DenseTensor& reconstructed,
                                      const HeatKernelCoefficients& coeffs, double fuzzifier,
                                      double view_exponent);

/// sum_kjh W_kjh (reconstruct(f)_kjh - target_kjh)^2.
double weighted_fit_error(const CenterTargets& targets, const TuckerFactors& factors);

/// Least-squares updates of the Tucker blocks against CenterTargets, solving
/// the normal equations. Singular systems are ridge-regularized toward the
/// current value (1e-8) with a diagnostic; all-zero systems keep the current
/// value silently since the objective is flat there.
DenseTensor update_core(const CenterTargets& targets, const TuckerFactors& factors,
                        Diagnostics* diag = nullptr);

enum class FactorMode { Cluster, Feature, View };
Eigen::MatrixXd update_factor(const CenterTargets& targets, const TuckerFactors& factors,
                              FactorMode mode, Diagnostics* diag = nullptr);

/// Alternating optimization of Algorithm-2 shape: reconstruct, memberships,
/// core, cluster/feature/view factors, view weights. Without an explicit
/// initialization the dense seeding is padded and compressed by HOSVD at
/// (c, r2, r3), with the cluster factor absorbed into the core so it starts
/// at identity.
TensorizedModel fit_tensorized(const MultiViewDataset& data, const SolverConfig& config,
                               const TuckerRanks& ranks,
                               const TuckerFactors* initial_factors = nullptr,
                               const Eigen::VectorXd* initial_view_weights = nullptr);

}  // namespace fedmvc
