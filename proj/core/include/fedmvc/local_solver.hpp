#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedmvc/dataset.hpp"
#include "fedmvc/diagnostics.hpp"
#include "fedmvc/heat_kernel.hpp"

namespace fedmvc {

struct SolverConfig {
  std::size_t clusters = 2;
  double fuzzifier = 2.0;      // m > 1
  double view_exponent = 2.0;  // alpha > 1
  double tolerance = 1e-6;     // relative objective change between iterations
  std::size_t max_iters = 100;
  std::uint64_t seed = 0;
  HkcEstimator estimator = HkcEstimator::MinMax;
  double hkc_epsilon = 1e-12;

  void validate() const;
};

struct LocalModel {
  Eigen::MatrixXd memberships;           // n x c, rows on the simplex
  std::vector<Eigen::MatrixXd> centers;  // per view: c x d_h
  Eigen::VectorXd view_weights;          // s, on the simplex
  std::vector<double> objective_trace;   // one value per completed iteration
  std::vector<std::string> diagnostics;
};

/// Per-view KED matrices (n x c each) between every sample and center.
std::vector<Eigen::MatrixXd> pairwise_distances(const std::vector<Eigen::MatrixXd>& views,
                                                const std::vector<Eigen::MatrixXd>& centers,
                                                const HeatKernelCoefficients& coeffs);

double local_objective(const std::vector<Eigen::MatrixXd>& distances,
                       const Eigen::MatrixXd& memberships, const Eigen::VectorXd& view_weights,
                       double fuzzifier, double view_exponent);

/// Closed-form simplex minimizer per sample. Rows with zero-cost clusters
/// split the membership equally over those clusters.
Eigen::MatrixXd update_memberships(const std::vector<Eigen::MatrixXd>& distances,
                                   const Eigen::VectorXd& view_weights, double fuzzifier,
                                   double view_exponent);

/// One fixed-point sweep of the center update. Each coordinate moves to the
/// coefficient-weighted mean with weights mu^m v^alpha exp(-phi) delta_ij,
/// phi taken at the current centers; coordinates whose coefficient-weighted
/// mass vanishes fall back to the plain weighted mean (the objective is flat
/// there), and clusters with zero total mass keep their previous center.
std::vector<Eigen::MatrixXd> update_centers(const std::vector<Eigen::MatrixXd>& views,
                                            const std::vector<Eigen::MatrixXd>& centers,
                                            const Eigen::MatrixXd& memberships,
                                            const Eigen::VectorXd& view_weights,
                                            const HeatKernelCoefficients& coeffs,
                                            double fuzzifier, double view_exponent,
                                            Diagnostics* diag = nullptr);

/// Closed-form simplex minimizer over view weights; zero-cost views share
/// the weight equally.
Eigen::VectorXd update_view_weights(const std::vector<Eigen::MatrixXd>& distances,
                                    const Eigen::MatrixXd& memberships, double fuzzifier,
                                    double view_exponent);

/// Greedy k-means++ seeding on the concatenated views: candidates per step
/// are sampled proportionally to the squared distance potential and the one
/// minimizing the resulting potential wins.
std::vector<Eigen::MatrixXd> seed_centers(const std::vector<Eigen::MatrixXd>& views,
                                          std::size_t clusters, std::mt19937_64& rng);

/// Alternating optimization: memberships, one center sweep, view weights.
/// Stops when the relative objective change drops below tolerance or after
/// max_iters iterations. Optional initial centers/view weights allow warm
/// starts; otherwise seeding uses the config seed.
LocalModel fit_local(const MultiViewDataset& data, const SolverConfig& config,
                     const std::vector<Eigen::MatrixXd>* initial_centers = nullptr,
                     const Eigen::VectorXd* initial_view_weights = nullptr);

}  // namespace fedmvc
