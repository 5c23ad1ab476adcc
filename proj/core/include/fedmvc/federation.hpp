#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedmvc/dataset.hpp"
#include "fedmvc/diagnostics.hpp"
#include "fedmvc/local_solver.hpp"
#include "fedmvc/tucker_solver.hpp"

namespace fedmvc {

enum class RunMode { Dense, Tensorized };

// Gaussian-mechanism parameters. sigma^2 = 2 C^2 ln(1.25/delta) / epsilon^2.
struct PrivacyParams {
  bool enabled = false;
  double epsilon = 1.0;
  double delta = 1e-5;
  double clip_norm = 1.0;
  std::uint64_t noise_seed = 0;

  void validate() const;
};

double gaussian_sigma(const PrivacyParams& privacy);

// One client's shared message for a round. Dense runs fill center_sums and
// cluster_mass; tensorized runs fill the n-scaled decomposition components.
// View weights, objective and sample count are shared in both modes.
struct ClientStatistics {
  std::vector<Eigen::MatrixXd> center_sums;  // per view: c x d_h, mu^m-weighted
  Eigen::VectorXd cluster_mass;              // length c

  DenseTensor core_sum;       // n-scaled core
  Eigen::MatrixXd cluster_sum;
  Eigen::MatrixXd feature_sum;
  Eigen::MatrixXd view_sum;

  Eigen::VectorXd view_weights;
  double objective = 0.0;
  std::size_t sample_count = 0;

  std::size_t payload_elements(RunMode mode) const;
};

ClientStatistics compute_statistics(const LocalModel& model, const MultiViewDataset& data,
                                    double fuzzifier, const PrivacyParams& privacy,
                                    std::mt19937_64& noise_rng);
ClientStatistics compute_statistics(const TensorizedModel& model, const MultiViewDataset& data,
                                    const PrivacyParams& privacy, std::mt19937_64& noise_rng);

// omega_i = exp(-tau J_i) / sum_j exp(-tau J_j), max-subtracted.
Eigen::VectorXd client_weights(const std::vector<double>& losses, double tau);

struct GlobalModel {
  RunMode mode = RunMode::Dense;
  std::vector<Eigen::MatrixXd> centers;  // dense mode: per view c x d_h
  TuckerFactors factors;                 // tensorized mode
  Eigen::VectorXd view_weights;
  Eigen::VectorXd client_weights;
  std::size_t round = 0;
};

// Updates global centers and view weights in place; a cluster whose total
// aggregated mass is zero keeps its previous global center.
void aggregate_dense(const std::vector<ClientStatistics>& stats, const Eigen::VectorXd& omega,
                     GlobalModel& global, Diagnostics* diag = nullptr);

// Aligns each client's factors to the reference via per-mode orthogonal
// Procrustes (core counter-rotated) before the weighted average.
void aggregate_tucker(const std::vector<ClientStatistics>& stats, const Eigen::VectorXd& omega,
                      const TuckerFactors& reference, GlobalModel& global,
                      Diagnostics* diag = nullptr);

// Per-client blend weights, all in [0,1]. Dense runs use `lambda`; tensorized
// runs use the four component-specific values. `rho` blends view weights.
struct PersonalizationState {
  double lambda = 0.5;
  double lambda_core = 0.5;
  double lambda_cluster = 0.5;
  double lambda_feature = 0.5;
  double lambda_view = 0.5;
  double rho = 0.5;

  void validate() const;
};

void personalize(LocalModel& model, const GlobalModel& global, const PersonalizationState& state);
void personalize(TensorizedModel& model, const GlobalModel& global,
                 const PersonalizationState& state);

// One central finite-difference step of the client objective through the
// blend, per personalization component: lambda <- clamp(lambda - beta g, 0, 1).
// `model` must be the pre-blend fit.
void adapt_lambda(const LocalModel& model, const MultiViewDataset& data,
                  const SolverConfig& config, const GlobalModel& global, double adapt_step,
                  double fd_step, PersonalizationState& state);
void adapt_lambda(const TensorizedModel& model, const MultiViewDataset& data,
                  const SolverConfig& config, const GlobalModel& global, double adapt_step,
                  double fd_step, PersonalizationState& state);

struct FederationConfig {
  RunMode mode = RunMode::Dense;
  SolverConfig solver;
  TuckerRanks ranks;
  std::size_t rounds = 20;
  std::size_t local_epochs = 5;
  double temperature = 1.0;
  double center_reg = 0.1;
  double view_reg = 0.1;
  double lambda0 = 0.5;
  double rho0 = 0.5;
  bool adaptive = false;
  double adapt_step = 0.1;
  double fd_step = 1e-4;
  PrivacyParams privacy;
  std::uint64_t seed = 0;
  std::vector<std::size_t> per_client_clusters;  // empty: solver.clusters everywhere

  void validate() const;
};

struct RoundMetrics {
  std::size_t round = 0;
  std::vector<double> client_objectives;  // exact local objectives
  std::vector<double> shared_objectives;  // as shared (noisy under privacy)
  Eigen::VectorXd client_weights;
  double global_objective = 0.0;
  std::vector<std::size_t> payload_elements;
  double blend_contraction_error = 0.0;
  std::vector<std::string> notes;
};

struct FederationResult {
  GlobalModel global;
  std::vector<LocalModel> client_models;            // dense mode
  std::vector<TensorizedModel> tensorized_models;   // tensorized mode
  std::vector<PersonalizationState> personalization;
  std::vector<RoundMetrics> rounds;
  std::vector<std::string> notes;
};

// Algorithm: T synchronous rounds of broadcast -> parallel local fits
// (local_epochs sweeps, warm-started) -> statistics -> softmax weighting ->
// aggregation -> personalized blending -> optional lambda adaptation.
// Any client failure aborts the protocol with a diagnostic note.
FederationResult run_federation(const std::vector<MultiViewDataset>& clients,
                                const FederationConfig& config);

}  // namespace fedmvc
