#include "fedmvc/federation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <utility>

#include "fedmvc/tensor.hpp"

namespace fedmvc {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double clip_factor(double norm, double limit) {
  return norm > limit ? limit / norm : 1.0;
}

void add_noise(Eigen::Ref<Eigen::MatrixXd> m, std::normal_distribution<double>& noise,
               std::mt19937_64& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) += noise(rng);
}

Eigen::VectorXd aggregate_view_weights(const std::vector<ClientStatistics>& stats,
                                       const Eigen::VectorXd& omega) {
  Eigen::VectorXd num = Eigen::VectorXd::Zero(stats[0].view_weights.size());
  double den = 0.0;
  for (std::size_t l = 0; l < stats.size(); ++l) {
    const double w = omega(static_cast<Eigen::Index>(l)) *
                     static_cast<double>(stats[l].sample_count);
    num += w * stats[l].view_weights;
    den += w;
  }
  if (den <= 0.0)
    throw std::invalid_argument("aggregate: nonpositive total client weight");
  return num / den;
}

// Orthogonal factor minimizing ||from * R - to||_F.
Eigen::MatrixXd procrustes(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to) {
  if (from.rows() != to.rows() || from.cols() != to.cols())
    throw std::invalid_argument("procrustes: shape mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(from.transpose() * to,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

TuckerFactors statistics_factors(const ClientStatistics& st) {
  const double inv = 1.0 / static_cast<double>(st.sample_count);
  TuckerFactors f;
  f.core = st.core_sum;
  for (double& v : f.core.data()) v *= inv;
  f.cluster = inv * st.cluster_sum;
  f.feature = inv * st.feature_sum;
  f.view = inv * st.view_sum;
  return f;
}

DenseTensor blend_tensor(const DenseTensor& local, const DenseTensor& global, double lambda) {
  if (local.shape() != global.shape())
    throw std::invalid_argument("personalize: core shape mismatch");
  DenseTensor out = local;
  for (std::size_t l = 0; l < out.size(); ++l)
    out.data()[l] = lambda * local.data()[l] + (1.0 - lambda) * global.data()[l];
  return out;
}

double tensor_sq_diff(const DenseTensor& a, const DenseTensor& b) {
  double total = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const double d = a.data()[l] - b.data()[l];
    total += d * d;
  }
  return total;
}

double blended_dense_objective(const MultiViewDataset& data,
                               const HeatKernelCoefficients& coeffs, const SolverConfig& config,
                               const std::vector<Eigen::MatrixXd>& local,
                               const std::vector<Eigen::MatrixXd>& global, double lambda,
                               const Eigen::VectorXd& view_weights) {
  std::vector<Eigen::MatrixXd> centers(local.size());
  for (std::size_t h = 0; h < local.size(); ++h)
    centers[h] = lambda * local[h] + (1.0 - lambda) * global[h];
  const auto dist = pairwise_distances(data.views, centers, coeffs);
  const Eigen::MatrixXd u =
      update_memberships(dist, view_weights, config.fuzzifier, config.view_exponent);
  return local_objective(dist, u, view_weights, config.fuzzifier, config.view_exponent);
}

double blended_tensor_objective(const MultiViewDataset& data,
                                const HeatKernelCoefficients& coeffs,
                                const SolverConfig& config,
                                const std::vector<std::size_t>& view_dims,
                                const TuckerFactors& local, const TuckerFactors& global,
                                double l_core, double l_cluster, double l_feature,
                                double l_view, const Eigen::VectorXd& view_weights) {
  TuckerFactors blend;
  blend.core = blend_tensor(local.core, global.core, l_core);
  blend.cluster = l_cluster * local.cluster + (1.0 - l_cluster) * global.cluster;
  blend.feature = l_feature * local.feature + (1.0 - l_feature) * global.feature;
  blend.view = l_view * local.view + (1.0 - l_view) * global.view;
  const DenseTensor recon = tucker_reconstruct(blend);
  const auto dist = pairwise_distances(data.views, center_view_slices(recon, view_dims), coeffs);
  const Eigen::MatrixXd u =
      update_memberships(dist, view_weights, config.fuzzifier, config.view_exponent);
  return local_objective(dist, u, view_weights, config.fuzzifier, config.view_exponent);
}

void check_factor_shapes(const TuckerFactors& a, const TuckerFactors& b, const char* what) {
  if (a.core.shape() != b.core.shape() || a.cluster.rows() != b.cluster.rows() ||
      a.cluster.cols() != b.cluster.cols() || a.feature.rows() != b.feature.rows() ||
      a.feature.cols() != b.feature.cols() || a.view.rows() != b.view.rows() ||
      a.view.cols() != b.view.cols())
    throw std::invalid_argument(std::string(what) + ": rank mismatch");
}

}  // namespace

void PrivacyParams::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("privacy: epsilon must be positive and finite");
  if (!(delta > 0.0) || delta >= 1.0)
    throw std::invalid_argument("privacy: delta must lie in (0,1)");
  if (!(clip_norm > 0.0))
    throw std::invalid_argument("privacy: clip_norm must be positive");
}

double gaussian_sigma(const PrivacyParams& privacy) {
  privacy.validate();
  return std::sqrt(2.0 * privacy.clip_norm * privacy.clip_norm * std::log(1.25 / privacy.delta)) /
         privacy.epsilon;
}

std::size_t ClientStatistics::payload_elements(RunMode mode) const {
  std::size_t count = static_cast<std::size_t>(view_weights.size()) + 2;
  if (mode == RunMode::Dense) {
    for (const auto& sum : center_sums) count += static_cast<std::size_t>(sum.size());
    count += static_cast<std::size_t>(cluster_mass.size());
  } else {
    count += core_sum.size();
    count += static_cast<std::size_t>(cluster_sum.size() + feature_sum.size() + view_sum.size());
  }
  return count;
}

ClientStatistics compute_statistics(const LocalModel& model, const MultiViewDataset& data,
                                    double fuzzifier, const PrivacyParams& privacy,
                                    std::mt19937_64& noise_rng) {
  data.validate();
  const std::size_t n = data.samples();
  const std::size_t s = data.view_count();
  if (static_cast<std::size_t>(model.memberships.rows()) != n)
    throw std::invalid_argument("compute_statistics: membership rows mismatch");
  if (model.centers.size() != s)
    throw std::invalid_argument("compute_statistics: model view count mismatch");
  if (model.objective_trace.empty())
    throw std::invalid_argument("compute_statistics: model has not been fitted");
  const Eigen::Index c = model.memberships.cols();

  ClientStatistics out;
  const Eigen::MatrixXd um = model.memberships.array().pow(fuzzifier);
  const bool dp = privacy.enabled;
  const double sigma = dp ? gaussian_sigma(privacy) : 0.0;
  std::normal_distribution<double> noise(0.0, dp ? sigma : 1.0);

  out.center_sums.resize(s);
  if (dp) {
    for (std::size_t h = 0; h < s; ++h) {
      const Eigen::MatrixXd& view = data.views[h];
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(c, view.cols());
      for (std::size_t i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < c; ++k) {
          Eigen::RowVectorXd contrib =
              um(static_cast<Eigen::Index>(i), k) * view.row(static_cast<Eigen::Index>(i));
          contrib *= clip_factor(contrib.norm(), privacy.clip_norm);
          sum.row(k) += contrib;
        }
      add_noise(sum, noise, noise_rng);
      out.center_sums[h] = std::move(sum);
    }
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(c);
    for (std::size_t i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < c; ++k)
        mass(k) += std::min(um(static_cast<Eigen::Index>(i), k), privacy.clip_norm);
    add_noise(mass, noise, noise_rng);
    out.cluster_mass = std::move(mass);
  } else {
    for (std::size_t h = 0; h < s; ++h) out.center_sums[h] = um.transpose() * data.views[h];
    out.cluster_mass = um.colwise().sum().transpose();
  }

  out.view_weights = model.view_weights;
  out.objective = model.objective_trace.back() + (dp ? noise(noise_rng) : 0.0);
  out.sample_count = n;
  return out;
}

ClientStatistics compute_statistics(const TensorizedModel& model, const MultiViewDataset& data,
                                    const PrivacyParams& privacy, std::mt19937_64& noise_rng) {
  data.validate();
  if (model.objective_trace.empty())
    throw std::invalid_argument("compute_statistics: model has not been fitted");
  const double n = static_cast<double>(data.samples());
  const bool dp = privacy.enabled;
  const double sigma = dp ? gaussian_sigma(privacy) : 0.0;
  std::normal_distribution<double> noise(0.0, dp ? sigma : 1.0);

  ClientStatistics out;
  const double core_scale =
      n * (dp ? clip_factor(frobenius_norm(model.factors.core), privacy.clip_norm) : 1.0);
  out.core_sum = model.factors.core;
  for (double& v : out.core_sum.data()) v *= core_scale;
  const auto scaled = [&](const Eigen::MatrixXd& m) {
    return Eigen::MatrixXd(n * (dp ? clip_factor(m.norm(), privacy.clip_norm) : 1.0) * m);
  };
  out.cluster_sum = scaled(model.factors.cluster);
  out.feature_sum = scaled(model.factors.feature);
  out.view_sum = scaled(model.factors.view);
  if (dp) {
    for (double& v : out.core_sum.data()) v += noise(noise_rng);
    add_noise(out.cluster_sum, noise, noise_rng);
    add_noise(out.feature_sum, noise, noise_rng);
    add_noise(out.view_sum, noise, noise_rng);
  }

  out.view_weights = model.view_weights;
  out.objective = model.objective_trace.back() + (dp ? noise(noise_rng) : 0.0);
  out.sample_count = data.samples();
  return out;
}

Eigen::VectorXd client_weights(const std::vector<double>& losses, double tau) {
  if (losses.empty()) throw std::invalid_argument("client_weights: no losses");
  if (tau < 0.0) throw std::invalid_argument("client_weights: tau must be nonnegative");
  Eigen::VectorXd scaled(static_cast<Eigen::Index>(losses.size()));
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i]))
      throw std::invalid_argument("client_weights: losses must be finite");
    scaled(static_cast<Eigen::Index>(i)) = -tau * losses[i];
  }
  const Eigen::VectorXd w = (scaled.array() - scaled.maxCoeff()).exp();
  return w / w.sum();
}

void aggregate_dense(const std::vector<ClientStatistics>& stats, const Eigen::VectorXd& omega,
                     GlobalModel& global, Diagnostics* diag) {
  if (stats.empty()) throw std::invalid_argument("aggregate_dense: no statistics");
  if (omega.size() != static_cast<Eigen::Index>(stats.size()))
    throw std::invalid_argument("aggregate_dense: weight count mismatch");
  const std::size_t s = stats[0].center_sums.size();
  const Eigen::Index c = stats[0].cluster_mass.size();
  for (const auto& st : stats) {
    if (st.center_sums.size() != s || st.cluster_mass.size() != c ||
        st.view_weights.size() != static_cast<Eigen::Index>(s))
      throw std::invalid_argument("aggregate_dense: client statistic shapes differ");
    for (std::size_t h = 0; h < s; ++h)
      if (st.center_sums[h].rows() != c || st.center_sums[h].cols() != stats[0].center_sums[h].cols())
        throw std::invalid_argument("aggregate_dense: client statistic shapes differ");
  }

  if (global.centers.size() != s) {
    global.centers.resize(s);
    for (std::size_t h = 0; h < s; ++h)
      global.centers[h] = Eigen::MatrixXd::Zero(c, stats[0].center_sums[h].cols());
  }

  Eigen::VectorXd den = Eigen::VectorXd::Zero(c);
  for (std::size_t l = 0; l < stats.size(); ++l)
    den += omega(static_cast<Eigen::Index>(l)) * stats[l].cluster_mass;
  for (std::size_t h = 0; h < s; ++h) {
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(c, stats[0].center_sums[h].cols());
    for (std::size_t l = 0; l < stats.size(); ++l)
      num += omega(static_cast<Eigen::Index>(l)) * stats[l].center_sums[h];
    for (Eigen::Index k = 0; k < c; ++k)
      if (den(k) > 0.0) global.centers[h].row(k) = num.row(k) / den(k);
  }
  for (Eigen::Index k = 0; k < c; ++k)
    if (!(den(k) > 0.0))
      diag_note(diag, "aggregate_dense: cluster " + std::to_string(k) +
                          " has no aggregated mass; keeping previous global center");

  global.view_weights = aggregate_view_weights(stats, omega);
}

void aggregate_tucker(const std::vector<ClientStatistics>& stats, const Eigen::VectorXd& omega,
                      const TuckerFactors& reference, GlobalModel& global, Diagnostics* diag) {
  (void)diag;
  if (stats.empty()) throw std::invalid_argument("aggregate_tucker: no statistics");
  if (omega.size() != static_cast<Eigen::Index>(stats.size()))
    throw std::invalid_argument("aggregate_tucker: weight count mismatch");
  const TuckerFactors first = statistics_factors(stats[0]);
  check_factor_shapes(first, reference, "aggregate_tucker");

  double den = 0.0;
  DenseTensor core_acc(stats[0].core_sum.shape());
  Eigen::MatrixXd cluster_acc = Eigen::MatrixXd::Zero(first.cluster.rows(), first.cluster.cols());
  Eigen::MatrixXd feature_acc = Eigen::MatrixXd::Zero(first.feature.rows(), first.feature.cols());
  Eigen::MatrixXd view_acc = Eigen::MatrixXd::Zero(first.view.rows(), first.view.cols());

  for (std::size_t l = 0; l < stats.size(); ++l) {
    const ClientStatistics& st = stats[l];
    check_factor_shapes(statistics_factors(st), reference, "aggregate_tucker");
    const Eigen::MatrixXd r1 = procrustes(st.cluster_sum, reference.cluster);
    const Eigen::MatrixXd r2 = procrustes(st.feature_sum, reference.feature);
    const Eigen::MatrixXd r3 = procrustes(st.view_sum, reference.view);
    const DenseTensor aligned_core = mode_n_product(
        mode_n_product(mode_n_product(st.core_sum, r1.transpose(), 0), r2.transpose(), 1),
        r3.transpose(), 2);

    const double w = omega(static_cast<Eigen::Index>(l));
    for (std::size_t i = 0; i < core_acc.size(); ++i)
      core_acc.data()[i] += w * aligned_core.data()[i];
    cluster_acc += w * (st.cluster_sum * r1);
    feature_acc += w * (st.feature_sum * r2);
    view_acc += w * (st.view_sum * r3);
    den += w * static_cast<double>(st.sample_count);
  }
  if (!(den > 0.0)) throw std::invalid_argument("aggregate_tucker: nonpositive total weight");

  for (double& v : core_acc.data()) v /= den;
  global.factors.core = std::move(core_acc);
  global.factors.cluster = cluster_acc / den;
  global.factors.feature = feature_acc / den;
  global.factors.view = view_acc / den;
  global.view_weights = aggregate_view_weights(stats, omega);
}

void PersonalizationState::validate() const {
  for (double p : {lambda, lambda_core, lambda_cluster, lambda_feature, lambda_view, rho})
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("personalization parameters must lie in [0,1]");
}

void personalize(LocalModel& model, const GlobalModel& global,
                 const PersonalizationState& state) {
  state.validate();
  if (global.centers.size() != model.centers.size())
    throw std::invalid_argument("personalize: global/local view counts differ");
  for (std::size_t h = 0; h < model.centers.size(); ++h)
    if (global.centers[h].rows() != model.centers[h].rows() ||
        global.centers[h].cols() != model.centers[h].cols())
      throw std::invalid_argument("personalize: center shape mismatch");
  if (global.view_weights.size() != model.view_weights.size())
    throw std::invalid_argument("personalize: view weight length mismatch");

  for (std::size_t h = 0; h < model.centers.size(); ++h)
    model.centers[h] =
        state.lambda * model.centers[h] + (1.0 - state.lambda) * global.centers[h];
  model.view_weights =
      state.rho * model.view_weights + (1.0 - state.rho) * global.view_weights;
}

void personalize(TensorizedModel& model, const GlobalModel& global,
                 const PersonalizationState& state) {
  state.validate();
  check_factor_shapes(model.factors, global.factors, "personalize");
  if (global.view_weights.size() != model.view_weights.size())
    throw std::invalid_argument("personalize: view weight length mismatch");

  model.factors.core = blend_tensor(model.factors.core, global.factors.core, state.lambda_core);
  model.factors.cluster = state.lambda_cluster * model.factors.cluster +
                          (1.0 - state.lambda_cluster) * global.factors.cluster;
  model.factors.feature = state.lambda_feature * model.factors.feature +
                          (1.0 - state.lambda_feature) * global.factors.feature;
  model.factors.view =
      state.lambda_view * model.factors.view + (1.0 - state.lambda_view) * global.factors.view;
  model.view_weights =
      state.rho * model.view_weights + (1.0 - state.rho) * global.view_weights;
}

void adapt_lambda(const LocalModel& model, const MultiViewDataset& data,
                  const SolverConfig& config, const GlobalModel& global, double adapt_step,
                  double fd_step, PersonalizationState& state) {
  state.validate();
  if (adapt_step <= 0.0 || fd_step <= 0.0)
    throw std::invalid_argument("adapt_lambda: step sizes must be positive");
  if (global.centers.size() != model.centers.size())
    throw std::invalid_argument("adapt_lambda: global/local view counts differ");
  const HeatKernelCoefficients coeffs =
      compute_coefficients(data.views, config.estimator, config.hkc_epsilon);
  const Eigen::VectorXd vw =
      state.rho * model.view_weights + (1.0 - state.rho) * global.view_weights;
  const double up = blended_dense_objective(data, coeffs, config, model.centers, global.centers,
                                            state.lambda + fd_step, vw);
  const double down = blended_dense_objective(data, coeffs, config, model.centers,
                                              global.centers, state.lambda - fd_step, vw);
  const double gradient = (up - down) / (2.0 * fd_step);
  state.lambda = clamp01(state.lambda - adapt_step * gradient);
}

void adapt_lambda(const TensorizedModel& model, const MultiViewDataset& data,
                  const SolverConfig& config, const GlobalModel& global, double adapt_step,
                  double fd_step, PersonalizationState& state) {
  state.validate();
  if (adapt_step <= 0.0 || fd_step <= 0.0)
    throw std::invalid_argument("adapt_lambda: step sizes must be positive");
  check_factor_shapes(model.factors, global.factors, "adapt_lambda");
  const HeatKernelCoefficients coeffs =
      compute_coefficients(data.views, config.estimator, config.hkc_epsilon);
  std::vector<std::size_t> view_dims(data.view_count());
  for (std::size_t h = 0; h < view_dims.size(); ++h)
    view_dims[h] = static_cast<std::size_t>(data.views[h].cols());
  const Eigen::VectorXd vw =
      state.rho * model.view_weights + (1.0 - state.rho) * global.view_weights;

  double lambdas[4] = {state.lambda_core, state.lambda_cluster, state.lambda_feature,
                       state.lambda_view};
  const auto eval = [&](const double l[4]) {
    return blended_tensor_objective(data, coeffs, config, view_dims, model.factors,
                                    global.factors, l[0], l[1], l[2], l[3], vw);
  };
  double updated[4];
  for (int comp = 0; comp < 4; ++comp) {
    double probe[4] = {lambdas[0], lambdas[1], lambdas[2], lambdas[3]};
    probe[comp] = lambdas[comp] + fd_step;
    const double up = eval(probe);
    probe[comp] = lambdas[comp] - fd_step;
    const double down = eval(probe);
    const double gradient = (up - down) / (2.0 * fd_step);
    updated[comp] = clamp01(lambdas[comp] - adapt_step * gradient);
  }
  state.lambda_core = updated[0];
  state.lambda_cluster = updated[1];
  state.lambda_feature = updated[2];
  state.lambda_view = updated[3];
}

void FederationConfig::validate() const {
  solver.validate();
  if (rounds == 0) throw std::invalid_argument("federation: rounds must be positive");
  if (local_epochs == 0) throw std::invalid_argument("federation: local_epochs must be positive");
  if (temperature < 0.0)
    throw std::invalid_argument("federation: temperature must be nonnegative");
  if (center_reg < 0.0 || view_reg < 0.0)
    throw std::invalid_argument("federation: regularization weights must be nonnegative");
  if (!(lambda0 >= 0.0 && lambda0 <= 1.0) || !(rho0 >= 0.0 && rho0 <= 1.0))
    throw std::invalid_argument("federation: lambda0 and rho0 must lie in [0,1]");
  if (adapt_step <= 0.0) throw std::invalid_argument("federation: adapt_step must be positive");
  if (fd_step <= 0.0) throw std::invalid_argument("federation: fd_step must be positive");
  if (privacy.enabled) privacy.validate();
  for (std::size_t c : per_client_clusters)
    if (c == 0)
      throw std::invalid_argument("federation: per_client_clusters entries must be positive");
}

FederationResult run_federation(const std::vector<MultiViewDataset>& clients,
                                const FederationConfig& config) {
  config.validate();
  const std::size_t client_count = clients.size();
  if (client_count == 0)
    throw std::invalid_argument("run_federation: at least one client required");
  for (const auto& data : clients) data.validate();

  const std::size_t s = clients[0].view_count();
  std::vector<std::size_t> view_dims(s);
  for (std::size_t h = 0; h < s; ++h)
    view_dims[h] = static_cast<std::size_t>(clients[0].views[h].cols());
  for (const auto& data : clients) {
    if (data.view_count() != s)
      throw std::invalid_argument("run_federation: clients must share the view count");
    for (std::size_t h = 0; h < s; ++h)
      if (static_cast<std::size_t>(data.views[h].cols()) != view_dims[h])
        throw std::invalid_argument("run_federation: clients must share view dimensions");
  }

  std::vector<std::size_t> clusters(client_count, config.solver.clusters);
  if (!config.per_client_clusters.empty()) {
    if (config.per_client_clusters.size() != client_count)
      throw std::invalid_argument("run_federation: per_client_clusters size mismatch");
    clusters = config.per_client_clusters;
  }
  const bool homogeneous =
      std::all_of(clusters.begin(), clusters.end(), [&](std::size_t c) { return c == clusters[0]; });
  const std::size_t c0 = clusters[0];
  const bool dense = config.mode == RunMode::Dense;

  FederationResult result;
  PersonalizationState initial_state;
  initial_state.lambda = config.lambda0;
  initial_state.lambda_core = config.lambda0;
  initial_state.lambda_cluster = config.lambda0;
  initial_state.lambda_feature = config.lambda0;
  initial_state.lambda_view = config.lambda0;
  initial_state.rho = config.rho0;
  result.personalization.assign(client_count, initial_state);

  GlobalModel& global = result.global;
  global.mode = config.mode;
  global.view_weights =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s), 1.0 / static_cast<double>(s));
  if (dense)
    result.client_models.resize(client_count);
  else
    result.tensorized_models.resize(client_count);

  std::vector<Eigen::MatrixXd> init_centers;
  TuckerFactors init_factors;
  if (homogeneous) {
    std::mt19937_64 rng(config.seed);
    init_centers = seed_centers(clients[0].views, c0, rng);
    if (dense) {
      global.centers = init_centers;
    } else {
      const std::size_t padded = *std::max_element(view_dims.begin(), view_dims.end());
      if (config.ranks.feature == 0 || config.ranks.feature > padded ||
          config.ranks.view == 0 || config.ranks.view > s)
        throw std::invalid_argument("run_federation: tucker ranks out of range");
      DenseTensor seed_tensor({c0, padded, s});
      for (std::size_t h = 0; h < s; ++h)
        for (std::size_t k = 0; k < c0; ++k)
          for (std::size_t j = 0; j < view_dims[h]; ++j)
            seed_tensor(k, j, h) = init_centers[h](static_cast<Eigen::Index>(k),
                                                   static_cast<Eigen::Index>(j));
      init_factors = hosvd_init(seed_tensor, {c0, config.ranks.feature, config.ranks.view});
      init_factors.core = mode_n_product(init_factors.core, init_factors.cluster, 0);
      init_factors.cluster = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(c0),
                                                       static_cast<Eigen::Index>(c0));
      global.factors = init_factors;
    }
  } else {
    result.notes.push_back(
        "heterogeneous cluster counts: aggregating and personalizing view weights only");
  }

  for (std::size_t round = 1; round <= config.rounds; ++round) {
    Diagnostics round_diag;

    std::vector<std::future<LocalModel>> dense_futures;
    std::vector<std::future<TensorizedModel>> tensor_futures;
    for (std::size_t l = 0; l < client_count; ++l) {
      SolverConfig solver = config.solver;
      solver.clusters = clusters[l];
      solver.max_iters = config.local_epochs;
      solver.seed = config.seed + l;
      const MultiViewDataset* data = &clients[l];
      const bool warm = round > 1;
      if (dense) {
        const std::vector<Eigen::MatrixXd>* centers0 =
            warm ? &result.client_models[l].centers
                 : (homogeneous ? &init_centers : nullptr);
        const Eigen::VectorXd* weights0 = warm ? &result.client_models[l].view_weights : nullptr;
        dense_futures.push_back(std::async(std::launch::async, [=] {
          return fit_local(*data, solver, centers0, weights0);
        }));
      } else {
        const TuckerFactors* factors0 =
            warm ? &result.tensorized_models[l].factors
                 : (homogeneous ? &init_factors : nullptr);
        const Eigen::VectorXd* weights0 =
            warm ? &result.tensorized_models[l].view_weights : nullptr;
        const TuckerRanks ranks = config.ranks;
        tensor_futures.push_back(std::async(std::launch::async, [=] {
          return fit_tensorized(*data, solver, ranks, factors0, weights0);
        }));
      }
    }

    std::vector<LocalModel> dense_fits(dense ? client_count : 0);
    std::vector<TensorizedModel> tensor_fits(dense ? 0 : client_count);
    std::string failure;
    for (std::size_t l = 0; l < client_count; ++l) {
      try {
        if (dense)
          dense_fits[l] = dense_futures[l].get();
        else
          tensor_fits[l] = tensor_futures[l].get();
      } catch (const std::exception& e) {
        if (failure.empty())
          failure = "round " + std::to_string(round) + " aborted: client " +
                    std::to_string(l) + ": " + e.what();
      }
    }
    if (!failure.empty()) {
      result.notes.push_back(failure);
      break;
    }

    RoundMetrics metrics;
    metrics.round = round;
    metrics.client_objectives.resize(client_count);
    metrics.shared_objectives.resize(client_count);
    metrics.payload_elements.resize(client_count);

    std::vector<ClientStatistics> stats(client_count);
    for (std::size_t l = 0; l < client_count; ++l) {
      std::mt19937_64 noise_rng(config.privacy.noise_seed + round * client_count + l);
      if (dense) {
        stats[l] = compute_statistics(dense_fits[l], clients[l], config.solver.fuzzifier,
                                      config.privacy, noise_rng);
        metrics.client_objectives[l] = dense_fits[l].objective_trace.back();
        for (const auto& note : dense_fits[l].diagnostics)
          metrics.notes.push_back("client " + std::to_string(l) + ": " + note);
      } else {
        stats[l] = compute_statistics(tensor_fits[l], clients[l], config.privacy, noise_rng);
        metrics.client_objectives[l] = tensor_fits[l].objective_trace.back();
        for (const auto& note : tensor_fits[l].diagnostics)
          metrics.notes.push_back("client " + std::to_string(l) + ": " + note);
      }
      metrics.shared_objectives[l] = stats[l].objective;
      metrics.payload_elements[l] = stats[l].payload_elements(config.mode);
    }

    const Eigen::VectorXd omega = client_weights(metrics.shared_objectives, config.temperature);
    global.client_weights = omega;
    metrics.client_weights = omega;

    if (!homogeneous) {
      global.view_weights = aggregate_view_weights(stats, omega);
    } else if (dense) {
      aggregate_dense(stats, omega, global, &round_diag);
    } else {
      const TuckerFactors reference =
          round == 1 ? statistics_factors(stats[0]) : global.factors;
      aggregate_tucker(stats, omega, reference, global, &round_diag);
    }
    global.round = round;

    std::vector<PersonalizationState> next_states = result.personalization;
    if (config.adaptive && homogeneous) {
      for (std::size_t l = 0; l < client_count; ++l) {
        SolverConfig solver = config.solver;
        solver.clusters = clusters[l];
        if (dense)
          adapt_lambda(dense_fits[l], clients[l], solver, global, config.adapt_step,
                       config.fd_step, next_states[l]);
        else
          adapt_lambda(tensor_fits[l], clients[l], solver, global, config.adapt_step,
                       config.fd_step, next_states[l]);
      }
    }

    double contraction = 0.0;
    const auto track = [&](const Eigen::MatrixXd& post, const Eigen::MatrixXd& pre,
                           const Eigen::MatrixXd& ref, double lambda) {
      const Eigen::MatrixXd dev = (post - ref) - lambda * (pre - ref);
      contraction = std::max(contraction, dev.cwiseAbs().maxCoeff());
    };
    for (std::size_t l = 0; l < client_count; ++l) {
      const PersonalizationState& state = result.personalization[l];
      if (!homogeneous) {
        const Eigen::VectorXd pre =
            dense ? dense_fits[l].view_weights : tensor_fits[l].view_weights;
        const Eigen::VectorXd post =
            state.rho * pre + (1.0 - state.rho) * global.view_weights;
        track(post, pre, global.view_weights, state.rho);
        if (dense)
          dense_fits[l].view_weights = post;
        else
          tensor_fits[l].view_weights = post;
      } else if (dense) {
        const std::vector<Eigen::MatrixXd> pre = dense_fits[l].centers;
        const Eigen::VectorXd pre_vw = dense_fits[l].view_weights;
        personalize(dense_fits[l], global, state);
        for (std::size_t h = 0; h < s; ++h)
          track(dense_fits[l].centers[h], pre[h], global.centers[h], state.lambda);
        track(dense_fits[l].view_weights, pre_vw, global.view_weights, state.rho);
      } else {
        const TuckerFactors pre = tensor_fits[l].factors;
        const Eigen::VectorXd pre_vw = tensor_fits[l].view_weights;
        personalize(tensor_fits[l], global, state);
        const TuckerFactors& post = tensor_fits[l].factors;
        track(Eigen::Map<const Eigen::MatrixXd>(post.core.data().data(),
                                                static_cast<Eigen::Index>(post.core.size()), 1),
              Eigen::Map<const Eigen::MatrixXd>(pre.core.data().data(),
                                                static_cast<Eigen::Index>(pre.core.size()), 1),
              Eigen::Map<const Eigen::MatrixXd>(global.factors.core.data().data(),
                                                static_cast<Eigen::Index>(global.factors.core.size()),
                                                1),
              state.lambda_core);
        track(post.cluster, pre.cluster, global.factors.cluster, state.lambda_cluster);
        track(post.feature, pre.feature, global.factors.feature, state.lambda_feature);
        track(post.view, pre.view, global.factors.view, state.lambda_view);
        track(tensor_fits[l].view_weights, pre_vw, global.view_weights, state.rho);
      }
    }
    metrics.blend_contraction_error = contraction;
    result.personalization = std::move(next_states);

    double global_objective = 0.0;
    for (std::size_t l = 0; l < client_count; ++l) {
      global_objective +=
          omega(static_cast<Eigen::Index>(l)) * metrics.client_objectives[l];
      const Eigen::VectorXd& vw =
          dense ? dense_fits[l].view_weights : tensor_fits[l].view_weights;
      global_objective += config.view_reg * (vw - global.view_weights).squaredNorm();
      if (!homogeneous) continue;
      if (dense) {
        for (std::size_t h = 0; h < s; ++h)
          global_objective +=
              config.center_reg *
              (dense_fits[l].centers[h] - global.centers[h]).squaredNorm();
      } else {
        const TuckerFactors& f = tensor_fits[l].factors;
        global_objective +=
            config.center_reg *
            (tensor_sq_diff(f.core, global.factors.core) +
             (f.cluster - global.factors.cluster).squaredNorm() +
             (f.feature - global.factors.feature).squaredNorm() +
             (f.view - global.factors.view).squaredNorm());
      }
    }
    metrics.global_objective = global_objective;

    for (std::size_t l = 0; l < client_count; ++l) {
      if (dense)
        result.client_models[l] = std::move(dense_fits[l]);
      else
        result.tensorized_models[l] = std::move(tensor_fits[l]);
    }
    for (const auto& note : round_diag.notes()) metrics.notes.push_back(note);
    result.rounds.push_back(std::move(metrics));
  }

  return result;
}

}  // namespace fedmvc
