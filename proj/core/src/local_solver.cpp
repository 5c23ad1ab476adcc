#include "fedmvc/local_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedmvc {

namespace {

// Stable power-trick normalization for mu_ik ~ C_ik^(-1/(m-1)): divide by the
// row minimum before exponentiating so ratios stay in (0, 1].
void simplex_from_costs(const Eigen::VectorXd& costs, double exponent, Eigen::VectorXd& out) {
  const Eigen::Index k = costs.size();
  const double lo = costs.minCoeff();
  if (lo <= 0.0) {
    const double zeros = static_cast<double>((costs.array() <= 0.0).count());
    for (Eigen::Index j = 0; j < k; ++j) out(j) = costs(j) <= 0.0 ? 1.0 / zeros : 0.0;
    return;
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    out(j) = std::pow(lo / costs(j), exponent);
    total += out(j);
  }
  out /= total;
}

}  // namespace

void SolverConfig::validate() const {
  if (clusters == 0) throw std::invalid_argument("solver: clusters must be >= 1");
  if (!(fuzzifier > 1.0)) throw std::invalid_argument("solver: fuzzifier must be > 1");
  if (!(view_exponent > 1.0)) throw std::invalid_argument("solver: view_exponent must be > 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("solver: tolerance must be > 0");
  if (max_iters == 0) throw std::invalid_argument("solver: max_iters must be >= 1");
  if (!(hkc_epsilon > 0.0)) throw std::invalid_argument("solver: hkc_epsilon must be > 0");
}

std::vector<Eigen::MatrixXd> pairwise_distances(const std::vector<Eigen::MatrixXd>& views,
                                                const std::vector<Eigen::MatrixXd>& centers,
                                                const HeatKernelCoefficients& coeffs) {
  if (views.size() != centers.size() || views.size() != coeffs.view_delta.size())
    throw std::invalid_argument("pairwise_distances: views, centers and coefficients disagree");
  std::vector<Eigen::MatrixXd> dist(views.size());
  for (std::size_t h = 0; h < views.size(); ++h) {
    const Eigen::MatrixXd& x = views[h];
    const Eigen::MatrixXd& a = centers[h];
    const Eigen::MatrixXd& delta = coeffs.view_delta[h];
    if (a.cols() != x.cols())
      throw std::invalid_argument("pairwise_distances: center dimension mismatch in view " +
                                  std::to_string(h));
    dist[h].resize(x.rows(), a.rows());
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
      const auto resid = x.rowwise() - a.row(k);
      dist[h].col(k) =
          1.0 - (-(delta.array() * resid.array().square()).rowwise().sum()).exp();
    }
  }
  return dist;
}

double local_objective(const std::vector<Eigen::MatrixXd>& distances,
                       const Eigen::MatrixXd& memberships, const Eigen::VectorXd& view_weights,
                       double fuzzifier, double view_exponent) {
  const Eigen::MatrixXd um = memberships.array().pow(fuzzifier);
  double total = 0.0;
  for (std::size_t h = 0; h < distances.size(); ++h)
    total += std::pow(view_weights(static_cast<Eigen::Index>(h)), view_exponent) *
             (um.array() * distances[h].array()).sum();
  return total;
}

Eigen::MatrixXd update_memberships(const std::vector<Eigen::MatrixXd>& distances,
                                   const Eigen::VectorXd& view_weights, double fuzzifier,
                                   double view_exponent) {
  const Eigen::Index n = distances.at(0).rows();
  const Eigen::Index c = distances.at(0).cols();
  Eigen::MatrixXd costs = Eigen::MatrixXd::Zero(n, c);
  for (std::size_t h = 0; h < distances.size(); ++h)
    costs += std::pow(view_weights(static_cast<Eigen::Index>(h)), view_exponent) * distances[h];

  Eigen::MatrixXd memberships(n, c);
  Eigen::VectorXd row(c);
  const double exponent = 1.0 / (fuzzifier - 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    simplex_from_costs(costs.row(i).transpose(), exponent, row);
    memberships.row(i) = row.transpose();
  }
  return memberships;
}

std::vector<Eigen::MatrixXd> update_centers(const std::vector<Eigen::MatrixXd>& views,
                                            const std::vector<Eigen::MatrixXd>& centers,
                                            const Eigen::MatrixXd& memberships,
                                            const Eigen::VectorXd& view_weights,
                                            const HeatKernelCoefficients& coeffs,
                                            double fuzzifier, double view_exponent,
                                            Diagnostics* diag) {
  std::vector<Eigen::MatrixXd> next = centers;
  const Eigen::MatrixXd um = memberships.array().pow(fuzzifier);
  for (std::size_t h = 0; h < views.size(); ++h) {
    const double vw = std::pow(view_weights(static_cast<Eigen::Index>(h)), view_exponent);
    if (vw <= 0.0) {
      diag_note(diag, "update_centers: view " + std::to_string(h) +
                          " has zero weight; centers kept");
      continue;
    }
    const Eigen::MatrixXd& x = views[h];
    const Eigen::MatrixXd& delta = coeffs.view_delta[h];
    for (Eigen::Index k = 0; k < centers[h].rows(); ++k) {
      const auto resid = x.rowwise() - centers[h].row(k);
      const Eigen::ArrayXd phi = (delta.array() * resid.array().square()).rowwise().sum();
      const Eigen::VectorXd w = (um.col(k).array() * vw * (-phi).exp()).matrix();
      const double mass = w.sum();
      if (mass <= 0.0) {
        diag_note(diag, "update_centers: cluster " + std::to_string(k) + " in view " +
                            std::to_string(h) + " has zero mass; center kept");
        continue;
      }
      const Eigen::RowVectorXd den = w.transpose() * delta;
      const Eigen::RowVectorXd num =
          w.transpose() * (delta.array() * x.array()).matrix();
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (den(j) > 0.0) {
          next[h](k, j) = num(j) / den(j);
        } else {
          // Coefficients vanish on this coordinate wherever mass lives, so
          // the objective is flat in it; use the plain weighted mean.
          next[h](k, j) = w.dot(x.col(j)) / mass;
        }
      }
    }
  }
  return next;
}

Eigen::VectorXd update_view_weights(const std::vector<Eigen::MatrixXd>& distances,
                                    const Eigen::MatrixXd& memberships, double fuzzifier,
                                    double view_exponent) {
  const Eigen::MatrixXd um = memberships.array().pow(fuzzifier);
  Eigen::VectorXd costs(static_cast<Eigen::Index>(distances.size()));
  for (std::size_t h = 0; h < distances.size(); ++h)
    costs(static_cast<Eigen::Index>(h)) = (um.array() * distances[h].array()).sum();
  Eigen::VectorXd weights(costs.size());
  simplex_from_costs(costs, 1.0 / (view_exponent - 1.0), weights);
  return weights;
}

std::vector<Eigen::MatrixXd> seed_centers(const std::vector<Eigen::MatrixXd>& views,
                                          std::size_t clusters, std::mt19937_64& rng) {
  if (views.empty()) throw std::invalid_argument("seed_centers: no views");
  const Eigen::Index n = views[0].rows();
  if (static_cast<Eigen::Index>(clusters) > n)
    throw std::invalid_argument("seed_centers: more clusters than samples");

  Eigen::Index cols = 0;
  for (const auto& v : views) cols += v.cols();
  Eigen::MatrixXd cat(n, cols);
  Eigen::Index at = 0;
  for (const auto& v : views) {
    cat.middleCols(at, v.cols()) = v;
    at += v.cols();
  }

  std::uniform_int_distribution<Eigen::Index> uniform_row(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int trials = 2 + static_cast<int>(std::ceil(
                             std::log2(static_cast<double>(std::max<std::size_t>(clusters, 2)))));

  std::vector<Eigen::Index> chosen;
  chosen.push_back(uniform_row(rng));
  Eigen::VectorXd d2 =
      (cat.rowwise() - cat.row(chosen[0])).rowwise().squaredNorm();
  while (chosen.size() < clusters) {
    const double total = d2.sum();
    Eigen::Index best = -1;
    double best_potential = 0.0;
    for (int t = 0; t < trials; ++t) {
      Eigen::Index cand;
      if (total <= 0.0) {
        cand = uniform_row(rng);
      } else {
        const double u = unit(rng) * total;
        double acc = 0.0;
        cand = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += d2(i);
          if (u < acc) {
            cand = i;
            break;
          }
        }
      }
      const double potential =
          d2.cwiseMin((cat.rowwise() - cat.row(cand)).rowwise().squaredNorm()).sum();
      if (best < 0 || potential < best_potential) {
        best = cand;
        best_potential = potential;
      }
    }
    chosen.push_back(best);
    d2 = d2.cwiseMin((cat.rowwise() - cat.row(best)).rowwise().squaredNorm());
  }

  std::vector<Eigen::MatrixXd> centers(views.size());
  for (std::size_t h = 0; h < views.size(); ++h) {
    centers[h].resize(static_cast<Eigen::Index>(clusters), views[h].cols());
    for (std::size_t k = 0; k < clusters; ++k)
      centers[h].row(static_cast<Eigen::Index>(k)) = views[h].row(chosen[k]);
  }
  return centers;
}

LocalModel fit_local(const MultiViewDataset& data, const SolverConfig& config,
                     const std::vector<Eigen::MatrixXd>* initial_centers,
                     const Eigen::VectorXd* initial_view_weights) {
  data.validate();
  config.validate();
  const std::size_t n = data.samples();
  const std::size_t s = data.view_count();
  if (config.clusters > n)
    throw std::invalid_argument("fit_local: clusters must not exceed samples");

  const HeatKernelCoefficients coeffs =
      compute_coefficients(data.views, config.estimator, config.hkc_epsilon);

  LocalModel model;
  if (initial_centers != nullptr) {
    if (initial_centers->size() != s)
      throw std::invalid_argument("fit_local: initial centers view count mismatch");
    for (std::size_t h = 0; h < s; ++h)
      if ((*initial_centers)[h].rows() != static_cast<Eigen::Index>(config.clusters) ||
          (*initial_centers)[h].cols() != data.views[h].cols())
        throw std::invalid_argument("fit_local: initial centers shape mismatch in view " +
                                    std::to_string(h));
    model.centers = *initial_centers;
  } else {
    std::mt19937_64 rng(config.seed);
    model.centers = seed_centers(data.views, config.clusters, rng);
  }
  if (initial_view_weights != nullptr) {
    if (initial_view_weights->size() != static_cast<Eigen::Index>(s))
      throw std::invalid_argument("fit_local: initial view weight length mismatch");
    model.view_weights = *initial_view_weights;
  } else {
    model.view_weights =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s), 1.0 / static_cast<double>(s));
  }

  Diagnostics diag;
  double previous = 0.0;
  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    auto dist = pairwise_distances(data.views, model.centers, coeffs);
    model.memberships =
        update_memberships(dist, model.view_weights, config.fuzzifier, config.view_exponent);
    model.centers = update_centers(data.views, model.centers, model.memberships,
                                   model.view_weights, coeffs, config.fuzzifier,
                                   config.view_exponent, &diag);
    dist = pairwise_distances(data.views, model.centers, coeffs);
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
