#include "fedmvc/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace fedmvc {

namespace {

// Dense contingency table over the label values that actually occur.
Eigen::MatrixXd contingency(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
  std::map<int, int> ia, ib;
  for (Eigen::Index i = 0; i < a.size(); ++i) ia.emplace(a(i), 0);
  for (Eigen::Index i = 0; i < b.size(); ++i) ib.emplace(b(i), 0);
  int next = 0;
  for (auto& kv : ia) kv.second = next++;
  next = 0;
  for (auto& kv : ib) kv.second = next++;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ia.size()),
                                                static_cast<Eigen::Index>(ib.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) table(ia[a(i)], ib[b(i)]) += 1.0;
  return table;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

void check_lengths(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
  if (a.size() == 0 || a.size() != b.size())
    throw std::invalid_argument("label vectors must be nonempty and of equal length");
}

}  // namespace

Eigen::VectorXi hard_labels(const Eigen::MatrixXd& memberships) {
  if (memberships.rows() == 0 || memberships.cols() == 0)
    throw std::invalid_argument("hard_labels requires a nonempty membership matrix");
  Eigen::VectorXi labels(memberships.rows());
  for (Eigen::Index i = 0; i < memberships.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < memberships.cols(); ++k)
      if (memberships(i, k) > memberships(i, best)) best = static_cast<int>(k);
    labels(i) = best;
  }
  return labels;
}

double adjusted_rand_index(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
  check_lengths(a, b);
  const Eigen::MatrixXd table = contingency(a, b);
  const double n = static_cast<double>(a.size());

  double sum_cells = 0.0;
  for (Eigen::Index r = 0; r < table.rows(); ++r)
    for (Eigen::Index c = 0; c < table.cols(); ++c) sum_cells += choose2(table(r, c));
  double sum_rows = 0.0;
  for (Eigen::Index r = 0; r < table.rows(); ++r) sum_rows += choose2(table.row(r).sum());
  double sum_cols = 0.0;
  for (Eigen::Index c = 0; c < table.cols(); ++c) sum_cols += choose2(table.col(c).sum());

  const double expected = sum_rows * sum_cols / choose2(n);
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;
  return (sum_cells - expected) / (maximum - expected);
}

double normalized_mutual_info(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
  check_lengths(a, b);
  const Eigen::MatrixXd table = contingency(a, b);
  const double n = static_cast<double>(a.size());

  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const double p = table.row(r).sum() / n;
    if (p > 0.0) ha -= p * std::log(p);
  }
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    const double p = table.col(c).sum() / n;
    if (p > 0.0) hb -= p * std::log(p);
  }
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const double pr = table.row(r).sum() / n;
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      const double pj = table(r, c) / n;
      if (pj > 0.0) mi += pj * std::log(pj / (pr * (table.col(c).sum() / n)));
    }
  }
  if (ha == 0.0 && hb == 0.0) return 1.0;
  const double norm = 0.5 * (ha + hb);
  return norm > 0.0 ? mi / norm : 0.0;
}

ClusteringScores clustering_metrics(const Eigen::VectorXi& predicted,
                                    const Eigen::VectorXi& truth) {
  return {adjusted_rand_index(predicted, truth), normalized_mutual_info(predicted, truth)};
}

}  // namespace fedmvc
