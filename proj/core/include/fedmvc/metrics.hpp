#pragma once

#include <Eigen/Dense>

namespace fedmvc {

/// Row-wise argmax of a membership matrix; ties resolve to the lowest index.
Eigen::VectorXi hard_labels(const Eigen::MatrixXd& memberships);

/// Pair-counting adjusted Rand index. The degenerate zero-denominator case
/// (both partitions trivial) is defined as 1.
double adjusted_rand_index(const Eigen::VectorXi& a, const Eigen::VectorXi& b);

/// Mutual information normalized by the arithmetic mean of the entropies.
/// Two constant labelings define NMI = 1; one constant labeling gives 0.
double normalized_mutual_info(const Eigen::VectorXi& a, const Eigen::VectorXi& b);

struct ClusteringScores {
  double ari = 0.0;
  double nmi = 0.0;
};

ClusteringScores clustering_metrics(const Eigen::VectorXi& predicted,
                                    const Eigen::VectorXi& truth);

}  // namespace fedmvc
