#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedmvc {

/// Aligned multi-view data: every view holds the same samples in the same
/// row order. Labels are optional (size 0 when absent).
struct MultiViewDataset {
  std::string name;
  std::vector<Eigen::MatrixXd> views;
  Eigen::VectorXi labels;

  std::size_t samples() const { return views.empty() ? 0 : static_cast<std::size_t>(views[0].rows()); }
  std::size_t view_count() const { return views.size(); }
  bool has_labels() const { return labels.size() > 0; }

  /// Throws invalid_argument on ragged rows, empty views, NaN entries or a
  /// label vector of the wrong length.
  void validate() const;
};

struct SyntheticSpec {
  std::size_t samples = 100;
  std::size_t clusters = 3;
  std::vector<std::size_t> view_dims;
  double separation = 4.0;  // minimum pairwise mean distance, in units of the component sigma
  std::uint64_t seed = 0;
};

/// Gaussian blobs sharing one cluster assignment across all views. Per view
/// the cluster means are rescaled so their minimum pairwise distance equals
/// separation times the unit component scale.
MultiViewDataset generate_synthetic(const SyntheticSpec& spec);

enum class PartitionStrategy { Iid, Dirichlet };

struct PartitionPlan {
  PartitionStrategy strategy = PartitionStrategy::Iid;
  std::size_t clients = 1;
  double concentration = 0.5;  // Dirichlet kappa
  std::uint64_t seed = 0;
};

/// Splits a dataset by samples. Iid shuffles and splits as evenly as
/// possible; Dirichlet draws client proportions from Dir(kappa) (per label
/// class when labels exist) and resamples, up to a bounded number of
/// retries, until every client is nonempty.
std::vector<MultiViewDataset> partition_clients(const MultiViewDataset& data,
                                                const PartitionPlan& plan);

/// Reads a JSON manifest naming per-view CSV files (headerless, '.' decimal
/// separator) and an optional labels file.
MultiViewDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes view<i>.csv (+ labels.csv when present) and manifest.json into dir.
void save_dataset(const MultiViewDataset& data, const std::filesystem::path& dir);

}  // namespace fedmvc
