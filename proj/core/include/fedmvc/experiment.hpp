#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedmvc/dataset.hpp"
#include "fedmvc/federation.hpp"

namespace fedmvc {

/// Schema or constraint violation in an experiment config; messages carry the
/// offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string name = "experiment";
  RunMode mode = RunMode::Dense;
  std::uint64_t seed = 0;
  std::string output_dir = ".";

  bool use_synthetic = true;
  SyntheticSpec synthetic;
  std::string manifest;

  std::size_t clients = 1;
  PartitionPlan partition;

  SolverConfig solver;
  TuckerRanks ranks;

  bool federated = false;
  FederationConfig federation;  // mode/solver/ranks/seed are filled in at run
};

/// Parses the JSON document; unknown keys and type mismatches throw
/// ConfigError with the field path. Value constraints are not checked here.
ExperimentConfig parse_experiment_config(const std::string& text);

/// Full constraint report without running; empty means valid.
std::vector<std::string> check_experiment_config(const ExperimentConfig& config);

/// Reads, parses and checks; any violation throws ConfigError.
ExperimentConfig load_experiment_config(const std::string& path);

struct ExperimentResult {
  std::size_t rounds_completed = 0;
  std::vector<double> client_objectives;
  std::vector<double> client_ari;  // empty when the data carries no labels
  std::vector<double> client_nmi;
  double mean_ari = 0.0;
  bool has_labels = false;
  std::size_t payload_total_elements = 0;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::vector<std::string> written;  // output file paths
};

/// Runs the configured experiment and writes rounds.jsonl, per-client
/// objective traces, model files and summary.json into output_dir. A single
/// non-federated fit runs when clients == 1 and no federation section was
/// given. An aborted federation still writes its outputs, then throws
/// runtime_error.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace fedmvc
