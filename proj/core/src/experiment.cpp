#include "fedmvc/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "fedmvc/metrics.hpp"
#include "fedmvc/serialize.hpp"

namespace fedmvc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

std::string field(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* key) { return it.key() == key; });
    if (!known) fail(field(path, it.key().c_str()), "unknown key");
  }
}

const json* opt(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
  const json* node = opt(obj, key);
  if (node == nullptr) return fallback;
  if (!node->is_number()) fail(field(path, key), "expected a number");
  return node->get<double>();
}

std::uint64_t get_uint(const json& obj, const std::string& path, const char* key,
                       std::uint64_t fallback) {
  const json* node = opt(obj, key);
  if (node == nullptr) return fallback;
  if (node->is_number_unsigned()) return node->get<std::uint64_t>();
  if (node->is_number_integer() && node->get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(node->get<std::int64_t>());
  fail(field(path, key), "expected a nonnegative integer");
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  const json* node = opt(obj, key);
  if (node == nullptr) return fallback;
  if (!node->is_boolean()) fail(field(path, key), "expected a boolean");
  return node->get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
  const json* node = opt(obj, key);
  if (node == nullptr) return fallback;
  if (!node->is_string()) fail(field(path, key), "expected a string");
  return node->get<std::string>();
}

std::vector<std::size_t> get_size_array(const json& node, const std::string& path) {
  if (!node.is_array() || node.empty())
    fail(path, "expected a nonempty array of positive integers");
  std::vector<std::size_t> values;
  for (const auto& item : node) {
    if (!item.is_number_integer() || item.get<std::int64_t>() <= 0)
      fail(path, "expected a nonempty array of positive integers");
    values.push_back(item.get<std::size_t>());
  }
  return values;
}

void parse_data(const json& root, ExperimentConfig& cfg) {
  const json* data = opt(root, "data");
  if (data == nullptr) fail("data", "required");
  if (!data->is_object()) fail("data", "expected an object");
  reject_unknown(*data, "data", {"synthetic", "manifest"});
  const json* synthetic = opt(*data, "synthetic");
  const json* manifest = opt(*data, "manifest");
  if ((synthetic != nullptr) == (manifest != nullptr))
    fail("data", "exactly one of synthetic or manifest required");

  if (synthetic != nullptr) {
    cfg.use_synthetic = true;
    if (!synthetic->is_object()) fail("data.synthetic", "expected an object");
    reject_unknown(*synthetic, "data.synthetic",
                   {"samples", "clusters", "view_dims", "separation", "seed"});
    cfg.synthetic.samples = get_uint(*synthetic, "data.synthetic", "samples", 100);
    cfg.synthetic.clusters = get_uint(*synthetic, "data.synthetic", "clusters", 3);
    const json* dims = opt(*synthetic, "view_dims");
    if (dims == nullptr) fail("data.synthetic.view_dims", "required");
    cfg.synthetic.view_dims = get_size_array(*dims, "data.synthetic.view_dims");
    cfg.synthetic.separation = get_number(*synthetic, "data.synthetic", "separation", 4.0);
    cfg.synthetic.seed = get_uint(*synthetic, "data.synthetic", "seed", cfg.seed);
  } else {
    cfg.use_synthetic = false;
    if (!manifest->is_string()) fail("data.manifest", "expected a path string");
    cfg.manifest = manifest->get<std::string>();
  }
}

void parse_partition(const json& root, ExperimentConfig& cfg) {
  cfg.partition.seed = cfg.seed;
  const json* part = opt(root, "partition");
  if (part == nullptr) return;
  if (!part->is_object()) fail("partition", "expected an object");
  reject_unknown(*part, "partition", {"strategy", "concentration", "seed"});
  const std::string strategy = get_string(*part, "partition", "strategy", "iid");
  if (strategy == "iid")
    cfg.partition.strategy = PartitionStrategy::Iid;
  else if (strategy == "dirichlet")
    cfg.partition.strategy = PartitionStrategy::Dirichlet;
  else
    fail("partition.strategy", "expected \"iid\" or \"dirichlet\"");
  cfg.partition.concentration =
      get_number(*part, "partition", "concentration", cfg.partition.concentration);
  cfg.partition.seed = get_uint(*part, "partition", "seed", cfg.seed);
}

void parse_solver(const json& root, ExperimentConfig& cfg) {
  const json* solver = opt(root, "solver");
  if (solver == nullptr) return;
  if (!solver->is_object()) fail("solver", "expected an object");
  reject_unknown(*solver, "solver",
                 {"clusters", "fuzzifier", "view_exponent", "tolerance", "max_iters",
                  "estimator", "hkc_epsilon"});
  cfg.solver.clusters = get_uint(*solver, "solver", "clusters", cfg.solver.clusters);
  cfg.solver.fuzzifier = get_number(*solver, "solver", "fuzzifier", cfg.solver.fuzzifier);
  cfg.solver.view_exponent =
      get_number(*solver, "solver", "view_exponent", cfg.solver.view_exponent);
  cfg.solver.tolerance = get_number(*solver, "solver", "tolerance", cfg.solver.tolerance);
  cfg.solver.max_iters = get_uint(*solver, "solver", "max_iters", cfg.solver.max_iters);
  const std::string estimator = get_string(*solver, "solver", "estimator", "minmax");
  if (estimator == "minmax")
    cfg.solver.estimator = HkcEstimator::MinMax;
  else if (estimator == "meandev")
    cfg.solver.estimator = HkcEstimator::MeanDev;
  else
    fail("solver.estimator", "expected \"minmax\" or \"meandev\"");
  cfg.solver.hkc_epsilon =
      get_number(*solver, "solver", "hkc_epsilon", cfg.solver.hkc_epsilon);
}

void parse_privacy(const json& fed, FederationConfig& out) {
  const json* privacy = opt(fed, "privacy");
  if (privacy == nullptr) return;
  if (!privacy->is_object()) fail("federation.privacy", "expected an object");
  reject_unknown(*privacy, "federation.privacy",
                 {"enabled", "epsilon", "delta", "clip_norm", "noise_seed"});
  out.privacy.enabled =
      get_bool(*privacy, "federation.privacy", "enabled", out.privacy.enabled);
  out.privacy.epsilon =
      get_number(*privacy, "federation.privacy", "epsilon", out.privacy.epsilon);
  out.privacy.delta = get_number(*privacy, "federation.privacy", "delta", out.privacy.delta);
  out.privacy.clip_norm =
      get_number(*privacy, "federation.privacy", "clip_norm", out.privacy.clip_norm);
  out.privacy.noise_seed =
      get_uint(*privacy, "federation.privacy", "noise_seed", out.privacy.noise_seed);
}

void parse_federation(const json& root, ExperimentConfig& cfg) {
  const json* fed = opt(root, "federation");
  if (fed == nullptr) return;
  cfg.federated = true;
  if (!fed->is_object()) fail("federation", "expected an object");
  reject_unknown(*fed, "federation",
                 {"rounds", "local_epochs", "temperature", "center_reg", "view_reg", "lambda0",
                  "rho0", "adaptive", "adapt_step", "fd_step", "per_client_clusters",
                  "privacy"});
  FederationConfig& out = cfg.federation;
  out.rounds = get_uint(*fed, "federation", "rounds", out.rounds);
  out.local_epochs = get_uint(*fed, "federation", "local_epochs", out.local_epochs);
  out.temperature = get_number(*fed, "federation", "temperature", out.temperature);
  out.center_reg = get_number(*fed, "federation", "center_reg", out.center_reg);
  out.view_reg = get_number(*fed, "federation", "view_reg", out.view_reg);
  out.lambda0 = get_number(*fed, "federation", "lambda0", out.lambda0);
  out.rho0 = get_number(*fed, "federation", "rho0", out.rho0);
  out.adaptive = get_bool(*fed, "federation", "adaptive", out.adaptive);
  out.adapt_step = get_number(*fed, "federation", "adapt_step", out.adapt_step);
  out.fd_step = get_number(*fed, "federation", "fd_step", out.fd_step);
  if (const json* per_client = opt(*fed, "per_client_clusters"))
    out.per_client_clusters = get_size_array(*per_client, "federation.per_client_clusters");
  parse_privacy(*fed, out);
}

std::string fmt_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  const json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw ConfigError("config: invalid JSON");
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(root, "",
                 {"name", "mode", "seed", "output_dir", "data", "clients", "partition",
                  "solver", "ranks", "federation"});

  ExperimentConfig cfg;
  cfg.name = get_string(root, "", "name", cfg.name);
  if (const json* mode = opt(root, "mode")) {
    if (!mode->is_string()) fail("mode", "expected \"dense\" or \"tensorized\"");
    const std::string value = mode->get<std::string>();
    if (value == "dense")
      cfg.mode = RunMode::Dense;
    else if (value == "tensorized")
      cfg.mode = RunMode::Tensorized;
    else
      fail("mode", "expected \"dense\" or \"tensorized\"");
  }
  cfg.seed = get_uint(root, "", "seed", cfg.seed);
  cfg.output_dir = get_string(root, "", "output_dir", cfg.output_dir);
  parse_data(root, cfg);
  cfg.clients = get_uint(root, "", "clients", cfg.clients);
  parse_partition(root, cfg);
  parse_solver(root, cfg);
  if (const json* ranks = opt(root, "ranks")) {
    if (!ranks->is_object()) fail("ranks", "expected an object");
    reject_unknown(*ranks, "ranks", {"feature", "view"});
    cfg.ranks.feature = get_uint(*ranks, "ranks", "feature", cfg.ranks.feature);
    cfg.ranks.view = get_uint(*ranks, "ranks", "view", cfg.ranks.view);
  }
  parse_federation(root, cfg);
  cfg.partition.clients = cfg.clients;
  return cfg;
}

std::vector<std::string> check_experiment_config(const ExperimentConfig& config) {
  std::vector<std::string> violations;
  try {
    config.solver.validate();
  } catch (const std::exception& e) {
    violations.push_back(std::string("solver: ") + e.what());
  }

  if (config.use_synthetic) {
    const SyntheticSpec& spec = config.synthetic;
    if (spec.clusters == 0 || spec.samples < spec.clusters)
      violations.push_back("data.synthetic: samples must be >= clusters >= 1");
    if (spec.view_dims.empty())
      violations.push_back("data.synthetic.view_dims: at least one view required");
    if (!(spec.separation > 0.0))
      violations.push_back("data.synthetic.separation: must be positive");
    if (config.solver.clusters > spec.samples)
      violations.push_back("solver.clusters: exceeds the sample count");
    if (config.clients > spec.samples)
      violations.push_back("clients: exceeds the sample count");
    if (config.mode == RunMode::Tensorized && !spec.view_dims.empty()) {
      const std::size_t max_dim =
          *std::max_element(spec.view_dims.begin(), spec.view_dims.end());
      if (config.ranks.feature == 0 || config.ranks.feature > max_dim)
        violations.push_back("ranks.feature: must lie in [1, max view dim]");
      if (config.ranks.view == 0 || config.ranks.view > spec.view_dims.size())
        violations.push_back("ranks.view: must lie in [1, view count]");
    }
  } else if (config.manifest.empty()) {
    violations.push_back("data.manifest: must not be empty");
  }

  if (config.mode == RunMode::Tensorized &&
      (config.ranks.feature == 0 || config.ranks.view == 0))
    violations.push_back("ranks: feature and view ranks must be positive");

  if (config.clients == 0) violations.push_back("clients: must be at least 1");
  if (config.partition.strategy == PartitionStrategy::Dirichlet &&
      !(config.partition.concentration > 0.0))
    violations.push_back("partition.concentration: must be positive");

  if (config.federated) {
    FederationConfig fed = config.federation;
    fed.mode = config.mode;
    fed.solver = SolverConfig{};
    fed.ranks = config.ranks;
    try {
      fed.validate();
    } catch (const std::exception& e) {
      violations.push_back(std::string("federation: ") + e.what());
    }
    if (!fed.per_client_clusters.empty() && fed.per_client_clusters.size() != config.clients)
      violations.push_back("federation.per_client_clusters: size must equal clients");
  } else if (config.clients > 1) {
    violations.push_back("clients: federation section required when clients > 1");
  }
  return violations;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig cfg = parse_experiment_config(buffer.str());
  const std::vector<std::string> violations = check_experiment_config(cfg);
  if (!violations.empty()) {
    std::string joined = violations.front();
    for (std::size_t i = 1; i < violations.size(); ++i) joined += "\n" + violations[i];
    throw ConfigError(joined);
  }
  return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  {
    const std::vector<std::string> violations = check_experiment_config(config);
    if (!violations.empty()) throw ConfigError(violations.front());
  }
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  const bool dense = config.mode == RunMode::Dense;

  const MultiViewDataset data =
      config.use_synthetic ? generate_synthetic(config.synthetic) : load_dataset(config.manifest);
  std::vector<MultiViewDataset> parts;
  if (config.clients > 1) {
    PartitionPlan plan = config.partition;
    plan.clients = config.clients;
    parts = partition_clients(data, plan);
  } else {
    parts.push_back(data);
  }

  fs::create_directories(config.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(config.output_dir) / name).string();
  };

  ExperimentResult result;
  std::string abort_message;
  std::vector<const Eigen::MatrixXd*> memberships(parts.size(), nullptr);

  if (config.federated) {
    FederationConfig fed = config.federation;
    fed.mode = config.mode;
    fed.solver = config.solver;
    fed.ranks = config.ranks;
    fed.seed = config.seed;
    const FederationResult run = run_federation(parts, fed);

    result.rounds_completed = run.rounds.size();
    for (const std::string& note : run.notes)
      if (note.find("aborted") != std::string::npos && abort_message.empty())
        abort_message = note;
    result.aborted = !abort_message.empty();

    std::ofstream rounds_out = open_output(out_path("rounds.jsonl"));
    for (const RoundMetrics& rm : run.rounds) {
      const json line{{"round", rm.round},
                      {"client_objectives", rm.client_objectives},
                      {"shared_objectives", rm.shared_objectives},
                      {"client_weights", to_std(rm.client_weights)},
                      {"global_objective", rm.global_objective},
                      {"payload_elements", rm.payload_elements},
                      {"blend_contraction_error", rm.blend_contraction_error},
                      {"notes", rm.notes}};
      rounds_out << line.dump() << "\n";
      result.payload_total_elements += std::accumulate(rm.payload_elements.begin(),
                                                       rm.payload_elements.end(), std::size_t{0});
    }
    rounds_out.close();
    result.written.push_back(out_path("rounds.jsonl"));

    for (std::size_t l = 0; l < parts.size(); ++l) {
      std::ofstream trace =
          open_output(out_path("objective_trace_client" + std::to_string(l) + ".csv"));
      trace << "round,objective\n";
      for (const RoundMetrics& rm : run.rounds)
        trace << rm.round << "," << fmt_double(rm.client_objectives[l]) << "\n";
      result.written.push_back(out_path("objective_trace_client" + std::to_string(l) + ".csv"));
    }

    for (std::size_t l = 0; l < parts.size(); ++l) {
      const std::string path = out_path("model_client" + std::to_string(l) + ".fmvb");
      if (dense)
        save_model(run.client_models[l], path);
      else
        save_model(run.tensorized_models[l], path);
      result.written.push_back(path);
      memberships[l] =
          dense ? &run.client_models[l].memberships : &run.tensorized_models[l].memberships;
      if (!run.rounds.empty())
        result.client_objectives.push_back(run.rounds.back().client_objectives[l]);
    }
    save_model(run.global, out_path("model_global.fmvb"));
    result.written.push_back(out_path("model_global.fmvb"));

    result.has_labels = std::all_of(parts.begin(), parts.end(),
                                    [](const MultiViewDataset& p) { return p.has_labels(); });
    if (result.has_labels && !run.rounds.empty()) {
      for (std::size_t l = 0; l < parts.size(); ++l) {
        const ClusteringScores scores =
            clustering_metrics(hard_labels(*memberships[l]), parts[l].labels);
        result.client_ari.push_back(scores.ari);
        result.client_nmi.push_back(scores.nmi);
      }
    }
  } else {
    SolverConfig solver = config.solver;
    solver.seed = config.seed;
    std::vector<double> trace_values;
    if (dense) {
      const LocalModel model = fit_local(parts[0], solver);
      save_model(model, out_path("model_client0.fmvb"));
      trace_values = model.objective_trace;
      result.client_objectives.push_back(model.objective_trace.back());
      if (parts[0].has_labels()) {
        result.has_labels = true;
        const ClusteringScores scores =
            clustering_metrics(hard_labels(model.memberships), parts[0].labels);
        result.client_ari.push_back(scores.ari);
        result.client_nmi.push_back(scores.nmi);
      }
    } else {
      const TensorizedModel model = fit_tensorized(parts[0], solver, config.ranks);
      save_model(model, out_path("model_client0.fmvb"));
      trace_values = model.objective_trace;
      result.client_objectives.push_back(model.objective_trace.back());
      if (parts[0].has_labels()) {
        result.has_labels = true;
        const ClusteringScores scores =
            clustering_metrics(hard_labels(model.memberships), parts[0].labels);
        result.client_ari.push_back(scores.ari);
        result.client_nmi.push_back(scores.nmi);
      }
    }
    result.written.push_back(out_path("model_client0.fmvb"));

    std::ofstream trace = open_output(out_path("objective_trace_client0.csv"));
    trace << "iteration,objective\n";
    for (std::size_t i = 0; i < trace_values.size(); ++i)
      trace << i + 1 << "," << fmt_double(trace_values[i]) << "\n";
    result.written.push_back(out_path("objective_trace_client0.csv"));

    open_output(out_path("rounds.jsonl"));
    result.written.push_back(out_path("rounds.jsonl"));
  }

  if (!result.client_ari.empty())
    result.mean_ari = std::accumulate(result.client_ari.begin(), result.client_ari.end(), 0.0) /
                      static_cast<double>(result.client_ari.size());
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json summary{{"schema_version", 1},
               {"name", config.name},
               {"mode", dense ? "dense" : "tensorized"},
               {"clients", parts.size()},
               {"federated", config.federated},
               {"rounds_completed", result.rounds_completed},
               {"client_objectives", result.client_objectives},
               {"payload_total_elements", result.payload_total_elements},
               {"wall_seconds", result.wall_seconds},
               {"aborted", result.aborted}};
  if (!result.client_ari.empty()) {
    summary["client_ari"] = result.client_ari;
    summary["client_nmi"] = result.client_nmi;
    summary["mean_ari"] = result.mean_ari;
  }
  {
    std::ofstream out = open_output(out_path("summary.json"));
    out << summary.dump(2) << "\n";
  }
  result.written.push_back(out_path("summary.json"));

  if (result.aborted) throw std::runtime_error(abort_message);
  return result;
}

}  // namespace fedmvc
