#include "fedmvc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fedmvc {

namespace {

using nlohmann::json;

std::string fmt_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

std::vector<std::size_t> split_sizes(std::size_t n, std::size_t clients) {
  std::vector<std::size_t> sizes(clients, n / clients);
  for (std::size_t i = 0; i < n % clients; ++i) ++sizes[i];
  return sizes;
}

MultiViewDataset take_rows(const MultiViewDataset& data, const std::vector<std::size_t>& rows,
                           const std::string& name) {
  MultiViewDataset part;
  part.name = name;
  part.views.reserve(data.views.size());
  for (const auto& view : data.views) {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), view.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      sub.row(static_cast<Eigen::Index>(r)) = view.row(static_cast<Eigen::Index>(rows[r]));
    part.views.push_back(std::move(sub));
  }
  if (data.has_labels()) {
    part.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      part.labels(static_cast<Eigen::Index>(r)) = data.labels(static_cast<Eigen::Index>(rows[r]));
  }
  return part;
}

Eigen::VectorXd dirichlet_draw(std::size_t dim, double kappa, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(kappa, 1.0);
  Eigen::VectorXd draw(static_cast<Eigen::Index>(dim));
  double total = 0.0;
  for (Eigen::Index i = 0; i < draw.size(); ++i) {
    draw(i) = gamma(rng);
    total += draw(i);
  }
  if (total <= 0.0) {
    draw.setConstant(1.0 / static_cast<double>(dim));
  } else {
    draw /= total;
  }
  return draw;
}

std::size_t pick_client(const Eigen::VectorXd& proportions, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < proportions.size(); ++i) {
    acc += proportions(i);
    if (u < acc) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(proportions.size() - 1);
}

Eigen::MatrixXd load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
      while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end)
        throw std::runtime_error(path.string() + ": non-numeric cell at row " +
                                 std::to_string(line_no) + ", column " + std::to_string(col));
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path.string() + ": row " + std::to_string(line_no) +
                               " has " + std::to_string(row.size()) + " columns, expected " +
                               std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": empty file");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return out;
}

void write_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << fmt_double(m(r, c));
    }
    out << '\n';
  }
}

}  // namespace

void MultiViewDataset::validate() const {
  if (views.empty()) throw std::invalid_argument("dataset has no views");
  const Eigen::Index n = views[0].rows();
  if (n == 0) throw std::invalid_argument("dataset has no samples");
  for (std::size_t h = 0; h < views.size(); ++h) {
    if (views[h].rows() != n)
      throw std::invalid_argument("view " + std::to_string(h) + " has " +
                                  std::to_string(views[h].rows()) + " rows, expected " +
                                  std::to_string(n));
    if (views[h].cols() == 0)
      throw std::invalid_argument("view " + std::to_string(h) + " has no features");
    if (!views[h].allFinite())
      throw std::invalid_argument("view " + std::to_string(h) + " contains non-finite values");
  }
  if (labels.size() != 0 && labels.size() != n)
    throw std::invalid_argument("label vector length does not match sample count");
}

MultiViewDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.samples == 0) throw std::invalid_argument("synthetic: samples must be >= 1");
  if (spec.clusters == 0) throw std::invalid_argument("synthetic: clusters must be >= 1");
  if (spec.clusters > spec.samples)
    throw std::invalid_argument("synthetic: clusters must be <= samples");
  if (spec.view_dims.empty()) throw std::invalid_argument("synthetic: view_dims must be nonempty");
  for (std::size_t d : spec.view_dims)
    if (d == 0) throw std::invalid_argument("synthetic: view dims must be >= 1");
  if (!(spec.separation >= 0.0))
    throw std::invalid_argument("synthetic: separation must be >= 0");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Balanced labels, shuffled.
  std::vector<int> labels(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i)
    labels[i] = static_cast<int>(i % spec.clusters);
  std::shuffle(labels.begin(), labels.end(), rng);

  MultiViewDataset data;
  data.name = "synthetic";
  data.labels.resize(static_cast<Eigen::Index>(spec.samples));
  for (std::size_t i = 0; i < spec.samples; ++i)
    data.labels(static_cast<Eigen::Index>(i)) = labels[i];

  for (std::size_t d : spec.view_dims) {
    Eigen::MatrixXd means(static_cast<Eigen::Index>(spec.clusters), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < means.rows(); ++r)
      for (Eigen::Index c = 0; c < means.cols(); ++c) means(r, c) = normal(rng);
    if (spec.clusters > 1) {
      double min_dist = std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < means.rows(); ++a)
        for (Eigen::Index b = a + 1; b < means.rows(); ++b)
          min_dist = std::min(min_dist, (means.row(a) - means.row(b)).norm());
      if (min_dist <= 0.0) min_dist = 1.0;
      means *= spec.separation / min_dist;
    }
    Eigen::MatrixXd view(static_cast<Eigen::Index>(spec.samples), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < spec.samples; ++i)
      for (Eigen::Index c = 0; c < view.cols(); ++c)
        view(static_cast<Eigen::Index>(i), c) = means(labels[i], c) + normal(rng);
    data.views.push_back(std::move(view));
  }
  data.validate();
  return data;
}

std::vector<MultiViewDataset> partition_clients(const MultiViewDataset& data,
                                                const PartitionPlan& plan) {
  data.validate();
  if (plan.clients == 0) throw std::invalid_argument("partition: clients must be >= 1");
  const std::size_t n = data.samples();
  if (plan.clients > n)
    throw std::invalid_argument("partition: more clients than samples");

  std::mt19937_64 rng(plan.seed);
  std::vector<std::vector<std::size_t>> assignment(plan.clients);

  if (plan.strategy == PartitionStrategy::Iid) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto sizes = split_sizes(n, plan.clients);
    std::size_t at = 0;
    for (std::size_t c = 0; c < plan.clients; ++c) {
      assignment[c].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                           order.begin() + static_cast<std::ptrdiff_t>(at + sizes[c]));
      at += sizes[c];
    }
  } else {
    if (!(plan.concentration > 0.0))
      throw std::invalid_argument("partition: concentration must be > 0");
    constexpr int kMaxRetries = 100;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
      for (auto& rows : assignment) rows.clear();
      if (data.has_labels()) {
        // Label-stratified skew: one Dirichlet proportion vector per class.
        const int num_classes = data.labels.maxCoeff() + 1;
        for (int cls = 0; cls < num_classes; ++cls) {
          const Eigen::VectorXd prop = dirichlet_draw(plan.clients, plan.concentration, rng);
          for (std::size_t i = 0; i < n; ++i)
            if (data.labels(static_cast<Eigen::Index>(i)) == cls)
              assignment[pick_client(prop, rng)].push_back(i);
        }
      } else {
        const Eigen::VectorXd prop = dirichlet_draw(plan.clients, plan.concentration, rng);
        for (std::size_t i = 0; i < n; ++i) assignment[pick_client(prop, rng)].push_back(i);
      }
      ok = std::all_of(assignment.begin(), assignment.end(),
                       [](const auto& rows) { return !rows.empty(); });
    }
    if (!ok)
      throw std::invalid_argument(
          "partition: could not produce nonempty clients within retry budget");
    for (auto& rows : assignment) std::sort(rows.begin(), rows.end());
  }

  std::vector<MultiViewDataset> parts;
  parts.reserve(plan.clients);
  for (std::size_t c = 0; c < plan.clients; ++c)
    parts.push_back(take_rows(data, assignment[c], data.name + "/client" + std::to_string(c)));
  return parts;
}

MultiViewDataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("views") || !manifest["views"].is_array())
    throw std::runtime_error(manifest_path.string() + ": manifest must contain a views array");

  const auto base = manifest_path.parent_path();
  MultiViewDataset data;
  data.name = manifest.value("name", manifest_path.stem().string());
  for (const auto& entry : manifest["views"]) {
    const std::filesystem::path view_path = base / entry.at("path").get<std::string>();
    Eigen::MatrixXd view = load_csv(view_path);
    if (entry.contains("dim") &&
        entry["dim"].get<Eigen::Index>() != view.cols())
      throw std::runtime_error(view_path.string() + ": expected " +
                               std::to_string(entry["dim"].get<int>()) + " columns, found " +
                               std::to_string(view.cols()));
    if (!data.views.empty() && view.rows() != data.views[0].rows())
      throw std::runtime_error("malformed dataset: " + view_path.string() + " has " +
                               std::to_string(view.rows()) + " rows but earlier view files have " +
                               std::to_string(data.views[0].rows()));
    data.views.push_back(std::move(view));
  }
  if (manifest.contains("labels_path")) {
    const std::filesystem::path labels_path =
        base / manifest["labels_path"].get<std::string>();
    const Eigen::MatrixXd raw = load_csv(labels_path);
    if (raw.cols() != 1)
      throw std::runtime_error(labels_path.string() + ": labels must be a single column");
    if (!data.views.empty() && raw.rows() != data.views[0].rows())
      throw std::runtime_error("malformed dataset: " + labels_path.string() + " has " +
                               std::to_string(raw.rows()) + " rows but view files have " +
                               std::to_string(data.views[0].rows()));
    data.labels.resize(raw.rows());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      const double v = raw(i, 0);
      if (v != std::floor(v))
        throw std::runtime_error(labels_path.string() + ": non-integer label at row " +
                                 std::to_string(i + 1));
      data.labels(i) = static_cast<int>(v);
    }
  }
  data.validate();
  return data;
}

void save_dataset(const MultiViewDataset& data, const std::filesystem::path& dir) {
  data.validate();
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["name"] = data.name;
  manifest["views"] = json::array();
  for (std::size_t h = 0; h < data.views.size(); ++h) {
    const std::string file = "view" + std::to_string(h) + ".csv";
    write_csv(data.views[h], dir / file);
    manifest["views"].push_back({{"path", file}, {"dim", data.views[h].cols()}});
  }
  if (data.has_labels()) {
    Eigen::MatrixXd raw = data.labels.cast<double>();
    write_csv(raw, dir / "labels.csv");
    manifest["labels_path"] = "labels.csv";
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace fedmvc
