#include "fedmvc/serialize.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fedmvc {

namespace {

using nlohmann::json;

constexpr char kMagic[] = {'F', 'M', 'V', 'B', '1', '\n'};
constexpr std::size_t kMagicSize = sizeof(kMagic);
constexpr std::uint64_t kMaxHeaderBytes = 1u << 24;

struct TensorEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t count = 1;
  for (std::size_t extent : shape) count *= extent;
  return count;
}

void append_matrix(std::vector<TensorEntry>& out, std::string name, const Eigen::MatrixXd& m) {
  TensorEntry entry{std::move(name),
                    {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                    {}};
  entry.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) entry.values.push_back(m(r, c));
  out.push_back(std::move(entry));
}

void append_vector(std::vector<TensorEntry>& out, std::string name, const Eigen::VectorXd& v) {
  TensorEntry entry{std::move(name), {static_cast<std::size_t>(v.size())}, {}};
  entry.values.assign(v.data(), v.data() + v.size());
  out.push_back(std::move(entry));
}

void append_trace(std::vector<TensorEntry>& out, std::string name,
                  const std::vector<double>& values) {
  out.push_back(TensorEntry{std::move(name), {values.size()}, values});
}

void append_tensor(std::vector<TensorEntry>& out, std::string name, const DenseTensor& t) {
  out.push_back(TensorEntry{std::move(name), t.shape(), t.data()});
}

void write_file(const std::string& path, const std::string& kind,
                const std::vector<TensorEntry>& entries, const json& scalars,
                const std::vector<std::string>& notes) {
  json header;
  header["kind"] = kind;
  header["scalars"] = scalars;
  header["notes"] = notes;
  json tensors = json::array();
  for (const auto& entry : entries) tensors.push_back({{"name", entry.name}, {"shape", entry.shape}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, kMagicSize);
  const std::uint64_t length = text.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((length >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& entry : entries)
    out.write(reinterpret_cast<const char*>(entry.values.data()),
              static_cast<std::streamsize>(entry.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

struct ModelFile {
  json header;
  std::vector<TensorEntry> entries;
};

json read_header(std::ifstream& in, const std::string& path) {
  char magic[kMagicSize];
  in.read(magic, kMagicSize);
  if (!in || !std::equal(magic, magic + kMagicSize, kMagic))
    throw std::runtime_error("not a model file: " + path);
  char lenbuf[8];
  in.read(lenbuf, 8);
  if (!in) throw std::runtime_error("truncated model file: " + path);
  std::uint64_t length = 0;
  for (int i = 0; i < 8; ++i)
    length |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  if (length == 0 || length > kMaxHeaderBytes)
    throw std::runtime_error("malformed model header: " + path);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw std::runtime_error("truncated model file: " + path);
  json header = json::parse(text, nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("kind") ||
      !header.contains("tensors"))
    throw std::runtime_error("malformed model header: " + path);
  return header;
}

ModelFile read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  ModelFile file;
  file.header = read_header(in, path);
  for (const auto& spec : file.header.at("tensors")) {
    TensorEntry entry;
    entry.name = spec.at("name").get<std::string>();
    entry.shape = spec.at("shape").get<std::vector<std::size_t>>();
    entry.values.resize(element_count(entry.shape));
    in.read(reinterpret_cast<char*>(entry.values.data()),
            static_cast<std::streamsize>(entry.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated model file: " + path);
    file.entries.push_back(std::move(entry));
  }
  return file;
}

const TensorEntry& find(const ModelFile& file, const std::string& name) {
  for (const auto& entry : file.entries)
    if (entry.name == name) return entry;
  throw std::runtime_error("model file missing tensor: " + name);
}

Eigen::MatrixXd as_matrix(const TensorEntry& entry) {
  if (entry.shape.size() != 2)
    throw std::runtime_error("tensor " + entry.name + " is not a matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(entry.shape[0]),
                    static_cast<Eigen::Index>(entry.shape[1]));
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = entry.values[at++];
  return m;
}

Eigen::VectorXd as_vector(const TensorEntry& entry) {
  if (entry.shape.size() != 1)
    throw std::runtime_error("tensor " + entry.name + " is not a vector");
  return Eigen::Map<const Eigen::VectorXd>(entry.values.data(),
                                           static_cast<Eigen::Index>(entry.values.size()));
}

DenseTensor as_tensor(const TensorEntry& entry) {
  return DenseTensor(entry.shape, entry.values);
}

std::vector<std::string> header_notes(const json& header) {
  std::vector<std::string> notes;
  if (header.contains("notes"))
    for (const auto& note : header.at("notes")) notes.push_back(note.get<std::string>());
  return notes;
}

void expect_kind(const json& header, const std::string& kind, const std::string& path) {
  if (header.at("kind").get<std::string>() != kind)
    throw std::runtime_error(path + " holds a " + header.at("kind").get<std::string>() +
                             ", expected " + kind);
}

}  // namespace

void save_model(const LocalModel& model, const std::string& path) {
  std::vector<TensorEntry> entries;
  append_matrix(entries, "memberships", model.memberships);
  for (std::size_t h = 0; h < model.centers.size(); ++h)
    append_matrix(entries, "centers/" + std::to_string(h), model.centers[h]);
  append_vector(entries, "view_weights", model.view_weights);
  append_trace(entries, "objective_trace", model.objective_trace);
  write_file(path, "local_model", entries, json{{"views", model.centers.size()}},
             model.diagnostics);
}

void save_model(const TensorizedModel& model, const std::string& path) {
  std::vector<TensorEntry> entries;
  append_matrix(entries, "memberships", model.memberships);
  append_tensor(entries, "core", model.factors.core);
  append_matrix(entries, "cluster_factor", model.factors.cluster);
  append_matrix(entries, "feature_factor", model.factors.feature);
  append_matrix(entries, "view_factor", model.factors.view);
  append_vector(entries, "view_weights", model.view_weights);
  append_trace(entries, "objective_trace", model.objective_trace);
  append_trace(entries, "surrogate_trace", model.surrogate_trace);
  write_file(path, "tensorized_model", entries, json::object(), model.diagnostics);
}

void save_model(const GlobalModel& model, const std::string& path) {
  std::vector<TensorEntry> entries;
  json scalars{{"mode", model.mode == RunMode::Dense ? "dense" : "tensorized"},
               {"round", model.round}};
  if (model.mode == RunMode::Dense) {
    scalars["views"] = model.centers.size();
    for (std::size_t h = 0; h < model.centers.size(); ++h)
      append_matrix(entries, "centers/" + std::to_string(h), model.centers[h]);
  } else {
    append_tensor(entries, "core", model.factors.core);
    append_matrix(entries, "cluster_factor", model.factors.cluster);
    append_matrix(entries, "feature_factor", model.factors.feature);
    append_matrix(entries, "view_factor", model.factors.view);
  }
  append_vector(entries, "view_weights", model.view_weights);
  append_vector(entries, "client_weights", model.client_weights);
  write_file(path, "global_model", entries, scalars, {});
}

std::string model_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_header(in, path).at("kind").get<std::string>();
}

LocalModel load_local_model(const std::string& path) {
  const ModelFile file = read_file(path);
  expect_kind(file.header, "local_model", path);
  LocalModel model;
  model.memberships = as_matrix(find(file, "memberships"));
  const std::size_t views = file.header.at("scalars").at("views").get<std::size_t>();
  model.centers.resize(views);
  for (std::size_t h = 0; h < views; ++h)
    model.centers[h] = as_matrix(find(file, "centers/" + std::to_string(h)));
  model.view_weights = as_vector(find(file, "view_weights"));
  model.objective_trace = find(file, "objective_trace").values;
  model.diagnostics = header_notes(file.header);
  return model;
}

TensorizedModel load_tensorized_model(const std::string& path) {
  const ModelFile file = read_file(path);
  expect_kind(file.header, "tensorized_model", path);
  TensorizedModel model;
  model.memberships = as_matrix(find(file, "memberships"));
  model.factors.core = as_tensor(find(file, "core"));
  model.factors.cluster = as_matrix(find(file, "cluster_factor"));
  model.factors.feature = as_matrix(find(file, "feature_factor"));
  model.factors.view = as_matrix(find(file, "view_factor"));
  model.view_weights = as_vector(find(file, "view_weights"));
  model.objective_trace = find(file, "objective_trace").values;
  model.surrogate_trace = find(file, "surrogate_trace").values;
  model.diagnostics = header_notes(file.header);
  return model;
}

GlobalModel load_global_model(const std::string& path) {
  const ModelFile file = read_file(path);
  expect_kind(file.header, "global_model", path);
  GlobalModel model;
  const json& scalars = file.header.at("scalars");
  const std::string mode = scalars.at("mode").get<std::string>();
  if (mode != "dense" && mode != "tensorized")
    throw std::runtime_error("unknown global model mode: " + mode);
  model.mode = mode == "dense" ? RunMode::Dense : RunMode::Tensorized;
  model.round = scalars.at("round").get<std::size_t>();
  if (model.mode == RunMode::Dense) {
    const std::size_t views = scalars.at("views").get<std::size_t>();
    model.centers.resize(views);
    for (std::size_t h = 0; h < views; ++h)
      model.centers[h] = as_matrix(find(file, "centers/" + std::to_string(h)));
  } else {
    model.factors.core = as_tensor(find(file, "core"));
    model.factors.cluster = as_matrix(find(file, "cluster_factor"));
    model.factors.feature = as_matrix(find(file, "feature_factor"));
    model.factors.view = as_matrix(find(file, "view_factor"));
  }
  model.view_weights = as_vector(find(file, "view_weights"));
  model.client_weights = as_vector(find(file, "client_weights"));
  return model;
}

}  // namespace fedmvc
