#pragma once

#include <string>

#include "fedmvc/federation.hpp"
#include "fedmvc/local_solver.hpp"
#include "fedmvc/tucker_solver.hpp"

namespace fedmvc {

/// Model container: magic "FMVB1\n", little-endian uint64 header byte count,
/// a JSON header {kind, tensors: [{name, shape}], scalars, notes}, then the
/// tensor values as little-endian float64, row-major, concatenated in header
/// order.
void save_model(const LocalModel& model, const std::string& path);
void save_model(const TensorizedModel& model, const std::string& path);
void save_model(const GlobalModel& model, const std::string& path);

/// Reads only the header and reports the stored kind
/// ("local_model" | "tensorized_model" | "global_model").
std::string model_kind(const std::string& path);

LocalModel load_local_model(const std::string& path);
TensorizedModel load_tensorized_model(const std::string& path);
GlobalModel load_global_model(const std::string& path);

}  // namespace fedmvc
