#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffagent/matrix.hpp"

namespace ffagent::nn {

// Checkpoint = JSON manifest (named tensor shapes, in order, plus a free-form
// header) and a flat little-endian float32 blob in manifest order.
// Round-tripping the blob is bit-exact; values themselves are cast through
// float32.

void save_checkpoint(const std::string& manifest_path, const std::string& blob_path,
                     const std::vector<ParamRef>& tensors, const nlohmann::json& header);

// Shapes must match the refs exactly.
nlohmann::json load_checkpoint(const std::string& manifest_path, const std::string& blob_path,
                               const std::vector<ParamRef>& tensors);

// Flexible read, for tooling.
nlohmann::json load_checkpoint_tensors(const std::string& manifest_path,
                                       const std::string& blob_path,
                                       std::map<std::string, Matrix>& tensors);

// Blob helpers shared with the dataset feature files.
void write_f32_blob(const std::string& path, const double* data, std::size_t n);
std::vector<double> read_f32_blob(const std::string& path, std::size_t expected);

}  // namespace ffagent::nn
