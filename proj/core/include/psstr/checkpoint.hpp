#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace psstr {

// All tensors of a model keyed by hierarchical names. Archive layout:
//   8-byte magic | u64 manifest size | manifest JSON | raw float32 LE payload
// Tensor records are sorted by name and the payload is packed contiguously,
// so identical contents produce identical bytes.
struct NamedParameterSet {
  std::map<std::string, torch::Tensor> entries;

  int64_t parameter_count() const;  // sum of element counts
};

int64_t parameter_count(const NamedParameterSet& params);

// Learnable parameters only.
NamedParameterSet named_parameters_of(const torch::nn::Module& m);
// Parameters plus float buffers (batch-norm running statistics).
NamedParameterSet named_state_of(const torch::nn::Module& m);

void save_archive(const std::filesystem::path& path, const NamedParameterSet& tensors,
                  const nlohmann::json& config = nlohmann::json::object());

struct Archive {
  NamedParameterSet tensors;
  nlohmann::json config;
};
Archive load_archive(const std::filesystem::path& path);

// Copies entries into the module's parameters/buffers by name.
// Unmatched names on either side raise.
void load_state_into(torch::nn::Module& m, const NamedParameterSet& tensors);

}  // namespace psstr
