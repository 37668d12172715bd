#pragma once

// Versioned binary container for model + optimizer state. Parameters are
// stored as named chunks (name, shape, step, 64-bit values, Adam moments),
// so generator and discriminator live in one file under distinct name
// prefixes. Loading is strict: the parameter set in the file must match the
// parameter set of the model byte for byte in names and shapes.

#include <string>
#include <vector>

#include "usfgan/tensor.hpp"

namespace usfgan::nn {

struct CheckpointMeta {
  int64_t iteration = 0;
  std::string config;  // compatibility string, checked by callers
};

void save_checkpoint(const std::string& path,
                     const std::vector<Parameter<double>*>& params,
                     const CheckpointMeta& meta);

// Fills params by name and returns the stored metadata.
CheckpointMeta load_checkpoint(const std::string& path,
                               const std::vector<Parameter<double>*>& params);

// Reads just the metadata (for compatibility checks before building a model).
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace usfgan::nn
