#pragma once

#include <cstdint>
#include <string>

#include "precal/model.hpp"
#include "precal/param_vector.hpp"

namespace precal::cli {

// Shortest text that reloads to the identical double (17 significant digits).
std::string format_double(double v);

// Whole-file read/write; writes go through a temp file in the same directory
// followed by a rename, so readers never observe a partial file.
std::string read_file(const std::string& path);
void write_atomic(const std::string& path, const std::string& content);

struct Checkpoint {
  model::ModelConfig config;
  ParamVector params;
  std::uint64_t train_seed = 1;
};

// JSON checkpoint: architecture descriptor, named segments, and the flat
// parameter array as decimal strings that reload bit-exactly.
void save_checkpoint(const std::string& path, const model::ModelConfig& config,
                     const ParamVector& params, std::uint64_t train_seed);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace precal::cli
