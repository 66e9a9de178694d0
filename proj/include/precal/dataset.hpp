#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "precal/errors.hpp"
#include "precal/matrix.hpp"
#include "precal/training.hpp"

namespace precal::cli {

// Per-column z-score parameters fitted on the training split (population
// standard deviation).  Constant columns get std clamped to 1 so their
// standardized values are exactly 0.
struct Standardization {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> clamped;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::vector<Vector> features;  // standardized, row per example
  std::vector<Vector> targets;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> val_index;
  std::vector<std::size_t> test_index;
  Standardization feature_standardization;
  Standardization target_standardization;

  std::size_t size() const { return features.size(); }
  training::TrainData gather(const std::vector<std::size_t>& index) const;
  training::TrainData train() const { return gather(train_index); }
  training::TrainData val() const { return gather(val_index); }
  training::TrainData test() const { return gather(test_index); }
};

// Reads a headered CSV, shuffles rows with the seed, splits by floors of the
// fractions (leftover rows join the training split), and standardizes every
// column with training-split statistics.  Non-target columns become features.
Dataset load_dataset(const std::string& path, const std::vector<std::string>& target_cols,
                     std::array<double, 3> split_fractions, std::uint64_t seed,
                     std::vector<std::string>* warnings = nullptr);

}  // namespace precal::cli
