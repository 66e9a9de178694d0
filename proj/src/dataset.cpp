#include "precal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "precal/rng.hpp"

namespace precal::cli {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974637376ULL;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) {
    // trim surrounding whitespace
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string()
                                               : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_cell(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && !cell.empty();
}

}  // namespace

training::TrainData Dataset::gather(const std::vector<std::size_t>& index) const {
  training::TrainData data;
  data.x.reserve(index.size());
  data.y.reserve(index.size());
  for (std::size_t i : index) {
    data.x.push_back(features[i]);
    data.y.push_back(targets[i]);
  }
  return data;
}

Dataset load_dataset(const std::string& path, const std::vector<std::string>& target_cols,
                     std::array<double, 3> split_fractions, std::uint64_t seed,
                     std::vector<std::string>* warnings) {
  if (target_cols.empty()) throw ConfigError("dataset: no target columns requested");
  for (double f : split_fractions)
    if (!(f >= 0.0)) throw ConfigError("dataset: split fractions must be nonnegative");
  const double total_fraction =
      split_fractions[0] + split_fractions[1] + split_fractions[2];
  if (!(split_fractions[0] > 0.0)) throw ConfigError("dataset: training fraction must be positive");
  if (std::fabs(total_fraction - 1.0) > 1e-9)
    throw ConfigError("dataset: split fractions must sum to 1");

  std::ifstream file(path);
  if (!file) throw EmptyFile("dataset: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(file, line)) throw EmptyFile("dataset: '" + path + "' is empty");
  const std::vector<std::string> header = split_line(line);
  if (header.empty()) throw EmptyFile("dataset: line 1: empty header row");
  {
    // a fully numeric first row means the header is missing
    bool all_numeric = true;
    double ignored;
    for (const std::string& cell : header) all_numeric = all_numeric && parse_cell(cell, ignored);
    if (all_numeric) throw EmptyFile("dataset: line 1: expected a header row, found numbers");
  }

  std::vector<std::size_t> target_pos;
  for (const std::string& name : target_cols) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw MissingColumn("dataset: no column named '" + name + "'");
    target_pos.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<bool> is_target(header.size(), false);
  for (std::size_t pos : target_pos) {
    if (is_target[pos]) throw ConfigError("dataset: duplicate target column '" + header[pos] + "'");
    is_target[pos] = true;
  }
  if (target_pos.size() == header.size())
    throw ConfigError("dataset: all columns are targets; no features remain");

  std::vector<std::vector<double>> rows;
  std::size_t line_number = 1;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw NonNumericCell("dataset: line " + std::to_string(line_number) + ": expected " +
                           std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_cell(cells[c], row[c]) || !std::isfinite(row[c]))
        throw NonNumericCell("dataset: line " + std::to_string(line_number) + ", column " +
                             std::to_string(c + 1) + " ('" + header[c] +
                             "'): non-numeric cell '" + cells[c] + "'");
    }
    rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  if (n < 10) throw DataError("dataset: need at least 10 rows, found " + std::to_string(n));

  Dataset out;
  out.target_names = target_cols;

  // features keep file column order; targets follow the requested order
  std::vector<std::size_t> feature_pos;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (!is_target[c]) {
      feature_pos.push_back(c);
      out.feature_names.push_back(header[c]);
    }

  out.features.assign(n, Vector(feature_pos.size()));
  out.targets.assign(n, Vector(target_pos.size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < feature_pos.size(); ++c)
      out.features[i][c] = rows[i][feature_pos[c]];
    for (std::size_t c = 0; c < target_pos.size(); ++c)
      out.targets[i][c] = rows[i][target_pos[c]];
  }

  // deterministic shuffle, then floor-sized splits; leftovers join train
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(seed, kSplitStream);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_index(i + 1);
    std::swap(perm[i], perm[j]);
  }
  const auto floor_count = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n)));
  };
  const std::size_t n_val = floor_count(split_fractions[1]);
  const std::size_t n_test = floor_count(split_fractions[2]);
  const std::size_t n_train = n - n_val - n_test;  // rounding leftovers join train
  if (n_train < 2) throw DataError("dataset: training split has fewer than 2 rows");

  out.train_index.assign(perm.begin(), perm.begin() + n_train);
  out.val_index.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  out.test_index.assign(perm.begin() + n_train + n_val, perm.end());

  const auto standardize = [&](std::vector<Vector>& matrix,
                               const std::vector<std::string>& names) {
    Standardization s;
    s.columns = names;
    const std::size_t cols = names.size();
    s.mean.assign(cols, 0.0);
    s.std.assign(cols, 1.0);
    s.clamped.assign(cols, false);
    const double train_n = static_cast<double>(out.train_index.size());
    for (std::size_t c = 0; c < cols; ++c) {
      double mean = 0.0;
      for (std::size_t i : out.train_index) mean += matrix[i][c];
      mean /= train_n;
      double var = 0.0;
      for (std::size_t i : out.train_index) {
        const double d = matrix[i][c] - mean;
        var += d * d;
      }
      var /= train_n;  // population variance
      double std_dev = std::sqrt(var);
      if (!(std_dev > 0.0)) {
        std_dev = 1.0;
        s.clamped[c] = true;
        if (warnings)
          warnings->push_back("column '" + names[c] +
                              "' is constant on the training split; std clamped to 1");
      }
      s.mean[c] = mean;
      s.std[c] = std_dev;
      for (auto& row : matrix) row[c] = (row[c] - mean) / std_dev;
    }
    return s;
  };
  out.feature_standardization = standardize(out.features, out.feature_names);
  out.target_standardization = standardize(out.targets, out.target_names);
  return out;
}

}  // namespace precal::cli
