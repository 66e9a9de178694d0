#include "precal/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace precal::cli {

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

std::string read_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("io: cannot open '" + path + "'");
  std::ostringstream content;
  content << file.rdbuf();
  return content.str();
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path temp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream file(temp, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("io: cannot write '" + temp.string() + "'");
    file << content;
    file.flush();
    if (!file) throw DataError("io: short write to '" + temp.string() + "'");
  }
  fs::rename(temp, target);
}

void save_checkpoint(const std::string& path, const model::ModelConfig& config,
                     const ParamVector& params, std::uint64_t train_seed) {
  nlohmann::json j;
  j["format"] = "precal-checkpoint-1";
  j["architecture"] = {{"input_dim", config.input_dim},
                       {"target_dim", config.target_dim},
                       {"components", config.components},
                       {"hidden", config.hidden},
                       {"diagonal_covariance", config.diagonal_covariance}};
  j["train_seed"] = train_seed;
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : params.segments())
    segments.push_back({{"name", s.name}, {"size", s.size}});
  j["segments"] = segments;
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) values.push_back(format_double(params[i]));
  j["parameters"] = values;
  write_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    if (j.value("format", "") != "precal-checkpoint-1")
      throw DataError("checkpoint: unrecognized format in '" + path + "'");
    Checkpoint ckpt;
    const auto& arch = j.at("architecture");
    ckpt.config.input_dim = arch.at("input_dim").get<std::size_t>();
    ckpt.config.target_dim = arch.at("target_dim").get<std::size_t>();
    ckpt.config.components = arch.at("components").get<std::size_t>();
    ckpt.config.hidden = arch.at("hidden").get<std::vector<std::size_t>>();
    ckpt.config.diagonal_covariance = arch.at("diagonal_covariance").get<bool>();
    ckpt.train_seed = j.value("train_seed", std::uint64_t{1});

    model::Hypernetwork net(ckpt.config);
    ckpt.params = net.params();
    const auto& values = j.at("parameters");
    if (values.size() != ckpt.params.size())
      throw DataError("checkpoint: expected " + std::to_string(ckpt.params.size()) +
                      " parameters, found " + std::to_string(values.size()));
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      const std::string text = values[i].get<std::string>();
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end != text.c_str() + text.size())
        throw DataError("checkpoint: parameter " + std::to_string(i) +
                        " is not a number: '" + text + "'");
      ckpt.params[i] = v;
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: malformed '" + path + "': " + e.what());
  }
}

}  // namespace precal::cli
