#pragma once

#include "cbebf/experiment.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbebf {

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_opt(const Json& obj, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

/// Accepts a scalar or a list.
inline void read_sizes(const Json& obj, const char* key, std::vector<std::size_t>& dst) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  try {
    dst = v.is_array() ? v.get<std::vector<std::size_t>>() : std::vector<std::size_t>{v.get<std::size_t>()};
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline DomainSpec parse_domain(const Json& j, const std::filesystem::path& base_dir) {
  std::string type = "tile_walk";
  if (j.contains("type")) type = j.at("type").get<std::string>();
  if (type == "tile_walk") {
    reject_unknown_keys(j,
                        {"type", "dims", "center", "tiles_per_dim", "n_grids", "reversion", "step_std", "reward_noise",
                         "policy_feature", "index_stride"},
                        "domain");
    TileWalkSpec s;
    read_opt(j, "dims", s.domain.dims);
    read_opt(j, "center", s.domain.center);
    read_opt(j, "reversion", s.domain.reversion);
    read_opt(j, "step_std", s.domain.step_std);
    read_opt(j, "reward_noise", s.domain.reward_noise);
    read_opt(j, "policy_feature", s.domain.policy_feature);
    read_opt(j, "tiles_per_dim", s.tiles_per_dim);
    read_opt(j, "n_grids", s.n_grids);
    read_opt(j, "index_stride", s.index_stride);
    return s;
  }
  if (type == "finite") {
    reject_unknown_keys(j, {"type", "mdp_file"}, "domain");
    if (!j.contains("mdp_file")) throw std::invalid_argument("config: finite domain needs 'mdp_file'");
    std::filesystem::path file = j.at("mdp_file").get<std::string>();
    if (file.is_relative()) file = base_dir / file;
    return FiniteChainSpec{load_finite_mdp(file.string())};
  }
  throw std::invalid_argument("config: unknown domain type '" + type + "'");
}

inline StoppingRule parse_stopping(const Json& j) {
  std::string kind = "fixed";
  read_opt(j, "stopping", kind);
  if (kind == "fixed") return FixedStopping{};
  if (kind == "validation") {
    ValidationStopping v;
    read_opt(j, "patience", v.patience);
    return v;
  }
  throw std::invalid_argument("config: unknown stopping rule '" + kind + "'");
}

}  // namespace detail

/// Builds a config from JSON. Relative mdp_file paths resolve against base_dir.
/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  using detail::read_opt;
  detail::reject_unknown_keys(j,
                              {"domain", "methods", "n_train", "n_test", "trials", "gamma", "seed",
                               "return_tolerance", "record_timing", "threads", "output_dir"},
                              "config");
  ExperimentConfig cfg;
  if (j.contains("domain")) cfg.domain = detail::parse_domain(j.at("domain"), base_dir);
  if (j.contains("methods")) {
    const auto& m = j.at("methods");
    detail::reject_unknown_keys(m, {"cbebf", "clstd"}, "methods");
    cfg.cbebf.reset();
    cfg.clstd.reset();
    if (m.contains("cbebf")) {
      const auto& c = m.at("cbebf");
      detail::reject_unknown_keys(c, {"d", "m_max", "stopping", "patience", "n_validation"}, "methods.cbebf");
      CbebfMethod method;
      detail::read_sizes(c, "d", method.d);
      read_opt(c, "m_max", method.m_max);
      read_opt(c, "n_validation", method.n_validation);
      method.stopping = detail::parse_stopping(c);
      cfg.cbebf = method;
    }
    if (m.contains("clstd")) {
      const auto& c = m.at("clstd");
      detail::reject_unknown_keys(c, {"d_grid"}, "methods.clstd");
      ClstdMethod method;
      detail::read_sizes(c, "d_grid", method.d_grid);
      cfg.clstd = method;
    }
  }
  detail::read_sizes(j, "n_train", cfg.n_train);
  read_opt(j, "n_test", cfg.n_test);
  read_opt(j, "trials", cfg.trials);
  read_opt(j, "gamma", cfg.gamma);
  read_opt(j, "seed", cfg.master_seed);
  if (j.contains("return_tolerance") && !j.at("return_tolerance").is_null()) {
    cfg.return_tolerance = j.at("return_tolerance").get<double>();
  }
  read_opt(j, "record_timing", cfg.record_timing);
  read_opt(j, "threads", cfg.threads);
  read_opt(j, "output_dir", cfg.output_dir);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace cbebf
