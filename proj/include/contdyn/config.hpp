#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "contdyn/scaling.hpp"

namespace contdyn {

// Problem in an experiment file; `line` is 0 when the key is missing.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& source, int line, std::string key, const std::string& msg);
  int line() const { return line_; }
  const std::string& key() const { return key_; }

private:
  int line_;
  std::string key_;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;
};

// Sectioned key = value text:
//
//   # comment
//   [domain]
//   mode = torus
//   side = 100
//
// Keys are checked against a fixed schema per section.
class ExperimentConfig {
public:
  static ExperimentConfig parse(const std::string& text, const std::string& source = "<config>");
  static ExperimentConfig load(const std::string& path);
  std::string emit() const;

  const std::string& source() const { return source_; }
  const std::vector<ConfigSection>& sections() const { return sections_; }
  bool has(const std::string& section, const std::string& key) const;
  const ConfigEntry* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string str(const std::string& section, const std::string& key,
                  std::optional<std::string> fallback = std::nullopt) const;
  double number(const std::string& section, const std::string& key,
                std::optional<double> fallback = std::nullopt) const;
  std::uint64_t integer(const std::string& section, const std::string& key,
                        std::optional<std::uint64_t> fallback = std::nullopt) const;
  bool flag(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& section, const std::string& key,
                              std::optional<std::vector<double>> fallback = std::nullopt) const;
  // Raise an error pointing at the key (or its section when absent).
  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& msg) const;

  // Same sections, keys and values (line numbers ignored).
  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

private:
  std::string source_;
  std::vector<ConfigSection> sections_;
};

DomainPtr build_domain(const ExperimentConfig& cfg);
KernelSpec build_kernel(const ExperimentConfig& cfg, std::size_t d);
// phi1, phi2, ... from [observables]; at least one is required when `required`.
std::vector<TestFunction> build_test_functions(const ExperimentConfig& cfg, std::size_t d,
                                               bool required = true);
EvolutionPlan build_plan(const ExperimentConfig& cfg, const Domain& domain);
// Initial configuration named by [dynamics] start.
Configuration build_start(const ExperimentConfig& cfg, const DomainPtr& domain, RngStream& rng);
StartingMeasure build_measure(const ExperimentConfig& cfg);
ScalingExperiment build_scaling(const ExperimentConfig& cfg);
std::uint64_t config_seed(const ExperimentConfig& cfg);

}  // namespace contdyn
