#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "contdyn/config.hpp"

namespace contdyn {

inline constexpr const char* kVersion = "0.1.0";

// Everything needed to rerun an experiment. Deliberately excludes the thread
// count and wall-clock time so outputs are byte-identical across runs.
struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  nlohmann::ordered_json tolerances = nlohmann::ordered_json::object();
  std::string config;
};

nlohmann::ordered_json to_json(const Provenance& p);

nlohmann::ordered_json to_json(const Domain& d);
nlohmann::ordered_json to_json(const Configuration& c);
nlohmann::ordered_json to_json(const ThetaReport& r);
nlohmann::ordered_json to_json(const TailBoundReport& r);
nlohmann::ordered_json to_json(const ConvergenceReport& r);
nlohmann::ordered_json to_json(const ExitEstimate& e);
nlohmann::ordered_json to_json(const LaplaceEstimate& e);
nlohmann::ordered_json to_json(const FdCheck& c);
nlohmann::ordered_json to_json(const CorrelationBoundRow& r);
nlohmann::ordered_json to_json(const MuConditionsReport& r);
nlohmann::ordered_json to_json(const ScalingReport& r);

// One JSON object per line: {"t":..,"kind":..,"particle":..,"from":[..],"to":[..]}
std::string event_to_json_line(const Event& e);

// %.17g, so values survive a text round trip.
std::string format_number(double v);

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void add_row(const std::vector<double>& values);
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& columns() const { return columns_; }
  // "# key: value" provenance lines (config lines prefixed "# config| "),
  // then the header and the rows.
  std::string render(const Provenance& p) const;

private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

CsvTable configuration_table(const Configuration& c);
CsvTable correlation_table(const CorrelationGrid& g);
CsvTable scaling_table(const ScalingReport& r);

// Report wrapped as {"provenance": .., "result": ..}.
std::string render_report(const Provenance& p, const nlohmann::ordered_json& result);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace contdyn
