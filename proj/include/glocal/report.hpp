#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "glocal/types.hpp"

namespace glocal {

enum class Task { Ooo, FewShot, Anomaly, Rsa, Cka, NnRecall, Truncate };

const char* to_string(Task t);

// Structured evaluation output. `metrics` holds the headline numbers;
// `columns`/`rows` carry the per-run / per-class table.
struct EvalReport {
  Task task = Task::Ooo;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  // Throws NonFiniteValue on a non-finite metric.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  // The table if present, otherwise "metric,value" lines.
  std::string to_csv() const;
  void write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const;
};

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

nlohmann::ordered_json to_json(const FitConfig& cfg);

}  // namespace glocal
