#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "zilm/domain.hpp"
#include "zilm/fit.hpp"
#include "zilm/simulate.hpp"

namespace zilm {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

// --- primitives ---------------------------------------------------------------

/// Shortest decimal that parses back to the identical double.
std::string format_double(double v);
/// Strict parse of a whole field; throws DataError naming `what`.
double parse_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);

std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// --- simulation config ----------------------------------------------------------

nlohmann::json to_json(const SimConfig& cfg);
/// Omitted keys keep their defaults; unknown keys are ConfigErrors.
SimConfig sim_config_from_json(const nlohmann::json& j);
/// Parses JSON text; syntax errors report the line number.
SimConfig parse_sim_config(std::string_view text);
SimConfig load_sim_config(const std::filesystem::path& path);

/// SHA-256 of the canonical JSON form of the config.
std::string config_digest(const SimConfig& cfg);

nlohmann::json to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const nlohmann::json& j);
FitConfig load_fit_config(const std::filesystem::path& path);

// --- dataset directory -----------------------------------------------------------

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string rng_algorithm;
  std::int64_t n_students = 0;
  std::int64_t n_items = 0;
  std::int64_t n_attempts = 0;
  std::vector<std::string> notes;
  nlohmann::json config;  // null when the dataset did not come from the simulator
};

DatasetManifest make_manifest(const Dataset& d, const SimConfig& cfg);

std::string students_csv(const Dataset& d);
std::string items_csv(const Dataset& d);
std::string attempts_csv(const Dataset& d);

/// Writes students.csv, items.csv, attempts.csv and manifest.json into `dir`
/// (created if needed).
void write_dataset(const std::filesystem::path& dir, const Dataset& d,
                   const DatasetManifest& manifest);
/// Throws DataError on missing files, malformed rows or a format version mismatch.
Dataset read_dataset(const std::filesystem::path& dir, DatasetManifest* manifest = nullptr);

// --- fitted models -----------------------------------------------------------------

nlohmann::json to_json(const FittedModel& m);
FittedModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const FittedModel& m);
FittedModel load_model(const std::filesystem::path& path);
/// "iter,nll" rows.
std::string trace_csv(const TrainingTrace& t);

}  // namespace zilm
