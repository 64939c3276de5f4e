#pragma once

// Configuration files, hashing, run manifests and replicate records.
//
// A config file is one JSON object with "schema_version": 1. Every section
// is optional; omitted keys take their defaults, unknown keys are rejected.
//
//   {
//     "schema_version": 1,
//     "seed": 7,
//     "network": {"file": "net.spdtb"},          // or omit to generate
//     "generate": { GdtParams fields },
//     "ingest": { IngestionParams fields, "densify_days": 0 },
//     "disease": { DiseaseParams fields },
//     "ranking": { RankingParams fields },
//     "experiment": { ExperimentConfig fields }
//   }

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spdt/experiment.hpp"
#include "spdt/synthetic_network.hpp"
#include "spdt/trace_ingestion.hpp"

namespace spdt {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

struct ToolConfig {
  std::uint64_t seed = 1;
  std::optional<std::string> network_file;
  GdtParams gdt;
  IngestionParams ingestion;
  std::uint32_t densify_days = 0;  // 0 = no densification
  ExperimentConfig experiment;     // seed, disease and ranking live here too
};

// Strict parse. Throws ConfigError naming the offending key.
ToolConfig parse_config(const nlohmann::json& doc);
ToolConfig load_config(const std::filesystem::path& path);

// Effective configuration with every default spelled out.
nlohmann::json to_json(const ToolConfig& config);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
// Hex digest of a file's bytes. Throws DataError when unreadable.
std::string file_digest(const std::filesystem::path& path);

// Hash of the canonical effective config plus any input digests. Thread
// count is not part of the config, so it never changes the hash.
std::string config_hash(const ToolConfig& config,
                        const std::vector<std::pair<std::string, std::string>>& input_digests = {});

nlohmann::json to_json(const OutbreakRecord& rec);
OutbreakRecord record_from_json(const nlohmann::json& j);

struct JournalEntry {
  std::string config_hash;
  std::string point;
  std::uint32_t replicate = 0;
  OutbreakRecord record;
};

std::string journal_line(const std::string& config_hash, const std::string& point, std::uint32_t replicate,
                         const OutbreakRecord& rec);
// std::nullopt for a malformed line.
std::optional<JournalEntry> parse_journal_line(std::string_view line);

class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void set_config(const std::string& hash, std::uint64_t seed, const nlohmann::json& effective);
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void add_note(const std::string& key, nlohmann::json value);

  // Starts / stops the named phase timer.
  void begin_phase(const std::string& name);
  void end_phase();

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  using Clock = std::chrono::steady_clock;
  std::string command_;
  std::vector<std::string> argv_;
  std::string hash_;
  std::uint64_t seed_ = 0;
  nlohmann::json config_ = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs_, outputs_;
  nlohmann::json notes_ = nlohmann::json::object();
  std::vector<std::pair<std::string, double>> phases_;
  std::optional<std::pair<std::string, Clock::time_point>> open_phase_;
  Clock::time_point started_ = Clock::now();
};

}  // namespace spdt
