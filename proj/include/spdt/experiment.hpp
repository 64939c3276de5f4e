#pragma once

// Replicated outbreak experiments over a fixed contact network.
//
// Three vaccination timings are supported:
//   preventive     rank on the observation window, vaccinate before the
//                  outbreak starts from a single random seed;
//   post_outbreak  many seeds, vaccinate the selected nodes that are still
//                  susceptible on the vaccination day;
//   ring           from the vaccination day on, vaccinate high-scoring
//                  contacts of identified infected nodes.
//
// Replicate i draws its seeds and transmission randomness from keys derived
// from (master seed, i) only, so every strategy and coverage level sees the
// same outbreak seeds and comparisons are paired.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "spdt/contact_network.hpp"
#include "spdt/epidemic_engine.hpp"
#include "spdt/vaccination.hpp"

namespace spdt {

enum class Mode : std::uint8_t { Preventive, PostOutbreak, Ring };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view text);  // throws ConfigError

// Coverage grids used when none is configured.
std::vector<double> default_percent_grid(Mode mode);
// Ascending candidates for the containment search.
std::vector<double> default_containment_grid();

struct ExperimentConfig {
  Mode mode = Mode::Preventive;
  std::vector<Strategy> strategies{Strategy::RV, Strategy::AV, Strategy::DV, Strategy::IMV};
  std::vector<double> percents;                 // P values; empty = default_percent_grid(mode)
  std::vector<double> fractions{1.0};           // F values
  std::vector<KindSet> kind_sets{KindSet::direct()};  // links counted by AV and DV (and ring contacts)
  std::uint32_t replicates = 500;
  std::uint32_t seed_count = 1;                 // outbreak seeds per replicate
  std::uint32_t start_day = 7;                  // network day of simulated day 0
  std::uint32_t simulation_days = 35;
  std::uint32_t vaccination_day = 7;            // simulated day of vaccination (post_outbreak, ring)
  std::uint64_t containment_threshold = 100;
  bool containment_search = false;
  std::vector<double> containment_percents;     // empty = default_containment_grid()
  // Ring tracing looks at network days [today - back, today + ahead). The
  // default is the past week only.
  std::uint32_t ring_days_back = 7;
  std::uint32_t ring_days_ahead = 0;
  std::uint64_t seed = 1;
  unsigned threads = 0;                         // 0 = hardware concurrency
  DiseaseParams disease;
  RankingParams ranking;

  // Mode-dependent defaults for seed_count, start_day and simulation_days.
  static ExperimentConfig defaults_for(Mode mode);
  // Structural checks against a network. Throws ConfigError.
  void validate(const ContactNetwork& net) const;
  std::vector<double> percent_grid() const;
  std::vector<double> containment_grid() const;
};

// The scores a sweep with this config ranks by. Needs no simulation window.
ScoreTable sweep_scores(const ContactNetwork& net, const ExperimentConfig& config, Strategy strategy, double fraction,
                        KindSet kinds);

// 100 (1 - z / z_r). std::nullopt when the reference outbreak is empty.
std::optional<double> efficiency(double reference_mean, double mean_outbreak);

struct PointKey {
  Strategy strategy = Strategy::RV;
  double percent = 0.0;
  double fraction = 1.0;
  KindSet kinds = KindSet::direct();

  std::string label() const;  // stable text key, e.g. "IMV|0.6|1|direct"
  friend bool operator==(const PointKey&, const PointKey&) = default;
};

struct PointResult {
  PointKey key;
  double mean_outbreak = 0.0;
  std::optional<double> eta;
  std::uint64_t over_threshold = 0;  // replicates with outbreak above the containment threshold
  double mean_vaccinated = 0.0;
  double mean_skipped = 0.0;
  std::vector<OutbreakRecord> records;  // replicate order
};

struct ContainmentResult {
  Strategy strategy = Strategy::RV;
  double fraction = 1.0;
  KindSet kinds = KindSet::direct();
  std::optional<double> min_percent;  // nullopt: not contained anywhere on the grid
};

struct SweepResult {
  double reference_mean = 0.0;
  std::uint64_t reference_over_threshold = 0;
  std::vector<OutbreakRecord> reference_records;
  std::vector<PointResult> points;
  std::vector<ContainmentResult> containment;
};

// Replicate-level checkpoint. Each line is one finished replicate of one
// sweep point. Lines whose config hash differs are ignored on load.
class ResumeJournal {
 public:
  ResumeJournal() = default;
  ResumeJournal(std::filesystem::path path, std::string config_hash);

  std::optional<OutbreakRecord> find(const std::string& point, std::uint32_t replicate) const;
  void append(const std::string& point, std::uint32_t replicate, const OutbreakRecord& rec);
  std::size_t size() const { return entries_.size(); }
  bool active() const { return !path_.empty(); }

 private:
  std::filesystem::path path_;
  std::string hash_;
  std::map<std::pair<std::string, std::uint32_t>, OutbreakRecord> entries_;
  mutable std::mutex mu_;
};

class Experiment {
 public:
  Experiment(const ContactNetwork& net, ExperimentConfig config, ResumeJournal* journal = nullptr);

  const ExperimentConfig& config() const { return config_; }

  // Seeds of replicate i.
  std::vector<NodeId> replicate_seeds(std::uint32_t replicate) const;
  std::uint64_t replicate_run_seed(std::uint32_t replicate) const;

  // Mean outbreak size without vaccination (cached).
  const std::vector<OutbreakRecord>& reference();
  double reference_mean();

  // One sweep point over all replicates (cached by key).
  const PointResult& evaluate(const PointKey& key);

  // Smallest P on the containment grid with no replicate above the threshold.
  // The grid is scanned in ascending order and stops at the first hit.
  std::optional<double> containment_search(Strategy strategy, double fraction, KindSet kinds);

  // Every configured point, plus containment when enabled.
  SweepResult sweep();

  // Scores used by a strategy (cached per strategy, F and kinds).
  const ScoreTable& scores(Strategy strategy, double fraction, KindSet kinds);

 private:
  std::vector<OutbreakRecord> run_replicates(const std::string& label,
                                             const std::function<VaccinationHook(std::uint32_t)>& make_hook);
  VaccinationHook preventive_hook(const std::vector<NodeId>& selected) const;
  VaccinationHook post_outbreak_hook(const std::vector<NodeId>& selected) const;
  VaccinationHook ring_hook(const PointKey& key);
  RunWindow window() const { return {config_.start_day, config_.simulation_days}; }

  const ContactNetwork& net_;
  ExperimentConfig config_;
  ResumeJournal* journal_;
  std::optional<std::vector<OutbreakRecord>> reference_;
  std::map<std::string, PointResult> points_;
  std::map<std::string, ScoreTable> scores_;
  std::map<std::string, std::vector<double>> ring_scores_;
};

// `strategy,P,F,kinds,mean_outbreak,eta,over_threshold_count,mean_vaccinated,n_replicates,config_hash`.
// The first data row is the unvaccinated reference with strategy "none".
void write_sweep_csv(std::ostream& os, const SweepResult& result, std::uint32_t replicates,
                     std::string_view config_hash);
// `strategy,F,kinds,threshold,min_P,config_hash`; min_P is empty when not contained.
void write_containment_csv(std::ostream& os, const SweepResult& result, std::uint64_t threshold,
                           std::string_view config_hash);
// One JSON object per replicate: reference first, then points in sweep order.
void write_replicates_jsonl(std::ostream& os, const SweepResult& result, std::string_view config_hash);

// Formats a double for CSV output: shortest form that round-trips.
std::string format_number(double x);

}  // namespace spdt
