#pragma once

// SIR spread over SPDT links with an airborne particle-exposure dose model.
//
// A host emits particles at rate g into a volume V while present; particles
// are removed at rate r. A neighbor inhales at rate p while present, so the
// dose of one link is p times the integral of the concentration over the
// neighbor's presence. Doses from all of a day's links add up and the
// infection probability is 1 - exp(-sigma * dose).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "spdt/contact_network.hpp"
#include "spdt/random.hpp"

namespace spdt {

struct DiseaseParams {
  double generation_rate = 0.304;       // g, PFU/s
  double pulmonary_rate = 7.5e-3 / 60;  // p, m^3/s (7.5 L/min)
  double volume = 2512.0;               // V, m^3
  double removal_min_minutes = 7.5;
  double removal_max_minutes = 300.0;
  // Removal times are drawn uniformly below and above the median with equal
  // mass. The default median is the midpoint, i.e. plain uniform.
  double removal_median_minutes = 153.75;
  double sigma = 0.33;                  // per-PFU infectiousness
  std::uint32_t tau_min = 3;            // infectious days, inclusive range
  std::uint32_t tau_max = 5;
  std::vector<double> tau_weights;      // optional, one per day count in [tau_min, tau_max]
  std::uint32_t seed_infectious_days = 5;

  void validate() const;  // throws ConfigError
};

// Per-second removal rate for a removal time in minutes: r = 1 / (60 b).
inline double removal_rate(double removal_minutes) { return 1.0 / (60.0 * removal_minutes); }

template <class Gen>
double sample_removal_minutes(Gen& g, const DiseaseParams& p) {
  const double u = uniform01(g);
  if (u < 0.5) return p.removal_min_minutes + (p.removal_median_minutes - p.removal_min_minutes) * (2.0 * u);
  return p.removal_median_minutes + (p.removal_max_minutes - p.removal_median_minutes) * (2.0 * u - 1.0);
}

template <class Gen>
std::uint32_t sample_tau(Gen& g, const DiseaseParams& p) {
  const std::uint32_t span = p.tau_max - p.tau_min + 1;
  if (p.tau_weights.empty()) return p.tau_min + static_cast<std::uint32_t>(uniform_index(g, span));
  double total = 0.0;
  for (double w : p.tau_weights) total += w;
  double target = uniform01(g) * total;
  for (std::uint32_t i = 0; i + 1 < span; ++i) {
    target -= p.tau_weights[i];
    if (target < 0.0) return p.tau_min + i;
  }
  return p.tau_max;
}

// Dose (PFU) received over one link for removal rate r (1/s). Times are
// shifted to the host arrival before exponentiation. Presence of the
// neighbor before the host arrives receives no dose. Throws NumericError on a
// non-finite result.
double link_exposure(const SpdtLink& link, double r, const DiseaseParams& params);

// Sum of link_exposure over links with matching per-link removal rates.
double total_exposure(std::span<const SpdtLink* const> links, std::span<const double> rates,
                      const DiseaseParams& params);

// 1 - exp(-sigma E). Throws DomainError for negative or non-finite E.
double infection_probability(double exposure, double sigma);

enum class Status : std::uint8_t { Susceptible, Infected, Recovered, Vaccinated };

struct NodeState {
  Status status = Status::Susceptible;
  std::uint16_t days_remaining = 0;
};

class EpidemicState {
 public:
  explicit EpidemicState(std::uint32_t n_nodes);

  std::uint32_t size() const { return static_cast<std::uint32_t>(nodes_.size()); }
  const NodeState& operator[](NodeId v) const { return nodes_[v]; }
  Status status(NodeId v) const { return nodes_[v].status; }

  // Currently infected nodes, ascending.
  const std::vector<NodeId>& infected() const { return infected_; }

  std::size_t count(Status s) const { return counts_[static_cast<std::size_t>(s)]; }

  // Susceptible -> Infected(days). Returns false for any other status.
  bool infect(NodeId v, std::uint32_t days);
  // Susceptible -> Vaccinated. Returns false for any other status.
  bool vaccinate(NodeId v);

  // Day-end barrier: decrements infectious counters, recovers at zero, then
  // commits `fresh` infections with their infectious periods.
  void commit_day(std::span<const std::pair<NodeId, std::uint32_t>> fresh);

 private:
  void set_status(NodeId v, Status s);

  std::vector<NodeState> nodes_;
  std::vector<NodeId> infected_;
  std::size_t counts_[4] = {0, 0, 0, 0};
};

struct EngineOptions {
  // Replaces the dose-response probability for any susceptible that receives
  // at least one link from an infected host. Used for reachability checks.
  std::optional<double> forced_infection_probability;
};

// Advances one day. Randomness for node v on `day` comes from the stream
// keyed (run_seed, v, day), so results do not depend on iteration order.
// Returns newly infected nodes (ascending); they become infectious next day.
std::vector<NodeId> step_day(EpidemicState& state, const ContactNetwork& net, std::uint32_t day,
                             const DiseaseParams& params, std::uint64_t run_seed, const EngineOptions& options = {});

// Handed to the vaccination hook before each day's transmissions.
class HookContext {
 public:
  HookContext(EpidemicState& state, std::uint32_t sim_day, std::uint32_t net_day,
              std::span<const NodeId> newly_infected, std::uint64_t run_seed)
      : state_(state), sim_day_(sim_day), net_day_(net_day), newly_infected_(newly_infected), run_seed_(run_seed) {}

  std::uint32_t sim_day() const { return sim_day_; }  // 0 = first simulated day
  std::uint32_t net_day() const { return net_day_; }  // network day index
  // Infections committed at the previous barrier (the seeds on day 0).
  std::span<const NodeId> newly_infected() const { return newly_infected_; }
  const EpidemicState& state() const { return state_; }
  std::uint64_t run_seed() const { return run_seed_; }

  // Vaccinates v if still susceptible; otherwise counts a skip.
  bool vaccinate(NodeId v);
  std::size_t skipped() const { return skipped_; }

 private:
  EpidemicState& state_;
  std::uint32_t sim_day_, net_day_;
  std::span<const NodeId> newly_infected_;
  std::uint64_t run_seed_;
  std::size_t skipped_ = 0;
};

using VaccinationHook = std::function<void(HookContext&)>;

struct OutbreakRecord {
  std::vector<NodeId> seeds;
  std::vector<std::uint32_t> daily_new_infections;
  std::uint64_t final_outbreak_size = 0;  // excludes seeds
  std::uint64_t vaccinated_count = 0;
  std::uint64_t vaccination_skipped = 0;  // selections that were no longer susceptible
  std::uint64_t rng_seed = 0;
  std::vector<NodeId> infected;           // new infections, ascending; not serialized
};

struct RunWindow {
  std::uint32_t first_day = 0;  // network day of simulated day 0
  std::uint32_t n_days = 0;
};

// Seeds start Infected(seed_infectious_days). Each day: hook, transmissions,
// barrier. Throws DomainError for seeds out of range or a window beyond the
// network.
OutbreakRecord run(const ContactNetwork& net, std::span<const NodeId> seeds, RunWindow window,
                   const DiseaseParams& params, const VaccinationHook& hook, std::uint64_t run_seed,
                   const EngineOptions& options = {});

}  // namespace spdt
