#pragma once

// Node ranking and vaccine allocation.
//
// Baselines: random (RV), acquaintance naming (AV), contact degree (DV).
// Movement-based: IMV scores a node by how often it visits places of each
// crowd-size class; IMVE uses the exact number of people met per visit;
// IMVT additionally scales the per-contact probability by stay time.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spdt/contact_network.hpp"

namespace spdt {

enum class Strategy : std::uint8_t { RV, AV, DV, IMV, IMVE, IMVT };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);  // throws ConfigError

inline constexpr std::size_t kLocationClasses = 6;

// Crowd-size classes of visited places, by number of people met.
class LocationClassTable {
 public:
  struct Range {
    std::uint32_t low;
    std::uint32_t high;
  };

  // [1,5] [6,15] [16,25] [26,50] [51,100] [101,cap]
  static LocationClassTable standard(std::uint32_t class6_cap = 500);

  const Range& range(std::size_t class_index) const { return ranges_.at(class_index); }
  // Zero-based class for a visit degree; degrees above the cap fall in the
  // top class. std::nullopt for degree 0.
  std::optional<std::size_t> class_of(std::uint32_t degree) const;

 private:
  std::array<Range, kLocationClasses> ranges_{};
};

struct VisitProfile {
  NodeId node = 0;
  std::array<std::uint32_t, kLocationClasses> frequency{};
  std::vector<std::uint32_t> visit_degrees;  // visits with at least one contact
  std::vector<Seconds> visit_stays;          // aligned with visit_degrees
};

// Visits are a node's hosted links grouped by (location tag, host interval).
// A visit's degree counts distinct neighbors whose link kind is in `kinds`.
// Result indexed by NodeId.
std::vector<VisitProfile> build_visit_profiles(const ContactNetwork& net, DayRange window, KindSet kinds,
                                               const LocationClassTable& table = LocationClassTable::standard());

struct RankingParams {
  double beta = 0.1;                 // per-contact probability for IMV / IMVE
  double beta0 = 0.1;                // IMVT probability at stay time t0
  double t0 = 1800.0;                // IMVT reference stay, seconds
  bool enforce_beta0_bound = true;   // require 1.6 beta0 <= 1
  DayRange window{0, 7};             // observation days
  KindSet kinds = KindSet::direct(); // links counted by DV and AV
  KindSet visit_kinds = KindSet::all();  // links defining who was met on a visit (IMV family)
  std::uint32_t class6_cap = 500;

  void validate() const;  // throws ConfigError
};

// Mean of 1-(1-beta)^d over the two endpoints of a class.
double class_potential(double beta, std::size_t class_index,
                       const LocationClassTable& table = LocationClassTable::standard());

// Sum over classes of frequency * class_potential.
double imv_rank(const VisitProfile& profile, const RankingParams& params);
// Sum over visits of 1-(1-beta)^degree.
double imve_rank(const VisitProfile& profile, const RankingParams& params);
// As imve_rank with beta = 1.6 beta0 (1 - exp(-stay/t0)) per visit.
double imvt_rank(const VisitProfile& profile, const RankingParams& params);
double imvt_beta(Seconds stay, const RankingParams& params);

// Each respondent names one uniformly chosen neighbor; score = times named.
// With `observed` set, only observed nodes respond and only observed
// neighbors can be named. Result indexed by NodeId.
std::vector<double> av_rank(const ContactNetwork& net, DayRange window, KindSet kinds, std::uint64_t seed,
                            const std::vector<NodeId>* observed = nullptr);

// Distinct-neighbor degree over the window. Result indexed by NodeId.
std::vector<double> dv_rank(const ContactNetwork& net, DayRange window, KindSet kinds);

// Uniform sample of round(F * |active|) nodes without replacement, ascending.
std::vector<NodeId> sample_observed(std::span<const NodeId> active, double fraction, std::uint64_t seed);

struct RankingScore {
  NodeId node = 0;
  double score = 0.0;
};

struct ScoreTable {
  Strategy strategy = Strategy::RV;
  std::vector<RankingScore> scores;  // ascending node order
};

// Scores every node eligible for vaccination under the strategy: all nodes
// for RV, otherwise the observed sample (fraction F of nodes active in the
// window).
ScoreTable compute_scores(const ContactNetwork& net, Strategy strategy, const RankingParams& params, double fraction,
                          std::uint64_t seed);

struct Selection {
  std::vector<NodeId> nodes;   // ascending
  std::size_t quota = 0;       // floor(P N / 100)
  std::size_t shortfall = 0;   // quota - nodes.size()
};

// The floor(P N_total / 100) best-scored nodes. Ties at the cutoff are broken
// by per-node random keys drawn from `seed`, so for a fixed seed the
// selection for a larger P contains the selection for a smaller P.
// Throws DomainError for P outside [0, 100].
Selection select_for_vaccination(const ScoreTable& table, double percent, std::uint32_t n_total,
                                 std::uint64_t seed);

// Smallest s with |{score > s}| <= P N_total / 100; -infinity when every
// scored node may pass.
double score_threshold(const ScoreTable& table, double percent, std::uint32_t n_total);

// `node_id,score,strategy,config_hash` rows with a header line.
void write_scores(std::ostream& os, const ScoreTable& table, std::string_view config_hash);

}  // namespace spdt
