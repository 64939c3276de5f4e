#include "spdt/synthetic_network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "spdt/errors.hpp"

namespace spdt {

std::string_view to_string(Heterogeneity h) { return h == Heterogeneity::Degree ? "degree" : "propensity"; }

Heterogeneity parse_heterogeneity(std::string_view text) {
  if (text == "degree") return Heterogeneity::Degree;
  if (text == "propensity") return Heterogeneity::Propensity;
  throw ConfigError("unknown heterogeneity '" + std::string(text) + "'");
}

void GdtParams::validate() const {
  if (n_nodes < 2) throw DomainError("synthetic network needs at least 2 nodes");
  if (!(active_period_mean > 0) || !(join_delay_mean > 0) || !(stay_mean > 0))
    throw ConfigError("GDT means must be positive");
  if (!(activation_rate >= 0) || !std::isfinite(activation_rate)) throw ConfigError("activation_rate must be >= 0");
  if (!(exponent_low > 1.5) || !(exponent_high <= 4.0) || exponent_low > exponent_high)
    throw ConfigError("degree exponent range must lie within (1.5, 4.0]");
  if (degree_cap < degree_min) throw ConfigError("degree_cap must be >= degree_min");
  if (indirect_window < 0) throw ConfigError("indirect_window must be >= 0");
}

PowerLawDegree::PowerLawDegree(double exponent, std::uint32_t k_min, std::uint32_t k_max)
    : exponent_(exponent), k_min_(k_min), k_max_(k_max), total_(0.0) {
  for (std::uint32_t k = k_min_; k <= k_max_; ++k) total_ += weight(k);
}

double PowerLawDegree::weight(std::uint32_t k) const {
  return k == 0 ? 1.0 : std::pow(static_cast<double>(k), -exponent_);
}

double PowerLawDegree::probability(std::uint32_t k) const {
  if (k < k_min_ || k > k_max_) return 0.0;
  return weight(k) / total_;
}

double PowerLawDegree::mean() const {
  double m = 0.0;
  for (std::uint32_t k = k_min_; k <= k_max_; ++k) m += k * weight(k);
  return m / total_;
}

double node_exponent(const GdtParams& params, std::uint64_t seed, NodeId node) {
  Stream rng(seed, {0xe4b0, node});
  return uniform_real(rng, params.exponent_low, params.exponent_high);
}

namespace {

// Geometric number of quanta >= 1 with the given mean in seconds.
Seconds geometric_duration(Stream& rng, double mean_seconds) {
  const double quanta = std::max(1.0, mean_seconds / static_cast<double>(kTimeQuantum));
  return kTimeQuantum * static_cast<Seconds>(1 + geometric_failures(rng, 1.0 / quanta));
}

// Geometric delay >= 0 quanta with the given mean in seconds.
Seconds geometric_delay(Stream& rng, double mean_seconds) {
  const double quanta = mean_seconds / static_cast<double>(kTimeQuantum);
  return kTimeQuantum * static_cast<Seconds>(geometric_failures(rng, 1.0 / (1.0 + quanta)));
}

// k distinct nodes from [0, n) \ {excluded}, Floyd's algorithm.
std::vector<NodeId> sample_others(Stream& rng, std::uint32_t n, NodeId excluded, std::uint32_t k) {
  const std::uint32_t pool = n - 1;
  k = std::min(k, pool);
  std::vector<NodeId> chosen;
  chosen.reserve(k);
  std::unordered_set<NodeId> seen;
  for (std::uint32_t j = pool - k; j < pool; ++j) {
    const auto t = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(j) + 1));
    const NodeId pick = seen.count(t) ? j : t;
    seen.insert(pick);
    chosen.push_back(pick);
  }
  for (NodeId& v : chosen)
    if (v >= excluded) ++v;
  return chosen;
}

// k distinct nodes other than `excluded`, drawn with probability proportional
// to weight by rejection of repeats. `cumulative` holds prefix sums.
std::vector<NodeId> sample_weighted(Stream& rng, const std::vector<double>& cumulative, NodeId excluded,
                                   std::uint32_t k) {
  const auto n = static_cast<std::uint32_t>(cumulative.size());
  k = std::min(k, n - 1);
  std::vector<NodeId> chosen;
  chosen.reserve(k);
  while (chosen.size() < k) {
    const double x = uniform01(rng) * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    const auto v = static_cast<NodeId>(std::min<std::ptrdiff_t>(it - cumulative.begin(), n - 1));
    if (v == excluded || std::find(chosen.begin(), chosen.end(), v) != chosen.end()) continue;
    chosen.push_back(v);
  }
  return chosen;
}

}  // namespace

ContactNetwork generate_gdt(const GdtParams& params, std::uint64_t seed) {
  params.validate();
  std::vector<SpdtLink> links;
  const std::uint32_t cap = std::min(params.degree_cap, params.n_nodes - 1);
  const std::uint32_t k_min = std::min(params.degree_min, cap);

  std::vector<PowerLawDegree> degrees;
  degrees.reserve(params.n_nodes);
  for (NodeId u = 0; u < params.n_nodes; ++u) degrees.emplace_back(node_exponent(params, seed, u), k_min, cap);
  std::vector<double> rates(params.n_nodes, params.activation_rate);
  std::vector<double> cumulative;
  if (params.heterogeneity == Heterogeneity::Propensity) {
    double acc = 0.0;
    for (const auto& d : degrees) cumulative.push_back(acc += std::max(d.mean(), 1e-9));
    const double mean = acc / params.n_nodes;
    for (NodeId u = 0; u < params.n_nodes; ++u) rates[u] *= std::max(degrees[u].mean(), 1e-9) / mean;
  }

  for (NodeId u = 0; u < params.n_nodes; ++u) {
    const PowerLawDegree& degree = degrees[u];
    for (std::uint32_t day = 0; day < params.n_days; ++day) {
      Stream rng(seed, {u, day});
      std::uint32_t count = 0;
      if (rates[u] > 0) count = std::poisson_distribution<std::uint32_t>(rates[u])(rng);
      for (std::uint32_t a = 0; a < count; ++a) {
        const Seconds start = static_cast<Seconds>(day) * kDaySeconds +
                              kTimeQuantum * static_cast<Seconds>(uniform_index(rng, kDaySeconds / kTimeQuantum));
        const Seconds end = start + geometric_duration(rng, params.active_period_mean);
        const Seconds cutoff = end + params.indirect_window;
        const std::uint64_t tag = (static_cast<std::uint64_t>(u) << 24) ^ (static_cast<std::uint64_t>(day) << 12) ^ a;
        const std::uint32_t k = degree.sample(rng);
        const auto neighbors = cumulative.empty() ? sample_others(rng, params.n_nodes, u, k)
                                                  : sample_weighted(rng, cumulative, u, k);
        for (NodeId v : neighbors) {
          const Seconds join = start + geometric_delay(rng, params.join_delay_mean);
          const Seconds leave = join + geometric_duration(rng, params.stay_mean);
          if (join >= cutoff) continue;
          links.push_back({u, v, start, end, join, std::min(leave, cutoff), tag});
        }
      }
    }
  }
  return ContactNetwork(params.n_nodes, params.n_days, Provenance::Synthetic, std::move(links));
}

}  // namespace spdt
