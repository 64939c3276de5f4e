#pragma once

// Activity-driven generator of synthetic SPDT networks.
//
// Each node activates a Poisson number of times per day. An activation lasts
// a geometric number of one-minute quanta and draws its neighbor count from a
// truncated discrete power law whose exponent is fixed per node. Neighbors are
// distinct nodes chosen uniformly; each joins after a geometric delay and
// stays for a geometric duration, truncated at host end + indirect window.

#include <cstdint>
#include <string_view>

#include "spdt/contact_network.hpp"

namespace spdt {

inline constexpr Seconds kTimeQuantum = 60;

// Where per-node heterogeneity acts.
//   degree      only the per-activation neighbor count law differs by node;
//               activation counts and neighbor choice are uniform.
//   propensity  a node's propensity is its expected neighbor count relative
//               to the population mean. It also scales the node's activation
//               rate and the probability of being picked as a neighbor.
enum class Heterogeneity : std::uint8_t { Degree, Propensity };

std::string_view to_string(Heterogeneity h);
Heterogeneity parse_heterogeneity(std::string_view text);  // throws ConfigError

struct GdtParams {
  std::uint32_t n_nodes = 10000;
  std::uint32_t n_days = 42;
  double active_period_mean = 1800.0;  // seconds
  double activation_rate = 3.0;        // activations per node per day
  double exponent_low = 2.0;
  double exponent_high = 3.0;
  std::uint32_t degree_min = 1;
  std::uint32_t degree_cap = 120;
  double join_delay_mean = 900.0;      // seconds
  double stay_mean = 1800.0;           // seconds
  Seconds indirect_window = 3600;      // neighbor presence ends by host end + this
  Heterogeneity heterogeneity = Heterogeneity::Degree;

  void validate() const;  // throws ConfigError; n_nodes < 2 throws DomainError
};

// Per-node truncated power law on [degree_min, degree_cap], P(k) ~ k^-exponent.
// k = 0 (allowed when degree_min = 0) carries weight 1.
class PowerLawDegree {
 public:
  PowerLawDegree(double exponent, std::uint32_t k_min, std::uint32_t k_max);

  template <class Gen>
  std::uint32_t sample(Gen& g) const;

  double exponent() const { return exponent_; }
  double mean() const;
  double probability(std::uint32_t k) const;

 private:
  double weight(std::uint32_t k) const;

  double exponent_;
  std::uint32_t k_min_, k_max_;
  double total_;
};

// Node exponents, drawn once per node from the master seed.
double node_exponent(const GdtParams& params, std::uint64_t seed, NodeId node);

ContactNetwork generate_gdt(const GdtParams& params, std::uint64_t seed);

}  // namespace spdt

#include "spdt/random.hpp"

namespace spdt {

template <class Gen>
std::uint32_t PowerLawDegree::sample(Gen& g) const {
  // Inverse CDF by forward scan; most mass sits at small k.
  const double target = uniform01(g) * total_;
  double acc = 0.0;
  for (std::uint32_t k = k_min_; k < k_max_; ++k) {
    acc += weight(k);
    if (target < acc) return k;
  }
  return k_max_;
}

}  // namespace spdt
