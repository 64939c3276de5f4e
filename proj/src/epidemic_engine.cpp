#include "spdt/epidemic_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "spdt/errors.hpp"

namespace spdt {

void DiseaseParams::validate() const {
  if (!(generation_rate > 0) || !(pulmonary_rate > 0) || !(volume > 0))
    throw ConfigError("g, p and V must be positive");
  if (!(removal_min_minutes > 0) || !(removal_min_minutes <= removal_median_minutes) ||
      !(removal_median_minutes <= removal_max_minutes))
    throw ConfigError("removal times must satisfy 0 < min <= median <= max");
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ConfigError("sigma must be non-negative");
  if (tau_min < 1 || tau_max < tau_min) throw ConfigError("tau range must satisfy 1 <= min <= max");
  if (!tau_weights.empty()) {
    if (tau_weights.size() != tau_max - tau_min + 1) throw ConfigError("tau_weights needs one entry per day count");
    double total = 0;
    for (double w : tau_weights) {
      if (!(w >= 0)) throw ConfigError("tau_weights must be non-negative");
      total += w;
    }
    if (!(total > 0)) throw ConfigError("tau_weights must not all be zero");
  }
  if (seed_infectious_days < 1) throw ConfigError("seed_infectious_days must be >= 1");
}

double link_exposure(const SpdtLink& link, double r, const DiseaseParams& params) {
  if (!(r > 0)) throw DomainError("removal rate must be positive");
  // Host arrival at 0.
  const double host_end = static_cast<double>(link.host_end - link.host_start);
  const double nbr_start = std::max(0.0, static_cast<double>(link.nbr_start - link.host_start));
  const double nbr_end = std::max(nbr_start, static_cast<double>(link.nbr_end - link.host_start));
  if (nbr_end <= nbr_start) return 0.0;

  // r (t_i - t_s') + e^{r t_l}(e^{-r t_i} - e^{-r t_l'}), with every exponent
  // argument kept non-positive. For direct-only links t_i = t_l' and the
  // exponential pair cancels exactly.
  double emission;
  SpdtLink shifted = link;
  shifted.nbr_start = std::max(link.nbr_start, link.host_start);
  shifted.nbr_end = std::max(link.nbr_end, shifted.nbr_start);
  switch (classify_link(shifted)) {
    case LinkKind::DirectOnly:
      emission = r * (nbr_end - nbr_start);
      break;
    case LinkKind::Mixed:
      emission = r * (host_end - nbr_start) - std::expm1(-r * (nbr_end - host_end));
      break;
    case LinkKind::IndirectOnly:
    default:
      emission = std::exp(-r * (nbr_start - host_end)) * -std::expm1(-r * (nbr_end - nbr_start));
      break;
  }
  // e^{r t_s}(e^{-r t_l'} - e^{-r t_s'}) with t_s = 0.
  const double decay = std::exp(-r * nbr_start) * std::expm1(-r * (nbr_end - nbr_start));
  const double scale = params.generation_rate * params.pulmonary_rate / (params.volume * r * r);
  const double dose = scale * (emission + decay);
  if (!std::isfinite(dose)) {
    std::ostringstream os;
    os << "non-finite exposure for link " << link.host << "->" << link.neighbor << " host[" << link.host_start << ","
       << link.host_end << "] nbr[" << link.nbr_start << "," << link.nbr_end << "] r=" << r;
    throw NumericError(os.str());
  }
  return std::max(0.0, dose);
}

double total_exposure(std::span<const SpdtLink* const> links, std::span<const double> rates,
                      const DiseaseParams& params) {
  if (links.size() != rates.size()) throw DomainError("one removal rate per link required");
  double sum = 0.0;
  for (std::size_t i = 0; i < links.size(); ++i) sum += link_exposure(*links[i], rates[i], params);
  return sum;
}

double infection_probability(double exposure, double sigma) {
  if (!(exposure >= 0) || !std::isfinite(exposure)) throw DomainError("exposure must be finite and >= 0");
  return -std::expm1(-sigma * exposure);
}

EpidemicState::EpidemicState(std::uint32_t n_nodes) : nodes_(n_nodes) { counts_[0] = n_nodes; }

void EpidemicState::set_status(NodeId v, Status s) {
  --counts_[static_cast<std::size_t>(nodes_[v].status)];
  ++counts_[static_cast<std::size_t>(s)];
  nodes_[v].status = s;
}

bool EpidemicState::infect(NodeId v, std::uint32_t days) {
  if (nodes_[v].status != Status::Susceptible) return false;
  set_status(v, Status::Infected);
  nodes_[v].days_remaining = static_cast<std::uint16_t>(days);
  infected_.insert(std::lower_bound(infected_.begin(), infected_.end(), v), v);
  return true;
}

bool EpidemicState::vaccinate(NodeId v) {
  if (nodes_[v].status != Status::Susceptible) return false;
  set_status(v, Status::Vaccinated);
  return true;
}

void EpidemicState::commit_day(std::span<const std::pair<NodeId, std::uint32_t>> fresh) {
  std::vector<NodeId> still;
  still.reserve(infected_.size() + fresh.size());
  for (NodeId v : infected_) {
    if (--nodes_[v].days_remaining == 0)
      set_status(v, Status::Recovered);
    else
      still.push_back(v);
  }
  for (const auto& [v, days] : fresh) {
    if (nodes_[v].status != Status::Susceptible) continue;
    set_status(v, Status::Infected);
    nodes_[v].days_remaining = static_cast<std::uint16_t>(days);
    still.push_back(v);
  }
  std::sort(still.begin(), still.end());
  infected_ = std::move(still);
}

std::vector<NodeId> step_day(EpidemicState& state, const ContactNetwork& net, std::uint32_t day,
                             const DiseaseParams& params, std::uint64_t run_seed, const EngineOptions& options) {
  std::vector<std::pair<NodeId, const SpdtLink*>> received;
  for (NodeId u : state.infected()) {
    for (const SpdtLink& l : net.hosted_by(day, u)) {
      if (state.status(l.neighbor) == Status::Susceptible) received.emplace_back(l.neighbor, &l);
    }
  }
  std::sort(received.begin(), received.end());

  std::vector<std::pair<NodeId, std::uint32_t>> fresh;
  for (std::size_t i = 0; i < received.size();) {
    const NodeId v = received[i].first;
    std::size_t j = i;
    Stream rng(run_seed, {v, day});
    double p;
    if (options.forced_infection_probability) {
      while (j < received.size() && received[j].first == v) ++j;
      p = *options.forced_infection_probability;
    } else {
      double dose = 0.0;
      for (; j < received.size() && received[j].first == v; ++j) {
        const double b = sample_removal_minutes(rng, params);
        dose += link_exposure(*received[j].second, removal_rate(b), params);
      }
      p = infection_probability(dose, params.sigma);
    }
    if (bernoulli(rng, p)) fresh.emplace_back(v, sample_tau(rng, params));
    i = j;
  }
  state.commit_day(fresh);

  std::vector<NodeId> out;
  out.reserve(fresh.size());
  for (const auto& f : fresh) out.push_back(f.first);
  return out;
}

bool HookContext::vaccinate(NodeId v) {
  if (state_.vaccinate(v)) return true;
  ++skipped_;
  return false;
}

OutbreakRecord run(const ContactNetwork& net, std::span<const NodeId> seeds, RunWindow window,
                   const DiseaseParams& params, const VaccinationHook& hook, std::uint64_t run_seed,
                   const EngineOptions& options) {
  if (static_cast<std::uint64_t>(window.first_day) + window.n_days > net.n_days())
    throw DomainError("simulation window extends beyond the network's " + std::to_string(net.n_days()) + " days");
  EpidemicState state(net.n_nodes());
  OutbreakRecord rec;
  rec.rng_seed = run_seed;
  for (NodeId s : seeds) {
    if (s >= net.n_nodes()) throw DomainError("seed node " + std::to_string(s) + " out of range");
    if (state.infect(s, params.seed_infectious_days)) rec.seeds.push_back(s);
  }
  std::sort(rec.seeds.begin(), rec.seeds.end());

  std::vector<NodeId> newly(rec.seeds);
  rec.daily_new_infections.reserve(window.n_days);
  for (std::uint32_t i = 0; i < window.n_days; ++i) {
    const std::uint32_t day = window.first_day + i;
    if (hook) {
      HookContext ctx(state, i, day, newly, run_seed);
      hook(ctx);
      rec.vaccination_skipped += ctx.skipped();
    }
    newly = step_day(state, net, day, params, run_seed, options);
    rec.daily_new_infections.push_back(static_cast<std::uint32_t>(newly.size()));
    rec.final_outbreak_size += newly.size();
    rec.infected.insert(rec.infected.end(), newly.begin(), newly.end());
  }
  std::sort(rec.infected.begin(), rec.infected.end());
  rec.vaccinated_count = state.count(Status::Vaccinated);
  return rec;
}

}  // namespace spdt
