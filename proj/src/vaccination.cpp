#include "spdt/vaccination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <tuple>

#include "spdt/errors.hpp"
#include "spdt/random.hpp"

namespace spdt {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::RV:
      return "RV";
    case Strategy::AV:
      return "AV";
    case Strategy::DV:
      return "DV";
    case Strategy::IMV:
      return "IMV";
    case Strategy::IMVE:
      return "IMVE";
    case Strategy::IMVT:
      return "IMVT";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  for (Strategy s : {Strategy::RV, Strategy::AV, Strategy::DV, Strategy::IMV, Strategy::IMVE, Strategy::IMVT})
    if (to_string(s) == text) return s;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

LocationClassTable LocationClassTable::standard(std::uint32_t class6_cap) {
  if (class6_cap < 101) throw ConfigError("class-6 cap must be at least 101");
  LocationClassTable t;
  t.ranges_ = {{{1, 5}, {6, 15}, {16, 25}, {26, 50}, {51, 100}, {101, class6_cap}}};
  return t;
}

std::optional<std::size_t> LocationClassTable::class_of(std::uint32_t degree) const {
  if (degree == 0) return std::nullopt;
  for (std::size_t i = 0; i < kLocationClasses; ++i)
    if (degree <= ranges_[i].high) return i;
  return kLocationClasses - 1;
}

std::vector<VisitProfile> build_visit_profiles(const ContactNetwork& net, DayRange window, KindSet kinds,
                                               const LocationClassTable& table) {
  if (window.first > window.last || window.last > net.n_days()) throw DomainError("window outside network");
  struct Entry {
    NodeId host;
    bool has_tag;
    std::uint64_t tag;
    Seconds start, end;
    NodeId neighbor;
    bool counted;
  };
  std::vector<Entry> entries;
  for (std::uint32_t d = window.first; d < window.last; ++d) {
    for (const SpdtLink& l : net.links_on(d)) {
      entries.push_back({l.host, l.location_tag.has_value(), l.location_tag.value_or(0), l.host_start, l.host_end,
                         l.neighbor, kinds.contains(classify_link(l))});
    }
  }
  const auto visit_key = [](const Entry& e) { return std::tie(e.host, e.has_tag, e.tag, e.start, e.end); };
  std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
    return std::tie(a.host, a.has_tag, a.tag, a.start, a.end, a.neighbor) <
           std::tie(b.host, b.has_tag, b.tag, b.start, b.end, b.neighbor);
  });

  std::vector<VisitProfile> profiles(net.n_nodes());
  for (NodeId v = 0; v < net.n_nodes(); ++v) profiles[v].node = v;
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    std::uint32_t degree = 0;
    NodeId last = std::numeric_limits<NodeId>::max();
    for (; j < entries.size() && visit_key(entries[j]) == visit_key(entries[i]); ++j) {
      if (entries[j].counted && entries[j].neighbor != last) {
        ++degree;
        last = entries[j].neighbor;
      }
    }
    if (const auto cls = table.class_of(degree)) {
      VisitProfile& p = profiles[entries[i].host];
      ++p.frequency[*cls];
      p.visit_degrees.push_back(degree);
      p.visit_stays.push_back(entries[i].end - entries[i].start);
    }
    i = j;
  }
  return profiles;
}

void RankingParams::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (!(beta0 > 0.0)) throw ConfigError("beta0 must be positive");
  if (enforce_beta0_bound && 1.6 * beta0 > 1.0) throw ConfigError("1.6 * beta0 must not exceed 1");
  if (!(t0 > 0.0)) throw ConfigError("t0 must be positive");
  if (window.first > window.last) throw ConfigError("observation window is reversed");
  if (class6_cap < 101) throw ConfigError("class-6 cap must be at least 101");
}

namespace {

double visit_potential(double beta, std::uint32_t degree) {
  return -std::expm1(static_cast<double>(degree) * std::log1p(-beta));
}

}  // namespace

double class_potential(double beta, std::size_t class_index, const LocationClassTable& table) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
  if (class_index >= kLocationClasses) throw DomainError("class index out of range");
  const auto& r = table.range(class_index);
  return 0.5 * (visit_potential(beta, r.low) + visit_potential(beta, r.high));
}

double imv_rank(const VisitProfile& profile, const RankingParams& params) {
  const auto table = LocationClassTable::standard(params.class6_cap);
  double w = 0.0;
  for (std::size_t i = 0; i < kLocationClasses; ++i)
    if (profile.frequency[i] != 0) w += profile.frequency[i] * class_potential(params.beta, i, table);
  return w;
}

double imve_rank(const VisitProfile& profile, const RankingParams& params) {
  if (!(params.beta > 0.0 && params.beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
  double w = 0.0;
  for (std::uint32_t d : profile.visit_degrees) w += visit_potential(params.beta, d);
  return w;
}

double imvt_beta(Seconds stay, const RankingParams& params) {
  return 1.6 * params.beta0 * -std::expm1(-static_cast<double>(stay) / params.t0);
}

double imvt_rank(const VisitProfile& profile, const RankingParams& params) {
  if (profile.visit_stays.size() != profile.visit_degrees.size())
    throw DomainError("visit stays and degrees are not aligned");
  double w = 0.0;
  for (std::size_t i = 0; i < profile.visit_degrees.size(); ++i) {
    const double b = imvt_beta(profile.visit_stays[i], params);
    if (b >= 1.0) throw DomainError("stay-time transmission probability reached 1; lower beta0");
    if (b > 0.0) w += visit_potential(b, profile.visit_degrees[i]);
  }
  return w;
}

std::vector<double> av_rank(const ContactNetwork& net, DayRange window, KindSet kinds, std::uint64_t seed,
                            const std::vector<NodeId>* observed) {
  const AdjacencySnapshot adj(net, window, kinds);
  std::vector<double> named(net.n_nodes(), 0.0);
  std::vector<bool> in_sample;
  if (observed != nullptr) {
    in_sample.assign(net.n_nodes(), false);
    for (NodeId v : *observed) in_sample.at(v) = true;
  }
  std::vector<NodeId> pool;
  for (NodeId v : adj.active_nodes()) {
    if (observed != nullptr && !in_sample[v]) continue;
    pool.clear();
    for (NodeId w : adj.neighbors(v))
      if (observed == nullptr || in_sample[w]) pool.push_back(w);
    if (pool.empty()) continue;
    Stream rng(seed, {0xa7, v});
    named[pool[uniform_index(rng, pool.size())]] += 1.0;
  }
  return named;
}

std::vector<double> dv_rank(const ContactNetwork& net, DayRange window, KindSet kinds) {
  const AdjacencySnapshot adj(net, window, kinds);
  std::vector<double> out(net.n_nodes());
  for (NodeId v = 0; v < net.n_nodes(); ++v) out[v] = static_cast<double>(adj.degree(v));
  return out;
}

std::vector<NodeId> sample_observed(std::span<const NodeId> active, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw DomainError("F must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(active.size())));
  std::vector<NodeId> pool(active.begin(), active.end());
  Stream rng(seed, {0x0b5});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

ScoreTable compute_scores(const ContactNetwork& net, Strategy strategy, const RankingParams& params, double fraction,
                          std::uint64_t seed) {
  params.validate();
  ScoreTable table{strategy, {}};
  if (strategy == Strategy::RV) {
    table.scores.reserve(net.n_nodes());
    for (NodeId v = 0; v < net.n_nodes(); ++v) {
      Stream rng(seed, {0x5c, v});
      table.scores.push_back({v, uniform01(rng)});
    }
    return table;
  }

  const auto active = active_nodes(net, params.window);
  const auto observed = sample_observed(active, fraction, seed);
  std::vector<double> values;
  switch (strategy) {
    case Strategy::AV:
      values = av_rank(net, params.window, params.kinds, seed, fraction < 1.0 ? &observed : nullptr);
      break;
    case Strategy::DV:
      values = dv_rank(net, params.window, params.kinds);
      break;
    default: {
      const auto profiles = build_visit_profiles(net, params.window, params.visit_kinds,
                                                 LocationClassTable::standard(params.class6_cap));
      values.resize(net.n_nodes());
      for (NodeId v : observed) {
        if (strategy == Strategy::IMV)
          values[v] = imv_rank(profiles[v], params);
        else if (strategy == Strategy::IMVE)
          values[v] = imve_rank(profiles[v], params);
        else
          values[v] = imvt_rank(profiles[v], params);
      }
    }
  }
  table.scores.reserve(observed.size());
  for (NodeId v : observed) table.scores.push_back({v, values[v]});
  return table;
}

namespace {

std::size_t quota_for(double percent, std::uint32_t n_total) {
  if (!(percent >= 0.0 && percent <= 100.0)) throw DomainError("P must lie in [0, 100]");
  // Grid values such as 0.6 are not exact in binary; round away the noise.
  const double raw = percent * static_cast<double>(n_total) / 100.0;
  return static_cast<std::size_t>(std::floor(raw + 1e-9));
}

}  // namespace

Selection select_for_vaccination(const ScoreTable& table, double percent, std::uint32_t n_total,
                                 std::uint64_t seed) {
  Selection sel;
  sel.quota = quota_for(percent, n_total);
  struct Ranked {
    double score;
    std::uint64_t key;
    NodeId node;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(table.scores.size());
  for (const auto& s : table.scores) ranked.push_back({s.score, Stream(seed, {0x71e, s.node})(), s.node});
  const std::size_t take = std::min(sel.quota, ranked.size());
  const auto better = [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.key != b.key) return a.key < b.key;
    return a.node < b.node;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(), better);
  for (std::size_t i = 0; i < take; ++i) sel.nodes.push_back(ranked[i].node);
  std::sort(sel.nodes.begin(), sel.nodes.end());
  sel.shortfall = sel.quota - take;
  return sel;
}

double score_threshold(const ScoreTable& table, double percent, std::uint32_t n_total) {
  const std::size_t k = quota_for(percent, n_total);
  if (k >= table.scores.size()) return -std::numeric_limits<double>::infinity();
  std::vector<double> values;
  values.reserve(table.scores.size());
  for (const auto& s : table.scores) values.push_back(s.score);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end(),
                   std::greater<>());
  return values[k];
}

void write_scores(std::ostream& os, const ScoreTable& table, std::string_view config_hash) {
  os << "node_id,score,strategy,config_hash\n";
  const auto old = os.precision(17);
  for (const auto& s : table.scores)
    os << s.node << ',' << s.score << ',' << to_string(table.strategy) << ',' << config_hash << '\n';
  os.precision(old);
}

}  // namespace spdt
