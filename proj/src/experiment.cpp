#include "spdt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstring>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

#include "spdt/config.hpp"
#include "spdt/errors.hpp"
#include "spdt/random.hpp"

namespace spdt {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Preventive:
      return "preventive";
    case Mode::PostOutbreak:
      return "post_outbreak";
    case Mode::Ring:
      return "ring";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : {Mode::Preventive, Mode::PostOutbreak, Mode::Ring})
    if (to_string(m) == text) return m;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

namespace {

// i / divisor for i = first, first + step, ..., last. Dividing keeps 0.6 the
// nearest double to 0.6.
std::vector<double> steps(int first, int last, int step, double divisor) {
  std::vector<double> out;
  for (int i = first; i <= last; i += step) out.push_back(i / divisor);
  return out;
}

std::uint64_t double_bits(double x) {
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof x);
  std::memcpy(&bits, &x, sizeof x);
  return bits;
}

}  // namespace

std::vector<double> default_percent_grid(Mode mode) {
  switch (mode) {
    case Mode::Preventive:
      return steps(2, 20, 2, 10.0);
    case Mode::PostOutbreak:
      return steps(1, 6, 1, 1.0);
    case Mode::Ring:
      return steps(0, 25, 5, 1.0);
  }
  return {};
}

std::vector<double> default_containment_grid() {
  std::vector<double> grid{0.0};
  for (double p : steps(2, 20, 2, 10.0)) grid.push_back(p);
  for (double p : steps(1, 6, 1, 1.0)) grid.push_back(p);
  for (double p : steps(0, 25, 5, 1.0)) grid.push_back(p);
  for (double p : steps(10, 100, 10, 1.0)) grid.push_back(p);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
             grid.end());
  return grid;
}

ExperimentConfig ExperimentConfig::defaults_for(Mode mode) {
  ExperimentConfig c;
  c.mode = mode;
  if (mode != Mode::Preventive) {
    c.seed_count = 500;
    c.start_day = 0;
    c.simulation_days = 42;
  }
  return c;
}

std::vector<double> ExperimentConfig::percent_grid() const {
  return percents.empty() ? default_percent_grid(mode) : percents;
}

std::vector<double> ExperimentConfig::containment_grid() const {
  std::vector<double> grid = containment_percents.empty() ? default_containment_grid() : containment_percents;
  std::sort(grid.begin(), grid.end());
  return grid;
}

void ExperimentConfig::validate(const ContactNetwork& net) const {
  disease.validate();
  ranking.validate();
  if (strategies.empty()) throw ConfigError("no strategies configured");
  if (fractions.empty()) throw ConfigError("no F values configured");
  if (kind_sets.empty()) throw ConfigError("no link kind sets configured");
  for (double p : percent_grid())
    if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("P grid values must lie in [0, 100]");
  for (double p : containment_grid())
    if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("containment grid values must lie in [0, 100]");
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("F values must lie in [0, 1]");
  for (KindSet k : kind_sets)
    if (k.empty()) throw ConfigError("empty link kind set");
  if (replicates == 0) throw ConfigError("replicates must be >= 1");
  if (seed_count == 0 || seed_count > net.n_nodes())
    throw ConfigError("seed_count must lie in [1, " + std::to_string(net.n_nodes()) + "]");
  if (simulation_days < vaccination_day) throw ConfigError("simulation_days must be >= vaccination_day");
  if (static_cast<std::uint64_t>(start_day) + simulation_days > net.n_days())
    throw ConfigError("simulation window [" + std::to_string(start_day) + ", " +
                      std::to_string(start_day + simulation_days) + ") exceeds the network's " +
                      std::to_string(net.n_days()) + " days");
  if (ranking.window.last > net.n_days()) throw ConfigError("ranking window exceeds the network");
}

std::optional<double> efficiency(double reference_mean, double mean_outbreak) {
  if (!(reference_mean > 0.0)) return std::nullopt;
  return (reference_mean - mean_outbreak) / reference_mean * 100.0;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string PointKey::label() const {
  return std::string(to_string(strategy)) + "|" + format_number(percent) + "|" + format_number(fraction) + "|" +
         kinds.name();
}

ResumeJournal::ResumeJournal(std::filesystem::path path, std::string config_hash)
    : path_(std::move(path)), hash_(std::move(config_hash)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A torn final line from an interrupted run is ignored.
    const auto entry = parse_journal_line(line);
    if (!entry || entry->config_hash != hash_) continue;
    entries_[{entry->point, entry->replicate}] = entry->record;
  }
}

std::optional<OutbreakRecord> ResumeJournal::find(const std::string& point, std::uint32_t replicate) const {
  std::lock_guard lock(mu_);
  const auto it = entries_.find({point, replicate});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResumeJournal::append(const std::string& point, std::uint32_t replicate, const OutbreakRecord& rec) {
  const std::string line = journal_line(hash_, point, replicate, rec);
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw DataError("cannot write resume journal " + path_.string());
  entries_[{point, replicate}] = rec;
}

Experiment::Experiment(const ContactNetwork& net, ExperimentConfig config, ResumeJournal* journal)
    : net_(net), config_(std::move(config)), journal_(journal) {
  config_.validate(net_);
}

std::vector<NodeId> Experiment::replicate_seeds(std::uint32_t replicate) const {
  Stream rng(config_.seed, {0x5eed, replicate});
  const std::uint32_t n = net_.n_nodes();
  const std::uint32_t k = config_.seed_count;
  // Floyd's sampling: k distinct nodes in O(k log k).
  std::vector<NodeId> chosen;
  chosen.reserve(k);
  for (std::uint32_t j = n - k; j < n; ++j) {
    const auto t = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(j) + 1));
    const auto it = std::lower_bound(chosen.begin(), chosen.end(), t);
    const NodeId pick = (it != chosen.end() && *it == t) ? j : t;
    chosen.insert(std::lower_bound(chosen.begin(), chosen.end(), pick), pick);
  }
  return chosen;
}

std::uint64_t Experiment::replicate_run_seed(std::uint32_t replicate) const {
  return derive_key(config_.seed, {0x2a1, replicate});
}

std::vector<OutbreakRecord> Experiment::run_replicates(
    const std::string& label, const std::function<VaccinationHook(std::uint32_t)>& make_hook) {
  const std::uint32_t n = config_.replicates;
  std::vector<OutbreakRecord> out(n);
  std::atomic<std::uint32_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  const auto worker = [&] {
    for (;;) {
      const std::uint32_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        if (journal_ != nullptr) {
          if (auto rec = journal_->find(label, i)) {
            out[i] = std::move(*rec);
            continue;
          }
        }
        const auto seeds = replicate_seeds(i);
        out[i] = run(net_, seeds, window(), config_.disease, make_hook(i), replicate_run_seed(i));
        if (journal_ != nullptr) journal_->append(label, i, out[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };

  unsigned threads = config_.threads != 0 ? config_.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

const std::vector<OutbreakRecord>& Experiment::reference() {
  if (!reference_) reference_ = run_replicates("reference", [](std::uint32_t) { return VaccinationHook{}; });
  return *reference_;
}

double Experiment::reference_mean() {
  std::uint64_t total = 0;
  for (const auto& r : reference()) total += r.final_outbreak_size;
  return static_cast<double>(total) / config_.replicates;
}

ScoreTable sweep_scores(const ContactNetwork& net, const ExperimentConfig& config, Strategy strategy, double fraction,
                        KindSet kinds) {
  RankingParams params = config.ranking;
  params.kinds = kinds;
  return compute_scores(net, strategy, params, fraction,
                        derive_key(config.seed, {0x7a4c, double_bits(fraction), kinds.bits()}));
}

const ScoreTable& Experiment::scores(Strategy strategy, double fraction, KindSet kinds) {
  const PointKey key{strategy, 0.0, fraction, kinds};
  const std::string label = key.label();
  auto it = scores_.find(label);
  if (it == scores_.end()) it = scores_.emplace(label, sweep_scores(net_, config_, strategy, fraction, kinds)).first;
  return it->second;
}

VaccinationHook Experiment::preventive_hook(const std::vector<NodeId>& selected) const {
  return [&selected](HookContext& ctx) {
    if (ctx.sim_day() != 0) return;
    for (NodeId v : selected) ctx.vaccinate(v);
  };
}

VaccinationHook Experiment::post_outbreak_hook(const std::vector<NodeId>& selected) const {
  const std::uint32_t day = config_.vaccination_day;
  return [&selected, day](HookContext& ctx) {
    if (ctx.sim_day() != day) return;
    for (NodeId v : selected) ctx.vaccinate(v);
  };
}

VaccinationHook Experiment::ring_hook(const PointKey& key) {
  const std::vector<double>* eligible = nullptr;
  double threshold = 0.0;
  if (key.strategy != Strategy::RV) {
    // Identification, not observation, is what F controls here: scores come
    // from complete contact information.
    const ScoreTable& table = scores(key.strategy, 1.0, key.kinds);
    const std::string label = PointKey{key.strategy, 0.0, 1.0, key.kinds}.label();
    auto it = ring_scores_.find(label);
    if (it == ring_scores_.end()) {
      std::vector<double> by_node(net_.n_nodes(), -std::numeric_limits<double>::infinity());
      for (const auto& s : table.scores) by_node[s.node] = s.score;
      it = ring_scores_.emplace(label, std::move(by_node)).first;
    }
    eligible = &it->second;
    threshold = score_threshold(table, key.percent, net_.n_nodes());
  }

  const ContactNetwork& net = net_;
  const std::uint32_t first_day = config_.vaccination_day;
  const std::uint32_t back = config_.ring_days_back;
  const std::uint32_t ahead = config_.ring_days_ahead;
  const double fraction = key.fraction;
  const double proportion = key.percent / 100.0;
  const KindSet kinds = key.kinds;

  return [=, &net](HookContext& ctx) {
    if (ctx.sim_day() < first_day) return;
    // On the first ring day everyone currently infected is traced; afterwards
    // only the infections committed at the previous barrier.
    const std::vector<NodeId> cases =
        ctx.sim_day() == first_day ? ctx.state().infected()
                                   : std::vector<NodeId>(ctx.newly_infected().begin(), ctx.newly_infected().end());
    const std::uint32_t today = ctx.net_day();
    const std::uint32_t lo = today >= back ? today - back : 0;
    const std::uint32_t hi = std::min<std::uint64_t>(static_cast<std::uint64_t>(today) + ahead, net.n_days());
    std::vector<NodeId> contacts;
    for (NodeId u : cases) {
      Stream ident(ctx.run_seed(), {0x1de, u});
      if (!bernoulli(ident, fraction)) continue;
      contacts.clear();
      for (std::uint32_t d = lo; d < hi; ++d) {
        for (const SpdtLink& l : net.hosted_by(d, u))
          if (kinds.contains(classify_link(l))) contacts.push_back(l.neighbor);
        for (std::uint32_t idx : net.received_by(d, u)) {
          const SpdtLink& l = net.links()[idx];
          if (kinds.contains(classify_link(l))) contacts.push_back(l.host);
        }
      }
      std::sort(contacts.begin(), contacts.end());
      contacts.erase(std::unique(contacts.begin(), contacts.end()), contacts.end());
      for (NodeId w : contacts) {
        if (ctx.state().status(w) != Status::Susceptible) continue;
        bool pick;
        if (eligible == nullptr) {
          Stream rng(ctx.run_seed(), {0x71a, u, w});
          pick = bernoulli(rng, proportion);
        } else {
          pick = (*eligible)[w] > threshold;
        }
        if (pick) ctx.vaccinate(w);
      }
    }
  };
}

const PointResult& Experiment::evaluate(const PointKey& key) {
  const std::string label = key.label();
  if (const auto it = points_.find(label); it != points_.end()) return it->second;

  PointResult result;
  result.key = key;
  std::vector<NodeId> selected;
  std::function<VaccinationHook(std::uint32_t)> make_hook;
  if (config_.mode == Mode::Ring) {
    VaccinationHook hook = ring_hook(key);
    make_hook = [hook](std::uint32_t) { return hook; };
  } else {
    const std::uint64_t selection_seed =
        derive_key(config_.seed, {0x5e1, static_cast<std::uint64_t>(key.strategy), double_bits(key.fraction),
                                  key.kinds.bits()});
    selected = select_for_vaccination(scores(key.strategy, key.fraction, key.kinds), key.percent, net_.n_nodes(),
                                      selection_seed)
                   .nodes;
    VaccinationHook hook =
        config_.mode == Mode::Preventive ? preventive_hook(selected) : post_outbreak_hook(selected);
    make_hook = [hook](std::uint32_t) { return hook; };
  }
  result.records = run_replicates(label, make_hook);

  // Integer totals are exact, so the means do not depend on the order in
  // which replicates finish.
  std::uint64_t outbreak = 0, vaccinated = 0, skipped = 0;
  for (const auto& r : result.records) {
    outbreak += r.final_outbreak_size;
    vaccinated += r.vaccinated_count;
    skipped += r.vaccination_skipped;
    if (r.final_outbreak_size > config_.containment_threshold) ++result.over_threshold;
  }
  const double n = config_.replicates;
  result.mean_outbreak = static_cast<double>(outbreak) / n;
  result.mean_vaccinated = static_cast<double>(vaccinated) / n;
  result.mean_skipped = static_cast<double>(skipped) / n;
  result.eta = efficiency(reference_mean(), result.mean_outbreak);
  return points_.emplace(label, std::move(result)).first->second;
}

std::optional<double> Experiment::containment_search(Strategy strategy, double fraction, KindSet kinds) {
  for (double p : config_.containment_grid()) {
    if (evaluate({strategy, p, fraction, kinds}).over_threshold == 0) return p;
  }
  return std::nullopt;
}

SweepResult Experiment::sweep() {
  SweepResult out;
  out.reference_records = reference();
  out.reference_mean = reference_mean();
  for (const auto& r : out.reference_records)
    if (r.final_outbreak_size > config_.containment_threshold) ++out.reference_over_threshold;
  for (KindSet kinds : config_.kind_sets)
    for (double f : config_.fractions)
      for (Strategy s : config_.strategies)
        for (double p : config_.percent_grid()) out.points.push_back(evaluate({s, p, f, kinds}));
  if (config_.containment_search) {
    for (KindSet kinds : config_.kind_sets)
      for (double f : config_.fractions)
        for (Strategy s : config_.strategies)
          out.containment.push_back({s, f, kinds, containment_search(s, f, kinds)});
  }
  return out;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result, std::uint32_t replicates,
                     std::string_view config_hash) {
  os << "strategy,P,F,kinds,mean_outbreak,eta,over_threshold_count,mean_vaccinated,n_replicates,config_hash\n";
  const auto eta_text = [](const std::optional<double>& e) { return e ? format_number(*e) : std::string("NA"); };
  os << "none,0,1,none," << format_number(result.reference_mean) << ','
     << eta_text(efficiency(result.reference_mean, result.reference_mean)) << ',' << result.reference_over_threshold
     << ",0," << replicates << ',' << config_hash << '\n';
  for (const auto& p : result.points) {
    os << to_string(p.key.strategy) << ',' << format_number(p.key.percent) << ',' << format_number(p.key.fraction)
       << ',' << p.key.kinds.name() << ',' << format_number(p.mean_outbreak) << ',' << eta_text(p.eta) << ','
       << p.over_threshold << ',' << format_number(p.mean_vaccinated) << ',' << replicates << ',' << config_hash
       << '\n';
  }
}

void write_containment_csv(std::ostream& os, const SweepResult& result, std::uint64_t threshold,
                           std::string_view config_hash) {
  os << "strategy,F,kinds,threshold,min_P,config_hash\n";
  for (const auto& c : result.containment) {
    os << to_string(c.strategy) << ',' << format_number(c.fraction) << ',' << c.kinds.name() << ',' << threshold
       << ',' << (c.min_percent ? format_number(*c.min_percent) : std::string()) << ',' << config_hash << '\n';
  }
}

void write_replicates_jsonl(std::ostream& os, const SweepResult& result, std::string_view config_hash) {
  for (std::size_t i = 0; i < result.reference_records.size(); ++i)
    os << journal_line(std::string(config_hash), "reference", static_cast<std::uint32_t>(i),
                       result.reference_records[i])
       << '\n';
  for (const auto& p : result.points)
    for (std::size_t i = 0; i < p.records.size(); ++i)
      os << journal_line(std::string(config_hash), p.key.label(), static_cast<std::uint32_t>(i), p.records[i])
         << '\n';
}

}  // namespace spdt
