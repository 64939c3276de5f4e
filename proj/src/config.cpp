#include "spdt/config.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "spdt/errors.hpp"

namespace spdt {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool has(const char* key) const { return obj_.contains(key); }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    used_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : obj_.items())
      if (!used_.count(item.key())) throw ConfigError("unknown key " + path_ + "." + item.key());
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void read_gdt(Section s, GdtParams& p) {
  s.get("n_nodes", p.n_nodes);
  s.get("n_days", p.n_days);
  s.get("active_period_mean", p.active_period_mean);
  s.get("activation_rate", p.activation_rate);
  s.get("exponent_low", p.exponent_low);
  s.get("exponent_high", p.exponent_high);
  s.get("degree_min", p.degree_min);
  s.get("degree_cap", p.degree_cap);
  s.get("join_delay_mean", p.join_delay_mean);
  s.get("stay_mean", p.stay_mean);
  s.get("indirect_window", p.indirect_window);
  std::string het(to_string(p.heterogeneity));
  s.get("heterogeneity", het);
  p.heterogeneity = parse_heterogeneity(het);
  s.finish();
}

json gdt_json(const GdtParams& p) {
  return {{"n_nodes", p.n_nodes},
          {"n_days", p.n_days},
          {"active_period_mean", p.active_period_mean},
          {"activation_rate", p.activation_rate},
          {"exponent_low", p.exponent_low},
          {"exponent_high", p.exponent_high},
          {"degree_min", p.degree_min},
          {"degree_cap", p.degree_cap},
          {"join_delay_mean", p.join_delay_mean},
          {"stay_mean", p.stay_mean},
          {"indirect_window", p.indirect_window},
          {"heterogeneity", std::string(to_string(p.heterogeneity))}};
}

void read_disease(Section s, DiseaseParams& p) {
  s.get("generation_rate", p.generation_rate);
  s.get("pulmonary_rate", p.pulmonary_rate);
  s.get("volume", p.volume);
  s.get("removal_min_minutes", p.removal_min_minutes);
  s.get("removal_max_minutes", p.removal_max_minutes);
  s.get("removal_median_minutes", p.removal_median_minutes);
  s.get("sigma", p.sigma);
  s.get("tau_min", p.tau_min);
  s.get("tau_max", p.tau_max);
  s.get("tau_weights", p.tau_weights);
  s.get("seed_infectious_days", p.seed_infectious_days);
  s.finish();
}

json disease_json(const DiseaseParams& p) {
  return {{"generation_rate", p.generation_rate},
          {"pulmonary_rate", p.pulmonary_rate},
          {"volume", p.volume},
          {"removal_min_minutes", p.removal_min_minutes},
          {"removal_max_minutes", p.removal_max_minutes},
          {"removal_median_minutes", p.removal_median_minutes},
          {"sigma", p.sigma},
          {"tau_min", p.tau_min},
          {"tau_max", p.tau_max},
          {"tau_weights", p.tau_weights},
          {"seed_infectious_days", p.seed_infectious_days}};
}

KindSet read_kinds(const std::string& text) { return KindSet::parse(text); }

DayRange read_window(const json& j, const std::string& path) {
  auto day = [](const json& d) { return d.is_number_integer() && d.get<std::int64_t>() >= 0; };
  if (!j.is_array() || j.size() != 2 || !day(j[0]) || !day(j[1]))
    throw ConfigError(path + " must be [first_day, last_day)");
  return {j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>()};
}

void read_ranking(Section s, RankingParams& p) {
  s.get("beta", p.beta);
  s.get("beta0", p.beta0);
  s.get("t0", p.t0);
  s.get("enforce_beta0_bound", p.enforce_beta0_bound);
  if (const json* w = s.child("window")) p.window = read_window(*w, "ranking.window");
  std::string kinds = p.kinds.name(), visit_kinds = p.visit_kinds.name();
  s.get("kinds", kinds);
  s.get("visit_kinds", visit_kinds);
  p.kinds = read_kinds(kinds);
  p.visit_kinds = read_kinds(visit_kinds);
  s.get("class6_cap", p.class6_cap);
  s.finish();
}

json ranking_json(const RankingParams& p) {
  return {{"beta", p.beta},
          {"beta0", p.beta0},
          {"t0", p.t0},
          {"enforce_beta0_bound", p.enforce_beta0_bound},
          {"window", {p.window.first, p.window.last}},
          {"kinds", p.kinds.name()},
          {"visit_kinds", p.visit_kinds.name()},
          {"class6_cap", p.class6_cap}};
}

void read_experiment(Section s, ExperimentConfig& c) {
  std::vector<std::string> strategies, kinds;
  s.get("strategies", strategies);
  if (s.has("strategies")) {
    c.strategies.clear();
    for (const auto& name : strategies) c.strategies.push_back(parse_strategy(name));
  }
  s.get("percents", c.percents);
  s.get("fractions", c.fractions);
  s.get("kinds", kinds);
  if (s.has("kinds")) {
    c.kind_sets.clear();
    for (const auto& name : kinds) c.kind_sets.push_back(read_kinds(name));
  }
  s.get("replicates", c.replicates);
  s.get("seed_count", c.seed_count);
  s.get("start_day", c.start_day);
  s.get("simulation_days", c.simulation_days);
  s.get("vaccination_day", c.vaccination_day);
  s.get("containment_threshold", c.containment_threshold);
  s.get("containment_search", c.containment_search);
  s.get("containment_percents", c.containment_percents);
  s.get("ring_days_back", c.ring_days_back);
  s.get("ring_days_ahead", c.ring_days_ahead);
  s.finish();
}

json experiment_json(const ExperimentConfig& c) {
  json strategies = json::array(), kinds = json::array();
  for (Strategy st : c.strategies) strategies.push_back(std::string(to_string(st)));
  for (KindSet k : c.kind_sets) kinds.push_back(k.name());
  return {{"mode", std::string(to_string(c.mode))},
          {"strategies", strategies},
          {"percents", c.percent_grid()},
          {"fractions", c.fractions},
          {"kinds", kinds},
          {"replicates", c.replicates},
          {"seed_count", c.seed_count},
          {"start_day", c.start_day},
          {"simulation_days", c.simulation_days},
          {"vaccination_day", c.vaccination_day},
          {"containment_threshold", c.containment_threshold},
          {"containment_search", c.containment_search},
          {"containment_percents", c.containment_grid()},
          {"ring_days_back", c.ring_days_back},
          {"ring_days_ahead", c.ring_days_ahead}};
}

}  // namespace

ToolConfig parse_config(const json& doc) {
  Section top(doc, "config");
  int version = 0;
  top.get("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError("schema_version must be " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(version));
  ToolConfig cfg;
  top.get("seed", cfg.seed);

  if (const json* net = top.child("network")) {
    Section s(*net, "network");
    std::string file;
    s.get("file", file);
    if (!file.empty()) cfg.network_file = file;
    s.finish();
  }
  if (const json* g = top.child("generate")) read_gdt(Section(*g, "generate"), cfg.gdt);
  if (const json* ing = top.child("ingest")) {
    Section s(*ing, "ingest");
    s.get("radius_m", cfg.ingestion.radius_m);
    s.get("delta", cfg.ingestion.delta);
    s.get("min_neighbor_updates", cfg.ingestion.min_neighbor_updates);
    s.get("densify_days", cfg.densify_days);
    s.finish();
  }

  // The mode decides several experiment defaults, so it is read first.
  Mode mode = Mode::Preventive;
  const json* exp = top.child("experiment");
  if (exp != nullptr && exp->is_object() && exp->contains("mode")) {
    const auto& m = (*exp)["mode"];
    if (!m.is_string()) throw ConfigError("experiment.mode must be a string");
    mode = parse_mode(m.get<std::string>());
  }
  cfg.experiment = ExperimentConfig::defaults_for(mode);
  if (exp != nullptr) {
    Section s(*exp, "experiment");
    std::string ignored;
    s.get("mode", ignored);
    read_experiment(std::move(s), cfg.experiment);
  }
  if (const json* d = top.child("disease")) read_disease(Section(*d, "disease"), cfg.experiment.disease);
  if (const json* r = top.child("ranking")) read_ranking(Section(*r, "ranking"), cfg.experiment.ranking);
  top.finish();

  cfg.experiment.seed = cfg.seed;
  cfg.gdt.validate();
  cfg.ingestion.validate();
  cfg.experiment.disease.validate();
  cfg.experiment.ranking.validate();
  return cfg;
}

ToolConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ToolConfig& c) {
  json doc = {{"schema_version", kSchemaVersion},
              {"seed", c.seed},
              {"generate", gdt_json(c.gdt)},
              {"ingest",
               {{"radius_m", c.ingestion.radius_m},
                {"delta", c.ingestion.delta},
                {"min_neighbor_updates", c.ingestion.min_neighbor_updates},
                {"densify_days", c.densify_days}}},
              {"disease", disease_json(c.experiment.disease)},
              {"ranking", ranking_json(c.experiment.ranking)},
              {"experiment", experiment_json(c.experiment)}};
  if (c.network_file) doc["network"] = {{"file", *c.network_file}};
  return doc;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64({buf, static_cast<std::size_t>(in.gcount())}, h);
  }
  return hex64(h);
}

std::string config_hash(const ToolConfig& config,
                        const std::vector<std::pair<std::string, std::string>>& input_digests) {
  json doc = to_json(config);
  // Paths do not affect results; file contents do.
  doc.erase("network");
  json inputs = json::array();
  for (const auto& [role, digest] : input_digests) inputs.push_back({role, digest});
  doc["inputs"] = inputs;
  return hex64(fnv1a64(doc.dump()));
}

json to_json(const OutbreakRecord& rec) {
  return {{"seeds", rec.seeds},
          {"daily_new_infections", rec.daily_new_infections},
          {"final_outbreak_size", rec.final_outbreak_size},
          {"vaccinated_count", rec.vaccinated_count},
          {"vaccination_skipped", rec.vaccination_skipped},
          {"rng_seed", rec.rng_seed}};
}

OutbreakRecord record_from_json(const json& j) {
  OutbreakRecord rec;
  j.at("seeds").get_to(rec.seeds);
  j.at("daily_new_infections").get_to(rec.daily_new_infections);
  j.at("final_outbreak_size").get_to(rec.final_outbreak_size);
  j.at("vaccinated_count").get_to(rec.vaccinated_count);
  j.at("vaccination_skipped").get_to(rec.vaccination_skipped);
  j.at("rng_seed").get_to(rec.rng_seed);
  return rec;
}

std::string journal_line(const std::string& config_hash, const std::string& point, std::uint32_t replicate,
                         const OutbreakRecord& rec) {
  json j = {{"config_hash", config_hash}, {"point", point}, {"replicate", replicate}};
  j["record"] = to_json(rec);
  return j.dump();
}

std::optional<JournalEntry> parse_journal_line(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    JournalEntry e;
    j.at("config_hash").get_to(e.config_hash);
    j.at("point").get_to(e.point);
    j.at("replicate").get_to(e.replicate);
    e.record = record_from_json(j.at("record"));
    return e;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)) {}

void RunManifest::set_config(const std::string& hash, std::uint64_t seed, const json& effective) {
  hash_ = hash;
  seed_ = seed;
  config_ = effective;
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.emplace_back(path.string(), file_digest(path));
}

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs_.emplace_back(path.string(), file_digest(path));
}

void RunManifest::add_note(const std::string& key, json value) { notes_[key] = std::move(value); }

void RunManifest::begin_phase(const std::string& name) {
  end_phase();
  open_phase_ = {name, Clock::now()};
}

void RunManifest::end_phase() {
  if (!open_phase_) return;
  const std::chrono::duration<double> dt = Clock::now() - open_phase_->second;
  phases_.emplace_back(open_phase_->first, dt.count());
  open_phase_.reset();
}

json RunManifest::to_json() const {
  json inputs = json::array(), outputs = json::array(), phases = json::object();
  for (const auto& [path, digest] : inputs_) inputs.push_back({{"path", path}, {"digest", digest}});
  for (const auto& [path, digest] : outputs_) outputs.push_back({{"path", path}, {"digest", digest}});
  for (const auto& [name, secs] : phases_) phases[name] = secs;
  const std::chrono::duration<double> wall = Clock::now() - started_;
  return {{"tool", "spdtvax"},
          {"version", std::string(kToolVersion)},
          {"command", command_},
          {"argv", argv_},
          {"config_hash", hash_},
          {"seed", seed_},
          {"config", config_},
          {"inputs", inputs},
          {"outputs", outputs},
          {"notes", notes_},
          {"phase_seconds", phases},
          {"wall_seconds", wall.count()}};
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  out << to_json().dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest " + path.string());
}

}  // namespace spdt
