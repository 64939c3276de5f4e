// spdtvax: command-line front end.
//
//   spdtvax ingest   TRACE            GPS updates -> network file
//   spdtvax generate                  synthetic network file
//   spdtvax rank     --strategy S     per-node scores
//   spdtvax simulate [--strategy S --percent P]
//   spdtvax sweep                     every configured point (+ containment)
//   spdtvax report   CSV...           text summary of sweep CSVs
//
// Global flags: --config FILE, --seed N, --threads N, --out DIR.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spdt/config.hpp"
#include "spdt/errors.hpp"
#include "spdt/experiment.hpp"
#include "spdt/network_io.hpp"
#include "spdt/random.hpp"
#include "spdt/synthetic_network.hpp"
#include "spdt/trace_ingestion.hpp"
#include "spdt/vaccination.hpp"

namespace fs = std::filesystem;
using namespace spdt;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out = ".";
  std::vector<std::string> argv;
};

ToolConfig effective_config(const Globals& g) {
  ToolConfig cfg = g.config_file.empty() ? parse_config({{"schema_version", kSchemaVersion}})
                                         : load_config(g.config_file);
  if (g.seed) cfg.seed = cfg.experiment.seed = *g.seed;
  if (g.threads) cfg.experiment.threads = *g.threads;
  return cfg;
}

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

fs::path network_name(const fs::path& dir, const std::string& format) {
  if (format == "binary") return dir / "network.spdtb";
  if (format == "text") return dir / "network.csv";
  throw ConfigError("--format must be binary or text");
}

void write_text_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw DataError("cannot write " + path.string());
}

// The network named on the command line or in the config, else one generated
// from the config's generator section.
struct NetworkSource {
  ContactNetwork net;
  std::optional<fs::path> file;
  std::vector<std::pair<std::string, std::string>> digests;
};

NetworkSource resolve_network(const ToolConfig& cfg, const std::string& flag) {
  NetworkSource src;
  std::optional<fs::path> file;
  if (!flag.empty()) file = flag;
  else if (cfg.network_file) file = *cfg.network_file;
  if (file) {
    src.net = load_network(*file);
    src.file = file;
    src.digests.emplace_back("network", file_digest(*file));
  } else {
    src.net = generate_gdt(cfg.gdt, cfg.seed);
  }
  return src;
}

RunManifest start_manifest(const std::string& command, const Globals& g, const ToolConfig& cfg,
                           const std::vector<std::pair<std::string, std::string>>& digests) {
  RunManifest m(command, g.argv);
  m.set_config(config_hash(cfg, digests), cfg.seed, to_json(cfg));
  return m;
}

// ---- ingest ----

struct IngestArgs {
  std::string trace;
  std::string format = "binary";
  std::size_t max_rejected = 100;
};

int cmd_ingest(const Globals& g, const IngestArgs& a) {
  const ToolConfig cfg = effective_config(g);
  const fs::path dir = out_dir(g);
  const std::vector<std::pair<std::string, std::string>> digests{{"trace", file_digest(a.trace)}};
  RunManifest m = start_manifest("ingest", g, cfg, digests);
  m.add_input(a.trace);

  m.begin_phase("parse");
  const Trace trace = load_trace(a.trace);
  {
    std::ostringstream rej;
    rej << "line\n";
    for (std::size_t line : trace.rejected_lines) rej << line << '\n';
    write_text_file(dir / "rejected.csv", rej.str());
    m.add_output(dir / "rejected.csv");
  }
  if (trace.rejected > a.max_rejected) {
    std::ostringstream msg;
    msg << trace.rejected << " malformed lines exceed --max-rejected " << a.max_rejected << "; first at lines";
    for (std::size_t i = 0; i < trace.rejected_lines.size() && i < 10; ++i) msg << ' ' << trace.rejected_lines[i];
    throw DataError(msg.str());
  }

  m.begin_phase("ingest");
  IngestionResult result = ingest(trace, cfg.ingestion);
  ContactNetwork net = std::move(result.network);
  if (cfg.densify_days > 0) {
    m.begin_phase("densify");
    net = densify(net, cfg.densify_days, derive_key(cfg.seed, {0xde75}));
  }
  m.end_phase();

  const fs::path out = network_name(dir, a.format);
  save_network(out, net);
  m.add_output(out);
  m.add_note("records", trace.records);
  m.add_note("rejected_records", trace.rejected);
  m.add_note("rejected_updates", result.rejected_updates);
  m.add_note("users", trace.user_ids.size());
  m.add_note("stays", result.stays);
  m.add_note("links", net.link_count());
  m.add_note("days", net.n_days());
  m.write(dir / "ingest.manifest.json");

  if (trace.records == 0) std::cerr << "warning: " << a.trace << " holds no location updates\n";
  if (trace.rejected > 0) std::cerr << "warning: " << trace.rejected << " malformed lines skipped\n";
  std::cout << out.string() << ": " << net.n_nodes() << " nodes, " << net.n_days() << " days, " << net.link_count()
            << " links\n";
  return 0;
}

// ---- generate ----

int cmd_generate(const Globals& g, const std::string& format) {
  const ToolConfig cfg = effective_config(g);
  const fs::path dir = out_dir(g);
  RunManifest m = start_manifest("generate", g, cfg, {});
  m.begin_phase("generate");
  const ContactNetwork net = generate_gdt(cfg.gdt, cfg.seed);
  m.end_phase();
  const fs::path out = network_name(dir, format);
  save_network(out, net);
  m.add_output(out);
  m.add_note("links", net.link_count());
  m.write(dir / "generate.manifest.json");
  std::cout << out.string() << ": " << net.n_nodes() << " nodes, " << net.n_days() << " days, " << net.link_count()
            << " links\n";
  return 0;
}

// ---- rank ----

struct PointArgs {
  std::string network;
  std::string strategy;
  std::optional<double> percent;
  double fraction = 1.0;
  std::string kinds;
};

KindSet kinds_or_default(const ToolConfig& cfg, const std::string& text) {
  return text.empty() ? cfg.experiment.kind_sets.front() : KindSet::parse(text);
}

int cmd_rank(const Globals& g, const PointArgs& a) {
  const ToolConfig cfg = effective_config(g);
  const fs::path dir = out_dir(g);
  const Strategy strategy = parse_strategy(a.strategy);
  if (!(a.fraction >= 0.0 && a.fraction <= 1.0)) throw ConfigError("--fraction must lie in [0, 1]");
  const KindSet kinds = kinds_or_default(cfg, a.kinds);

  NetworkSource src = resolve_network(cfg, a.network);
  RunManifest m = start_manifest("rank", g, cfg, src.digests);
  if (src.file) m.add_input(*src.file);
  m.begin_phase("rank");
  const ScoreTable table = sweep_scores(src.net, cfg.experiment, strategy, a.fraction, kinds);
  m.end_phase();

  const fs::path out = dir / ("scores_" + std::string(to_string(strategy)) + ".csv");
  std::ofstream os(out, std::ios::binary);
  write_scores(os, table, config_hash(cfg, src.digests));
  os.close();
  if (!os) throw DataError("cannot write " + out.string());
  m.add_output(out);
  m.add_note("scored_nodes", table.scores.size());
  m.write(dir / "rank.manifest.json");
  std::cout << out.string() << ": " << table.scores.size() << " scored nodes\n";
  return 0;
}

// ---- simulate / sweep ----

void write_results(const fs::path& dir, const std::string& stem, const SweepResult& result, const ExperimentConfig& exp,
                   const std::string& hash, RunManifest& m) {
  const fs::path csv = dir / (stem + ".csv"), jsonl = dir / (stem + "_replicates.jsonl");
  {
    std::ofstream os(csv, std::ios::binary);
    write_sweep_csv(os, result, exp.replicates, hash);
    if (!os) throw DataError("cannot write " + csv.string());
  }
  {
    std::ofstream os(jsonl, std::ios::binary);
    write_replicates_jsonl(os, result, hash);
    if (!os) throw DataError("cannot write " + jsonl.string());
  }
  m.add_output(csv);
  m.add_output(jsonl);
  if (!result.containment.empty()) {
    const fs::path cpath = dir / (stem + "_containment.csv");
    std::ofstream os(cpath, std::ios::binary);
    write_containment_csv(os, result, exp.containment_threshold, hash);
    os.close();
    if (!os) throw DataError("cannot write " + cpath.string());
    m.add_output(cpath);
  }
  m.add_note("reference_mean", result.reference_mean);
}

int cmd_simulate(const Globals& g, const PointArgs& a) {
  ToolConfig cfg = effective_config(g);
  const fs::path dir = out_dir(g);
  ExperimentConfig& exp = cfg.experiment;
  exp.containment_search = false;
  if (!a.strategy.empty()) {
    exp.strategies = {parse_strategy(a.strategy)};
    exp.percents = {a.percent.value_or(0.0)};
    exp.fractions = {a.fraction};
    exp.kind_sets = {kinds_or_default(cfg, a.kinds)};
  } else if (a.percent) {
    throw ConfigError("--percent needs --strategy");
  }

  NetworkSource src = resolve_network(cfg, a.network);
  RunManifest m = start_manifest("simulate", g, cfg, src.digests);
  if (src.file) m.add_input(*src.file);
  const std::string hash = config_hash(cfg, src.digests);

  m.begin_phase("simulate");
  Experiment experiment(src.net, exp);
  SweepResult result;
  if (!a.strategy.empty()) {
    result = experiment.sweep();
  } else {
    result.reference_records = experiment.reference();
    result.reference_mean = experiment.reference_mean();
    for (const auto& r : result.reference_records)
      if (r.final_outbreak_size > exp.containment_threshold) ++result.reference_over_threshold;
  }
  m.end_phase();

  write_results(dir, "simulate", result, exp, hash, m);
  m.write(dir / "simulate.manifest.json");
  std::cout << "reference mean outbreak " << format_number(result.reference_mean) << '\n';
  for (const auto& p : result.points)
    std::cout << p.key.label() << ": mean outbreak " << format_number(p.mean_outbreak) << ", eta "
              << (p.eta ? format_number(*p.eta) : "NA") << '\n';
  return 0;
}

struct SweepArgs {
  std::string network;
  bool fresh = false;
};

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  const ToolConfig cfg = effective_config(g);
  const fs::path dir = out_dir(g);
  NetworkSource src = resolve_network(cfg, a.network);
  RunManifest m = start_manifest("sweep", g, cfg, src.digests);
  if (src.file) m.add_input(*src.file);
  const std::string hash = config_hash(cfg, src.digests);

  const fs::path journal_path = dir / "sweep.journal";
  if (a.fresh) fs::remove(journal_path);
  ResumeJournal journal(journal_path, hash);
  m.add_note("resumed_replicates", journal.size());

  m.begin_phase("sweep");
  Experiment experiment(src.net, cfg.experiment, &journal);
  const SweepResult result = experiment.sweep();
  m.end_phase();

  write_results(dir, "sweep", result, cfg.experiment, hash, m);
  m.write(dir / "sweep.manifest.json");
  std::cout << "sweep: " << result.points.size() << " points, reference mean outbreak "
            << format_number(result.reference_mean) << '\n';
  return 0;
}

// ---- report ----

const std::vector<std::string> kSweepColumns{"strategy", "P",           "F",          "kinds",
                                             "mean_outbreak", "eta", "over_threshold_count",
                                             "mean_vaccinated", "n_replicates", "config_hash"};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int cmd_report(const Globals& g, const std::vector<std::string>& inputs) {
  const ToolConfig cfg = effective_config(g);
  const fs::path dir = out_dir(g);
  RunManifest m("report", g.argv);
  m.set_config(config_hash(cfg), cfg.seed, to_json(cfg));

  std::ostringstream text;
  for (const auto& input : inputs) {
    std::ifstream in(input);
    if (!in) throw DataError("cannot read " + input);
    m.add_input(input);
    std::string line;
    if (!std::getline(in, line)) throw DataError(input + " is empty");
    const auto header = split_csv(line);
    for (const auto& col : kSweepColumns)
      if (std::find(header.begin(), header.end(), col) == header.end())
        throw DataError(input + " lacks column '" + col + "'");
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < header.size(); ++i) at[header[i]] = i;

    // Group rows by (strategy, F, kinds), keeping file order inside a group.
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::vector<std::string>>> groups;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto cells = split_csv(line);
      if (cells.size() != header.size())
        throw DataError(input + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields");
      const std::string key = cells[at["strategy"]] + " F=" + cells[at["F"]] + " kinds=" + cells[at["kinds"]];
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(std::move(cells));
    }

    text << "# " << input << "\n";
    for (const auto& key : order) {
      text << "\n" << key << "\n";
      text << "  P        mean_outbreak  eta      over_thr  mean_vacc\n";
      for (const auto& row : groups[key]) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-8s %-14s %-8s %-9s %s\n", row[at["P"]].c_str(),
                      row[at["mean_outbreak"]].c_str(), row[at["eta"]].c_str(),
                      row[at["over_threshold_count"]].c_str(), row[at["mean_vaccinated"]].c_str());
        text << buf;
      }
    }
    text << "\n";
  }
  const fs::path out = dir / "report.txt";
  write_text_file(out, text.str());
  m.add_output(out);
  m.write(dir / "report.manifest.json");
  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  g.argv.assign(argv, argv + argc);

  CLI::App app{"Contact-network vaccination experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", g.config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--threads", g.threads, "worker threads, 0 = all cores");
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "GPS trace -> network file");
  ingest->add_option("trace", ingest_args.trace, "user_id,lat,lon,unix_seconds file, optionally gzipped")
      ->required();
  ingest->add_option("--format", ingest_args.format, "binary or text")->capture_default_str();
  ingest->add_option("--max-rejected", ingest_args.max_rejected, "malformed lines tolerated")->capture_default_str();

  std::string gen_format = "binary";
  auto* generate = app.add_subcommand("generate", "synthetic network file");
  generate->add_option("--format", gen_format, "binary or text")->capture_default_str();

  PointArgs rank_args;
  auto* rank = app.add_subcommand("rank", "per-node vaccination scores");
  rank->add_option("--network", rank_args.network, "network file (default: config or generated)");
  rank->add_option("--strategy", rank_args.strategy, "RV, AV, DV or IMV")->required();
  rank->add_option("--fraction", rank_args.fraction, "observed fraction F")->capture_default_str();
  rank->add_option("--kinds", rank_args.kinds, "link kinds, e.g. direct or all");

  PointArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "reference outbreak, optionally with one vaccination point");
  simulate->add_option("--network", sim_args.network, "network file (default: config or generated)");
  simulate->add_option("--strategy", sim_args.strategy, "RV, AV, DV or IMV");
  simulate->add_option("--percent", sim_args.percent, "vaccination rate P in percent");
  simulate->add_option("--fraction", sim_args.fraction, "observed fraction F")->capture_default_str();
  simulate->add_option("--kinds", sim_args.kinds, "link kinds, e.g. direct or all");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "every configured point; resumes from sweep.journal");
  sweep->add_option("--network", sweep_args.network, "network file (default: config or generated)");
  sweep->add_flag("--fresh", sweep_args.fresh, "discard the resume journal first");

  std::vector<std::string> report_inputs;
  auto* report = app.add_subcommand("report", "summarise sweep CSVs");
  report->add_option("csv", report_inputs, "sweep CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(g, ingest_args);
    if (*generate) return cmd_generate(g, gen_format);
    if (*rank) return cmd_rank(g, rank_args);
    if (*simulate) return cmd_simulate(g, sim_args);
    if (*sweep) return cmd_sweep(g, sweep_args);
    if (*report) return cmd_report(g, report_inputs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
