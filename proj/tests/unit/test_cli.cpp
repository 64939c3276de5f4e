// Runs the spdtvax binary end to end. Paths come from compile definitions.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "spdt/config.hpp"
#include "spdt/network_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kBin = SPDTVAX_BIN;
const fs::path kFixtures = SPDT_FIXTURES;

struct Run {
  int code = -1;
  std::string err;
};

// Runs `spdtvax args` and returns the exit code and captured stderr.
Run run(const std::string& args) {
  static int counter = 0;
  const fs::path err = fs::temp_directory_path() / ("spdt_cli_err_" + std::to_string(::getpid()) + "_" +
                                                    std::to_string(counter++));
  const std::string cmd = kBin.string() + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  fs::remove(err);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in, p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("spdt_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
  void write(const std::string& leaf, const std::string& body) const { std::ofstream(dir / leaf) << body; }
};

// A generated network small enough for quick simulations.
const char* kSmallConfig = R"({
  "schema_version": 1,
  "seed": 11,
  "generate": {"n_nodes": 300, "n_days": 21, "activation_rate": 2, "degree_cap": 30},
  "disease": {"sigma": 5.0},
  "experiment": {"mode": "preventive", "strategies": ["DV", "RV"], "percents": [1, 5],
                 "replicates": 12, "simulation_days": 14}
})";

}  // namespace

TEST_CASE("ingest reproduces the golden 100-update network") {
  Scratch s("golden");
  const Run r = run("ingest " + (kFixtures / "trace100.csv").string() + " --format text --out " + s.dir.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(s / "network.csv") == slurp(kFixtures / "trace100_network.csv"));

  const json m = read_json(s / "ingest.manifest.json");
  CHECK(m["notes"]["records"] == 100);
  CHECK(m["notes"]["rejected_records"] == 0);
  CHECK(m["inputs"][0]["digest"] == spdt::file_digest(kFixtures / "trace100.csv"));
  CHECK(m["outputs"].size() == 2);
  CHECK(m["config_hash"].get<std::string>().size() == 16);

  // Binary output carries the same network.
  REQUIRE(run("ingest " + (kFixtures / "trace100.csv").string() + " --out " + s.dir.string()).code == 0);
  std::ostringstream a, b;
  spdt::write_text(a, spdt::load_network(s / "network.spdtb"));
  spdt::write_text(b, spdt::load_network(kFixtures / "trace100_network.csv"));
  CHECK(a.str() == b.str());
}

TEST_CASE("ingest of an empty trace succeeds with a warning") {
  Scratch s("empty");
  s.write("empty.csv", "");
  const Run r = run("ingest " + (s / "empty.csv") + " --format text --out " + s.dir.string());
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  const auto net = spdt::load_network(s / "network.csv");
  CHECK(net.n_nodes() == 0);
  CHECK(net.link_count() == 0);
}

TEST_CASE("ingest counts malformed records and enforces the tolerance") {
  Scratch s("malformed");
  s.write("bad.csv",
          "a,40.0,-75.0,1599984000\n"
          "a,forty,-75.0,1599984600\n"
          "b,40.0,-75.0,1599984300\n");
  Run r = run("ingest " + (s / "bad.csv") + " --out " + s.dir.string());
  REQUIRE(r.code == 0);
  CHECK(read_json(s / "ingest.manifest.json")["notes"]["rejected_records"] == 1);
  CHECK(slurp(s / "rejected.csv") == "line\n2\n");

  r = run("ingest " + (s / "bad.csv") + " --max-rejected 0 --out " + s.dir.string());
  CHECK(r.code == 3);
  CHECK(r.err.find("lines 2") != std::string::npos);

  CHECK(run("ingest " + (s / "missing.csv") + " --out " + s.dir.string()).code == 3);
}

TEST_CASE("config and usage errors exit with code 2") {
  Scratch s("errors");
  s.write("typo.json", R"({"schema_version": 1, "sede": 4})");
  s.write("version.json", R"({"schema_version": 7})");
  s.write("range.json", R"({"schema_version": 1, "generate": {"n_nodes": 1}})");
  CHECK(run("--config " + (s / "typo.json") + " generate --out " + s.dir.string()).code == 2);
  CHECK(run("--config " + (s / "version.json") + " generate --out " + s.dir.string()).code == 2);
  CHECK(run("--config " + (s / "range.json") + " generate --out " + s.dir.string()).code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("generate --seed notanumber").code == 2);
  CHECK(run("rank --strategy XV --out " + s.dir.string()).code == 2);
}

TEST_CASE("generate is deterministic in the seed") {
  Scratch s("generate");
  s.write("tiny.json", R"({"schema_version": 1, "generate": {"n_nodes": 2, "n_days": 3}})");
  CHECK(run("--config " + (s / "tiny.json") + " generate --out " + (s / "tiny")).code == 0);
  CHECK(spdt::load_network(s / "tiny/network.spdtb").n_nodes() == 2);

  s.write("small.json", kSmallConfig);
  const std::string cfg = "--config " + (s / "small.json");
  REQUIRE(run(cfg + " generate --out " + (s / "a")).code == 0);
  REQUIRE(run(cfg + " generate --out " + (s / "b")).code == 0);
  REQUIRE(run(cfg + " --seed 12 generate --out " + (s / "c")).code == 0);
  const auto da = spdt::file_digest(s / "a/network.spdtb");
  CHECK(da == spdt::file_digest(s / "b/network.spdtb"));
  CHECK(da != spdt::file_digest(s / "c/network.spdtb"));
  const json ma = read_json(s / "a/generate.manifest.json"), mc = read_json(s / "c/generate.manifest.json");
  CHECK(ma["seed"] == 11);
  CHECK(mc["seed"] == 12);
  CHECK(ma["config_hash"] != mc["config_hash"]);
}

TEST_CASE("rank, simulate and report") {
  Scratch s("pipeline");
  s.write("small.json", kSmallConfig);
  const std::string cfg = "--config " + (s / "small.json") + " --out " + s.dir.string();
  REQUIRE(run(cfg + " generate").code == 0);
  const std::string net = " --network " + (s / "network.spdtb");

  REQUIRE(run(cfg + " rank --strategy DV" + net).code == 0);
  const std::string scores = slurp(s / "scores_DV.csv");
  CHECK(scores.rfind("node_id,score,strategy,config_hash\n", 0) == 0);
  CHECK(std::count(scores.begin(), scores.end(), '\n') > 1);

  REQUIRE(run(cfg + " simulate" + net).code == 0);
  std::string csv = slurp(s / "simulate.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + reference

  REQUIRE(run(cfg + " simulate --strategy DV --percent 5" + net).code == 0);
  csv = slurp(s / "simulate.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\nDV,5,1,direct,") != std::string::npos);
  CHECK(run(cfg + " simulate --percent 5" + net).code == 2);

  REQUIRE(run(cfg + " report " + (s / "simulate.csv")).code == 0);
  const std::string report = slurp(s / "report.txt");
  CHECK(report.find("DV F=1 kinds=direct") != std::string::npos);

  s.write("broken.csv", "strategy,P\nDV,1\n");
  const Run bad = run(cfg + " report " + (s / "broken.csv"));
  CHECK(bad.code == 3);
  CHECK(bad.err.find("F") != std::string::npos);
}

TEST_CASE("sweep is thread-independent and resumes from its journal") {
  Scratch s("sweep");
  s.write("small.json", kSmallConfig);
  const std::string cfg = "--config " + (s / "small.json");
  REQUIRE(run(cfg + " --out " + (s / "net") + " generate").code == 0);
  const std::string net = " --network " + (s / "net/network.spdtb");

  REQUIRE(run(cfg + " --threads 1 --out " + (s / "t1") + " sweep" + net).code == 0);
  REQUIRE(run(cfg + " --threads 3 --out " + (s / "t3") + " sweep" + net).code == 0);
  const std::string csv = slurp(s / "t1/sweep.csv");
  CHECK(csv == slurp(s / "t3/sweep.csv"));
  CHECK(slurp(s / "t1/sweep_replicates.jsonl") == slurp(s / "t3/sweep_replicates.jsonl"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 1 + 4);  // header, reference, 2 strategies x 2 P

  // Keep the first half of the journal plus a torn line, as after a crash.
  const std::string journal = slurp(s / "t1/sweep.journal");
  std::size_t lines = std::count(journal.begin(), journal.end(), '\n');
  REQUIRE(lines > 10);
  std::size_t cut = 0;
  for (std::size_t i = 0; i < lines / 2; ++i) cut = journal.find('\n', cut) + 1;
  {
    std::ofstream(s / "t1/sweep.journal", std::ios::binary) << journal.substr(0, cut) << "{\"config_hash\":\"";
  }
  REQUIRE(run(cfg + " --threads 2 --out " + (s / "t1") + " sweep" + net).code == 0);
  CHECK(read_json(s / "t1/sweep.manifest.json")["notes"]["resumed_replicates"] == lines / 2);
  CHECK(slurp(s / "t1/sweep.csv") == csv);

  REQUIRE(run(cfg + " --out " + (s / "t1") + " sweep --fresh" + net).code == 0);
  CHECK(read_json(s / "t1/sweep.manifest.json")["notes"]["resumed_replicates"] == 0);
  CHECK(slurp(s / "t1/sweep.csv") == csv);

  // A different seed is a different config: nothing resumes and the hash moves.
  REQUIRE(run(cfg + " --seed 99 --out " + (s / "t1") + " sweep" + net).code == 0);
  CHECK(read_json(s / "t1/sweep.manifest.json")["notes"]["resumed_replicates"] == 0);
  CHECK(slurp(s / "t1/sweep.csv") != csv);
}

TEST_CASE("a one-value P grid is a single-point sweep") {
  Scratch s("single");
  s.write("one.json", R"({
    "schema_version": 1, "seed": 3,
    "generate": {"n_nodes": 200, "n_days": 21, "degree_cap": 20},
    "experiment": {"strategies": ["IMV"], "percents": [2], "replicates": 5, "simulation_days": 14}
  })");
  REQUIRE(run("--config " + (s / "one.json") + " --out " + s.dir.string() + " sweep").code == 0);
  const std::string csv = slurp(s / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\nIMV,2,1,direct,") != std::string::npos);
  const std::string jsonl = slurp(s / "sweep_replicates.jsonl");
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 10);  // reference + point, 5 replicates each
}
