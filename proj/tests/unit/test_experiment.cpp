#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "generators.hpp"
#include "spdt/config.hpp"
#include "spdt/errors.hpp"
#include "spdt/experiment.hpp"

using namespace spdt;

namespace {

// Node 0 is a hub. Every day it hosts a visit with all leaves, and each leaf
// hosts a short visit with the hub in the evening.
ContactNetwork hub_network(std::uint32_t n, std::uint32_t days) {
  std::vector<SpdtLink> links;
  for (std::uint32_t d = 0; d < days; ++d) {
    const Seconds base = static_cast<Seconds>(d) * kDaySeconds;
    for (NodeId v = 1; v < n; ++v) {
      links.push_back({0, v, base + 3600, base + 7200, base + 3600, base + 7200, d});
      links.push_back({v, 0, base + 60000 + v, base + 61800 + v, base + 60000 + v, base + 61800 + v, std::nullopt});
    }
  }
  return ContactNetwork(n, days, Provenance::Synthetic, std::move(links));
}

ExperimentConfig base_config(Mode mode, std::uint32_t replicates) {
  ExperimentConfig c = ExperimentConfig::defaults_for(mode);
  c.replicates = replicates;
  c.threads = 1;
  c.disease.sigma = 1e4;  // any contact infects
  return c;
}

ExperimentConfig small_window(ExperimentConfig c) {
  c.seed_count = 1;
  c.start_day = 7;
  c.simulation_days = 7;
  c.vaccination_day = 0;
  return c;
}

std::string sweep_csv(Experiment& e) {
  std::ostringstream os;
  write_sweep_csv(os, e.sweep(), e.config().replicates, "h");
  return os.str();
}

}  // namespace

TEST_CASE("efficiency") {
  CHECK(*efficiency(653, 13) == doctest::Approx(98.0).epsilon(0.001));
  CHECK(*efficiency(10, 10) == 0.0);
  CHECK_FALSE(efficiency(0, 0).has_value());
}

TEST_CASE("grids, labels and mode defaults") {
  CHECK(default_percent_grid(Mode::Preventive).size() == 10);
  CHECK(default_percent_grid(Mode::Preventive).front() == doctest::Approx(0.2));
  CHECK(default_percent_grid(Mode::PostOutbreak) == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(default_percent_grid(Mode::Ring) == std::vector<double>{0, 5, 10, 15, 20, 25});
  const auto grid = default_containment_grid();
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 100.0);
  CHECK(std::set<double>(grid.begin(), grid.end()).size() == grid.size());
  CHECK(PointKey{Strategy::IMV, 0.6, 1.0, KindSet::direct()}.label() == "IMV|0.6|1|direct");
  for (Mode m : {Mode::Preventive, Mode::PostOutbreak, Mode::Ring}) CHECK(parse_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_mode("later"), ConfigError);
  const auto post = ExperimentConfig::defaults_for(Mode::PostOutbreak);
  CHECK(post.seed_count == 500);
  CHECK(post.simulation_days == 42);
  CHECK(post.start_day == 0);
  const auto pre = ExperimentConfig::defaults_for(Mode::Preventive);
  CHECK(pre.seed_count == 1);
  CHECK(pre.start_day == 7);
  CHECK(pre.simulation_days == 35);
  CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
  CHECK(format_number(2) == "2");
}

TEST_CASE("configuration is validated against the network") {
  const ContactNetwork net = hub_network(10, 14);
  ExperimentConfig c = base_config(Mode::Preventive, 5);
  CHECK_THROWS_AS(Experiment(net, c), ConfigError);  // 7 + 35 > 14 days
  c = small_window(c);
  CHECK_NOTHROW(Experiment(net, c));
  c.seed_count = 11;
  CHECK_THROWS_AS(Experiment(net, c), ConfigError);
  c.seed_count = 1;
  c.percents = {101};
  CHECK_THROWS_AS(Experiment(net, c), ConfigError);
  c.percents = {};
  c.replicates = 0;
  CHECK_THROWS_AS(Experiment(net, c), ConfigError);
}

TEST_CASE("replicate seeds are distinct, in range and reproducible") {
  const ContactNetwork net = hub_network(50, 14);
  ExperimentConfig c = small_window(base_config(Mode::PostOutbreak, 20));
  c.seed_count = 20;
  Experiment a(net, c), b(net, c);
  for (std::uint32_t i = 0; i < 20; ++i) {
    const auto s = a.replicate_seeds(i);
    CHECK(s.size() == 20);
    CHECK(std::set<NodeId>(s.begin(), s.end()).size() == 20);
    CHECK(s.back() < 50);
    CHECK(s == b.replicate_seeds(i));
  }
  CHECK(a.replicate_seeds(0) != a.replicate_seeds(1));
}

TEST_CASE("preventive vaccination of the hub stops every leaf-seeded outbreak") {
  const std::uint32_t n = 50;
  const ContactNetwork net = hub_network(n, 14);
  ExperimentConfig c = small_window(base_config(Mode::Preventive, 200));
  c.ranking.window = {0, 7};
  Experiment e(net, c);
  CHECK(e.reference_mean() > 40);
  const PointResult& dv = e.evaluate({Strategy::DV, 2.0, 1.0, KindSet::direct()});  // one node
  for (std::size_t i = 0; i < dv.records.size(); ++i) {
    const bool hub_seed = dv.records[i].seeds.front() == 0;
    CHECK(dv.records[i].final_outbreak_size == (hub_seed ? n - 1 : 0));
  }
  CHECK(*dv.eta > 90);
  const PointResult& rv = e.evaluate({Strategy::RV, 2.0, 1.0, KindSet::direct()});
  CHECK(rv.mean_outbreak > dv.mean_outbreak);
}

TEST_CASE("P = 100 under random selection leaves nothing to infect") {
  const ContactNetwork net = hub_network(30, 14);
  ExperimentConfig c = small_window(base_config(Mode::Preventive, 30));
  Experiment e(net, c);
  const PointResult& all = e.evaluate({Strategy::RV, 100.0, 1.0, KindSet::direct()});
  CHECK(all.mean_outbreak == 0.0);
  CHECK(all.mean_vaccinated == 29.0);  // the seed is already infected
  CHECK(all.mean_skipped == 1.0);
  CHECK(*all.eta == 100.0);
}

TEST_CASE("sigma 0 gives an empty reference and undefined efficiency") {
  const ContactNetwork net = hub_network(20, 14);
  ExperimentConfig c = small_window(base_config(Mode::Preventive, 10));
  c.disease.sigma = 0;
  c.percents = {10};
  c.strategies = {Strategy::DV};
  Experiment e(net, c);
  CHECK(e.reference_mean() == 0.0);
  CHECK_FALSE(e.evaluate({Strategy::DV, 10, 1.0, KindSet::direct()}).eta.has_value());
  const std::string csv = sweep_csv(e);
  CHECK(csv.rfind(
            "strategy,P,F,kinds,mean_outbreak,eta,over_threshold_count,mean_vaccinated,n_replicates,config_hash\n"
            "none,0,1,none,0,NA,0,0,10,h\n"
            "DV,10,1,direct,0,NA,0,",
            0) == 0);
}

TEST_CASE("ring vaccination") {
  const std::uint32_t n = 40;
  const ContactNetwork net = hub_network(n, 14);
  ExperimentConfig c = small_window(base_config(Mode::Ring, 60));
  Experiment e(net, c);
  const auto& reference = e.reference();
  SUBCASE("F = 0 and P = 0 reproduce the reference exactly") {
    for (const PointKey& key : {PointKey{Strategy::DV, 10, 0.0, KindSet::direct()},
                                PointKey{Strategy::DV, 0, 1.0, KindSet::direct()},
                                PointKey{Strategy::RV, 0, 1.0, KindSet::direct()}}) {
      const PointResult& r = e.evaluate(key);
      REQUIRE(r.records.size() == reference.size());
      for (std::size_t i = 0; i < reference.size(); ++i) {
        CHECK(r.records[i].infected == reference[i].infected);
        CHECK(r.records[i].vaccinated_count == 0);
      }
    }
  }
  SUBCASE("tracing a leaf case vaccinates the hub") {
    const PointResult& r = e.evaluate({Strategy::DV, 100.0 / n, 1.0, KindSet::direct()});
    for (const auto& rec : r.records) {
      if (rec.seeds.front() == 0) continue;
      CHECK(rec.final_outbreak_size == 0);
      CHECK(rec.vaccinated_count == 1);
    }
  }
  SUBCASE("random ring selection at P = 100 vaccinates every susceptible contact") {
    const PointResult& r = e.evaluate({Strategy::RV, 100.0, 1.0, KindSet::direct()});
    for (const auto& rec : r.records) {
      if (rec.seeds.front() == 0) {
        CHECK(rec.vaccinated_count == n - 1);
      } else {
        CHECK(rec.vaccinated_count == 1);
      }
      CHECK(rec.final_outbreak_size == 0);
    }
  }
}

TEST_CASE("containment search returns the first contained grid point") {
  Stream rng(61, {});
  const ContactNetwork net = testgen::random_network(rng, 60, 14, 900);
  ExperimentConfig c = small_window(base_config(Mode::Preventive, 40));
  c.disease.sigma = 3;
  c.containment_threshold = 2;
  c.containment_percents = {0, 5, 10, 20, 40, 60, 80, 100};
  Experiment e(net, c);
  for (Strategy s : {Strategy::RV, Strategy::DV}) {
    const auto found = e.containment_search(s, 1.0, KindSet::direct());
    REQUIRE(found.has_value());
    for (double p : c.containment_percents) {
      const auto over = e.evaluate({s, p, 1.0, KindSet::direct()}).over_threshold;
      if (p < *found) CHECK(over > 0);
      if (p == *found) CHECK(over == 0);
    }
  }
}

TEST_CASE("sweep output is identical across thread counts") {
  Stream rng(62, {});
  const ContactNetwork net = testgen::random_network(rng, 80, 14, 1500);
  for (Mode mode : {Mode::Preventive, Mode::PostOutbreak, Mode::Ring}) {
    ExperimentConfig c = small_window(base_config(mode, 24));
    c.disease.sigma = 2;
    c.seed_count = mode == Mode::Preventive ? 1 : 3;
    c.vaccination_day = mode == Mode::Preventive ? 0 : 2;
    c.percents = {5, 20};
    c.fractions = {1.0, 0.5};
    c.kind_sets = {KindSet::direct(), KindSet::all()};
    c.containment_search = true;
    c.containment_percents = {0, 10, 50, 100};
    std::string outputs[3];
    unsigned threads[] = {1, 3, 8};
    for (int t = 0; t < 3; ++t) {
      c.threads = threads[t];
      Experiment e(net, c);
      const SweepResult r = e.sweep();
      std::ostringstream os;
      write_sweep_csv(os, r, c.replicates, "h");
      write_containment_csv(os, r, c.containment_threshold, "h");
      write_replicates_jsonl(os, r, "h");
      outputs[t] = os.str();
    }
    CHECK(outputs[0] == outputs[1]);
    CHECK(outputs[0] == outputs[2]);
  }
}

TEST_CASE("resume journal replays finished replicates") {
  const auto path = std::filesystem::temp_directory_path() / "spdt_test_journal.jsonl";
  std::filesystem::remove(path);
  Stream rng(63, {});
  const ContactNetwork net = testgen::random_network(rng, 60, 14, 900);
  ExperimentConfig c = small_window(base_config(Mode::Preventive, 12));
  c.disease.sigma = 2;
  c.percents = {10};
  c.strategies = {Strategy::DV, Strategy::IMV};

  std::string first;
  {
    ResumeJournal journal(path, "abc");
    Experiment e(net, c, &journal);
    first = sweep_csv(e);
    CHECK(journal.size() == 3 * 12);
  }
  // A torn trailing line and a foreign-hash line are ignored.
  {
    std::ofstream out(path, std::ios::app);
    out << journal_line("zzz", "reference", 0, OutbreakRecord{}) << "\n{\"config_hash\":\"abc\",\"po";
  }
  {
    ResumeJournal journal(path, "abc");
    CHECK(journal.size() == 3 * 12);
    Experiment e(net, c, &journal);
    CHECK(sweep_csv(e) == first);
    CHECK(journal.size() == 3 * 12);
  }
  CHECK(ResumeJournal(path, "other").size() == 0);
  std::filesystem::remove(path);
}

TEST_CASE("containment CSV leaves min_P empty when nothing contains") {
  SweepResult r;
  r.containment.push_back({Strategy::AV, 1.0, KindSet::direct(), std::nullopt});
  r.containment.push_back({Strategy::IMV, 0.5, KindSet::all(), 1.2});
  std::ostringstream os;
  write_containment_csv(os, r, 100, "h");
  CHECK(os.str() ==
        "strategy,F,kinds,threshold,min_P,config_hash\n"
        "AV,1,direct,100,,h\n"
        "IMV,0.5," + KindSet::all().name() + ",100,1.2,h\n");
}
