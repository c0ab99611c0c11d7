#include <doctest.h>

#include "rits/cli.hpp"
#include "rits/delimited.hpp"
#include "rits/replay.hpp"
#include "rits/service.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rits;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rits_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("zero replications is a usage error") {
    CHECK(cli::run({"simulate", "--reps", "0"}) != 0);
    CHECK(cli::run({"simulate", "--no-such-flag"}) != 0);
    CHECK(cli::run({"frobnicate"}) != 0);
    CHECK(cli::run({"simulate", "--config", "/nonexistent.cfg"}) != 0);
  }

  TEST_CASE("simulate writes tables and a manifest, byte-identical across runs") {
    const auto dir = scratch("simulate");
    const std::vector<std::string> base{"simulate", "--reps", "3", "--seed", "7", "--n_obs", "100",
                                        "--M", "100", "--checkpoints", "50,80,100"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", (dir / "a").string()});
    b.insert(b.end(), {"--out", (dir / "b").string(), "--parallelism", "2"});
    REQUIRE(cli::run(a) == 0);
    REQUIRE(cli::run(b) == 0);
    for (const char* f : {"metrics.csv", "selection.csv", "regret.csv", "allocation.csv", "effect_sizes.csv"}) {
      CHECK(fs::exists(dir / "a" / f));
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    const auto manifest = Json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(manifest["command"] == "simulate");
    CHECK(manifest["master_seed"] == 7);
    CHECK(manifest["config"]["trial"]["n0"] == 40);
    CHECK(manifest["outputs"].size() == 6);

    // every table parses back: header plus rows of equal width, numeric cells intact
    std::istringstream metrics(slurp(dir / "a" / "metrics.csv"));
    std::string line;
    std::getline(metrics, line);
    const auto header = split_fields(line);
    CHECK(header.front() == "method");
    while (std::getline(metrics, line)) {
      const auto cells = split_fields(line);
      REQUIRE(cells.size() == header.size());
      for (std::size_t c = 3; c < cells.size(); ++c) CHECK(parse_double(cells[c]).has_value());
    }
  }

  TEST_CASE("config file values apply and flags override them") {
    const auto dir = scratch("config");
    {
      std::ofstream cfg(dir / "run.cfg");
      cfg << "# experiment\nn0 = 24\ndelta = 0.05\nn_obs = 90\nM = 100\nreps = 2\ncheckpoints = [50, 90]\n";
    }
    REQUIRE(cli::run({"simulate", "--config", (dir / "run.cfg").string(), "--n0", "30", "--out",
                      (dir / "out").string()}) == 0);
    const auto manifest = Json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(manifest["config"]["trial"]["n0"] == 30);
    CHECK(manifest["config"]["trial"]["delta"] == 0.05);
    CHECK(manifest["config"]["n_obs"] == 90);
    CHECK(manifest["config"]["reps"] == 2);
    {
      std::ofstream cfg(dir / "bad.cfg");
      cfg << "bogus_key = 3\n";
    }
    CHECK(cli::run({"simulate", "--config", (dir / "bad.cfg").string()}) != 0);
  }

  TEST_CASE("gen-data then replay") {
    const auto dir = scratch("replay");
    const auto data = (dir / "trial.csv").string();
    REQUIRE(cli::run({"gen-data", "--rows", "120", "--seed", "3", "--out", data}) == 0);
    const auto ds = load_dataset(data);
    CHECK(ds.size() == 120);
    CHECK(ds.K == 4);
    REQUIRE(cli::run({"replay", "--data", data, "--policy", "rits", "--w", "0.5", "--reps", "2",
                      "--sample_size", "100", "--M", "100", "--out", (dir / "out").string()}) == 0);
    const auto manifest = Json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(manifest["config"]["trial"]["n0"] == 60);
    CHECK(manifest["config"]["trial"]["delta"] == 0.05);
    CHECK(manifest["config"]["audit"]["off_allocation_reads"] == 0);
    CHECK(cli::run({"replay", "--data", (dir / "missing.csv").string(), "--reps", "1"}) != 0);
  }

  TEST_CASE("export-cs converts a journal") {
    const auto dir = scratch("export");
    TrialService svc;
    TrialConfig c;
    c.n0 = 10;
    c.m = 20;
    c.M = 100;
    const auto id = svc.create_trial(c, PolicyKind::ts());
    Rng rng(1);
    std::normal_distribution<double> n;
    for (int i = 0; i < 30; ++i) {
      const double z = n(rng);
      const auto r = svc.enroll(id, {z, z * z});
      svc.record_outcome(id, r.participant_id, n(rng), n(rng));
    }
    {
      std::ofstream out(dir / "j.jsonl");
      out << svc.journal(id);
    }
    const auto table = (dir / "cs.csv").string();
    REQUIRE(cli::run({"export-cs", "--journal", (dir / "j.jsonl").string(), "--variant", "all", "--out", table}) == 0);
    std::istringstream in(slurp(table));
    std::string line;
    std::getline(in, line);
    CHECK(line == "n,arm,estimate,lower,upper,sigma_sq,rho,variant");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2 * 3 * 11);
  }
}
