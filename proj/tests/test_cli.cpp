#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("H2DF_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

struct TempRoot {
  fs::path dir;
  TempRoot() {
    dir = fs::temp_directory_path() / "h2df_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~TempRoot() { fs::remove_all(dir); }
  std::string common(const std::string& run_name) const {
    return "--out-root " + dir.string() + " --run " + run_name;
  }
};

}  // namespace

TEST_CASE("cli pipeline smoke: gen-data, train-plant, train-agent, validate") {
  TempRoot root;
  const std::string c = root.common("smoke");
  REQUIRE(run("gen-data --cycles 400 " + c) == 0);
  CHECK(fs::exists(root.dir / "smoke" / "dataset.csv"));
  CHECK(fs::exists(root.dir / "smoke" / "config.json"));

  REQUIRE(run("train-plant --epochs 2 " + c) == 0);
  CHECK(fs::exists(root.dir / "smoke" / "plant.rlpa"));
  CHECK(fs::exists(root.dir / "smoke" / "history.csv"));

  // tiny agent run via a config file override
  const fs::path cfg = root.dir / "tiny.json";
  {
    std::ofstream f(cfg);
    f << R"({"episode":{"length":30},"agent":{"warmup_steps":20,"batch_size":8,)"
      << R"("stop_threshold":1e9}})";
  }
  REQUIRE(run("train-agent --algo td3 --episodes 1 --config " + cfg.string() +
              " " + c) == 0);
  CHECK(fs::exists(root.dir / "smoke" / "policy-td3.rlpa"));
  CHECK(fs::exists(root.dir / "smoke" / "curves.csv"));

  REQUIRE(run("validate --steps 60 --policy " +
              (root.dir / "smoke" / "policy-td3.rlpa").string() + " " + c) == 0);
  CHECK(fs::exists(root.dir / "smoke" / "trace.csv"));

  REQUIRE(run("export --policy " +
              (root.dir / "smoke" / "policy-td3.rlpa").string() + " " + c) == 0);
  CHECK(fs::exists(root.dir / "smoke" / "deploy" / "cascade.json"));
  CHECK(fs::exists(root.dir / "smoke" / "deploy" / "policy-0.rlpa"));

  REQUIRE(run("bench --iters 1500 --policy " +
              (root.dir / "smoke" / "policy-td3.rlpa").string() + " " + c) == 0);
  CHECK(fs::exists(root.dir / "smoke" / "bench.csv"));
}

TEST_CASE("cli fails cleanly on missing inputs") {
  TempRoot root;
  const std::string c = root.common("broken");
  CHECK(run("train-plant " + c) != 0);
  CHECK(run("train-agent --algo td3 " + c) != 0);
  CHECK(run("gen-data --config /nonexistent.json " + c) != 0);
  CHECK(run("definitely-not-a-subcommand") != 0);
}

TEST_CASE("gen-data split sizes follow the 80/15/5 rule") {
  TempRoot root;
  REQUIRE(run("gen-data --cycles 1000 " + root.common("split")) == 0);
  std::ifstream f(root.dir / "split" / "dataset.csv");
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);  // header
  int train = 0, val = 0, test = 0;
  while (std::getline(f, line)) {
    if (line.ends_with(",train")) ++train;
    else if (line.ends_with(",val")) ++val;
    else if (line.ends_with(",test")) ++test;
  }
  CHECK(train == 800);
  CHECK(val == 150);
  CHECK(test == 50);
}

TEST_CASE("gen-data is reproducible from its seed") {
  TempRoot root;
  REQUIRE(run("gen-data --cycles 300 --seed 9 " + root.common("a")) == 0);
  REQUIRE(run("gen-data --cycles 300 --seed 9 " + root.common("b")) == 0);
  std::ifstream fa(root.dir / "a" / "dataset.csv"), fb(root.dir / "b" / "dataset.csv");
  std::string a((std::istreambuf_iterator<char>(fa)),
                std::istreambuf_iterator<char>());
  std::string b((std::istreambuf_iterator<char>(fb)),
                std::istreambuf_iterator<char>());
  CHECK(a == b);
  CHECK(!a.empty());
}
