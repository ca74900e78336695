#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh scratch directory per test scope.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spinlab_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args, const fs::path& dir,
                  const std::string& env_prefix = "") {
  const fs::path out_file = dir / "_stdout.txt";
  const fs::path err_file = dir / "_stderr.txt";
  const std::string cmd = env_prefix + std::string(SPINLAB_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

const char* kHoppingToml =
    "# pure coherent-free hopping dissipator\n"
    "[model]\n"
    "alpha = [0.0, 0.0]\n"
    "beta = 0.0\n"
    "gamma = 0.0\n"
    "jumps = [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]\n"
    "\n"
    "[state]\n"
    "kind = \"product_gibbs\"\n"
    "mu = 0.0\n";

}  // namespace

TEST_CASE("bound subcommand reproduces the closed-form lower bound") {
  const fs::path dir = scratch("bound");
  spit(dir / "hop.toml", kHoppingToml);
  const CliResult r =
      run_cli("bound --config " + (dir / "hop.toml").string() + " --out " + dir.string(), dir);
  REQUIRE(r.code == 0);

  const json summary = json::parse(slurp(dir / "bound.json"));
  CHECK(std::abs(summary["results"]["L_lower"].get<double>() - 0.00349443566410990334) <=
        1e-9);
  CHECK(summary["results"]["chi"].get<double>() == 1.0);
  CHECK(summary["version"].get<std::string>() == "1.0.0");
  CHECK(summary.contains("config_hash"));
  CHECK(summary["tolerances"].contains("prune_eps"));

  const std::string csv = slurp(dir / "bound.csv");
  CHECK(csv.find("# config_hash=") != std::string::npos);
  CHECK(csv.find("mu,L_lower,v,v_prime,chi") != std::string::npos);
}

TEST_CASE("identical inputs produce byte-identical outputs") {
  const fs::path dir = scratch("determinism");
  spit(dir / "hop.toml", kHoppingToml);
  const fs::path out1 = dir / "run1";
  const fs::path out2 = dir / "run2";
  const std::string cfg = (dir / "hop.toml").string();
  REQUIRE(run_cli("bound --config " + cfg + " --out " + out1.string(), dir).code == 0);
  REQUIRE(run_cli("bound --config " + cfg + " --out " + out2.string(), dir).code == 0);
  CHECK(slurp(out1 / "bound.csv") == slurp(out2 / "bound.csv"));
  CHECK(slurp(out1 / "bound.json") == slurp(out2 / "bound.json"));
  CHECK(!slurp(out1 / "bound.csv").empty());
}

TEST_CASE("TOML and JSON configs are interchangeable") {
  const fs::path dir = scratch("formats");
  spit(dir / "hop.toml", kHoppingToml);
  // the same document, JSON spelling, same key order
  spit(dir / "hop.json",
       "{\"model\": {\"alpha\": [0.0, 0.0], \"beta\": 0.0, \"gamma\": 0.0,"
       " \"jumps\": [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]},"
       " \"state\": {\"kind\": \"product_gibbs\", \"mu\": 0.0}}");
  const fs::path out1 = dir / "from_toml";
  const fs::path out2 = dir / "from_json";
  REQUIRE(run_cli("bound --config " + (dir / "hop.toml").string() + " --out " + out1.string(),
                  dir)
              .code == 0);
  REQUIRE(run_cli("bound --config " + (dir / "hop.json").string() + " --out " + out2.string(),
                  dir)
              .code == 0);
  CHECK(slurp(out1 / "bound.csv") == slurp(out2 / "bound.csv"));
  CHECK(slurp(out1 / "bound.json") == slurp(out2 / "bound.json"));
}

TEST_CASE("validate reports a zero condition residual for c = d models") {
  const fs::path dir = scratch("validate");
  spit(dir / "cd.toml",
       "[model]\n"
       "alpha = [0.3, 0.1]\n"
       "beta = 0.2\n"
       "gamma = 0.0\n"
       "jumps = [[0.0, 0.0, 0.0, 0.0, 0.7, 0.0, 0.7, 0.0, 0.0, 0.0]]\n");
  const CliResult r = run_cli(
      "validate --config " + (dir / "cd.toml").string() + " --out " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const json summary = json::parse(slurp(dir / "validate.json"));
  CHECK(summary["results"]["condition_residual"].get<double>() == 0.0);
  CHECK(summary["results"]["conserving"].get<bool>());
  CHECK(summary["results"]["detailed_balance"].get<bool>());
  CHECK(summary["results"].contains("equilibrium"));
}

TEST_CASE("cumulants counts and listings") {
  const fs::path dir = scratch("cumulants");
  SECTION("noncrossing count at arity 4") {
    const CliResult r = run_cli(
        "cumulants --n 4 --kind noncrossing --count-only --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    CHECK(r.out == "14\n");
    const json summary = json::parse(slurp(dir / "cumulants.json"));
    CHECK(summary["results"]["count"].get<int>() == 14);
  }
  SECTION("classical count at arity 5") {
    const CliResult r =
        run_cli("cumulants --n 5 --kind classical --count-only --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    CHECK(r.out == "52\n");
  }
  SECTION("full listing at arity 3") {
    const CliResult r =
        run_cli("cumulants --n 3 --kind classical --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    CHECK(r.out == "5\n");
    const json summary = json::parse(slurp(dir / "cumulants.json"));
    REQUIRE(summary["results"]["partitions"].is_array());
    CHECK(summary["results"]["partitions"].size() == 5);
    // one partition per CSV data row
    std::istringstream csv(slurp(dir / "cumulants.csv"));
    std::string line;
    int data_rows = 0;
    bool seen_header = false;
    while (std::getline(csv, line)) {
      if (line.rfind("#", 0) == 0) continue;
      if (!seen_header) {
        seen_header = true;
        continue;
      }
      ++data_rows;
    }
    CHECK(data_rows == 5);
  }
}

TEST_CASE("stationarity residual vanishes for a detailed-balance model") {
  const fs::path dir = scratch("stationarity");
  spit(dir / "hop.toml", "ring = 5\n" + std::string(kHoppingToml));
  const CliResult r = run_cli(
      "stationarity --config " + (dir / "hop.toml").string() + " --out " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const json summary = json::parse(slurp(dir / "stationarity.json"));
  CHECK(summary["results"]["residual"].get<double>() <= 1e-10);
  CHECK(summary["results"]["ring"].get<int>() == 5);
}

TEST_CASE("ray-average writes the running-average table") {
  const fs::path dir = scratch("ray");
  spit(dir / "ray.toml",
       "[model]\n"
       "alpha = [1.0, 0.0]\n"
       "beta = 0.0\n"
       "gamma = 0.0\n"
       "jumps = []\n"
       "[state]\n"
       "kind = \"product_gibbs\"\n"
       "mu = 0.4\n"
       "[evolver]\n"
       "window = [0, 5]\n"
       "periodic = true\n"
       "dt = 0.02\n"
       "[plan]\n"
       "velocity = 0.5\n"
       "t_max = 0.2\n"
       "dt = 0.1\n");
  const CliResult r = run_cli(
      "ray-average --config " + (dir / "ray.toml").string() + " --out " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const json summary = json::parse(slurp(dir / "ray-average.json"));
  CHECK(summary["results"]["samples"].get<int>() == 2);
  CHECK(summary["results"]["final_abs_error"].get<double>() >= 0.0);
  const std::string csv = slurp(dir / "ray-average.csv");
  CHECK(csv.find("T,running_re,running_im,target_re,target_im,abs_error") !=
        std::string::npos);
}

TEST_CASE("drude, euler and onsager emit their tables") {
  const fs::path dir = scratch("transport");
  const std::string common =
      "[model]\n"
      "alpha = [0.0, 0.0]\n"
      "beta = 0.0\n"
      "gamma = 0.0\n"
      "jumps = [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]\n"
      "[state]\n"
      "kind = \"product_gibbs\"\n"
      "mu = 0.5\n"
      "[evolver]\n"
      "window = [0, 5]\n"
      "periodic = true\n"
      "dt = 0.01\n"
      "[plan]\n"
      "t_max = 0.06\n"
      "dt = 0.03\n"
      "radius = 2\n";
  spit(dir / "cfg.toml", common);

  SECTION("drude") {
    const CliResult r = run_cli(
        "drude --config " + (dir / "cfg.toml").string() + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    const std::string csv = slurp(dir / "drude.csv");
    CHECK(csv.find("T,running_re,running_im,integrand_re,integrand_im,tail") !=
          std::string::npos);
    const json summary = json::parse(slurp(dir / "drude.json"));
    // static sample of the spin-spin correlator is the susceptibility
    const double chi = 1.0 / (std::cosh(0.5) * std::cosh(0.5));
    CHECK(std::abs(summary["results"]["static_integrand"][0].get<double>() - chi) <= 1e-12);
  }
  SECTION("euler with a fluid-cell window") {
    spit(dir / "euler.toml", common + "kappa = 0.8\n");
    const CliResult r = run_cli(
        "euler --config " + (dir / "euler.toml").string() + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    CHECK(json::parse(slurp(dir / "euler.json"))["results"].contains("final_running"));
  }
  SECTION("onsager, default and widened projection basis") {
    const CliResult r1 = run_cli(
        "onsager --config " + (dir / "cfg.toml").string() + " --out " + dir.string(), dir);
    REQUIRE(r1.code == 0);
    const json s1 = json::parse(slurp(dir / "onsager.json"));
    CHECK(s1["results"].contains("identity_gap"));
    CHECK(s1["results"]["chaotic"].get<std::string>() == "on");
    const std::string strengths = slurp(dir / "strengths.csv");
    CHECK(strengths.find("t,L_norm,L_irr") != std::string::npos);

    const CliResult r2 =
        run_cli("onsager --config " + (dir / "cfg.toml").string() + " --out " + dir.string() +
                    " --chaotic off",
                dir);
    REQUIRE(r2.code == 0);
    const json s2 = json::parse(slurp(dir / "onsager.json"));
    CHECK(s2["results"]["chaotic"].get<std::string>() == "off");
    CHECK(s2["results"].contains("charges_found"));
  }
}

TEST_CASE("the output-directory environment override is honored") {
  const fs::path dir = scratch("envdir");
  spit(dir / "hop.toml", kHoppingToml);
  const fs::path envout = dir / "from_env";
  const CliResult r = run_cli("bound --config " + (dir / "hop.toml").string(), dir,
                              "SPINLAB_OUT_DIR=" + envout.string() + " ");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(envout / "bound.json"));
}

TEST_CASE("validation failures exit with status 2 and name the offending key") {
  const fs::path dir = scratch("errors2");

  SECTION("missing model") {
    spit(dir / "empty.toml", "[state]\nkind = \"product_gibbs\"\nmu = 0.0\n");
    const CliResult r = run_cli(
        "bound --config " + (dir / "empty.toml").string() + " --out " + dir.string(), dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("model") != std::string::npos);
  }
  SECTION("malformed alpha") {
    spit(dir / "bad.toml", "[model]\nalpha = [1.0]\njumps = []\n");
    const CliResult r = run_cli(
        "bound --config " + (dir / "bad.toml").string() + " --out " + dir.string(), dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("model.alpha") != std::string::npos);
  }
  SECTION("unparseable config text") {
    spit(dir / "junk.toml", "model alpha beta\n");
    const CliResult r = run_cli(
        "bound --config " + (dir / "junk.toml").string() + " --out " + dir.string(), dir);
    CHECK(r.code == 2);
  }
  SECTION("missing config for a model-based subcommand") {
    const CliResult r = run_cli("bound --out " + dir.string(), dir);
    CHECK(r.code == 2);
  }
  SECTION("unknown subcommand") {
    const CliResult r = run_cli("frobnicate", dir);
    CHECK(r.code == 2);
  }
}

TEST_CASE("limit errors exit with status 3") {
  const fs::path dir = scratch("errors3");
  spit(dir / "big.toml", "ring = 9\n" + std::string(kHoppingToml));
  const CliResult r = run_cli(
      "stationarity --config " + (dir / "big.toml").string() + " --out " + dir.string(), dir);
  CHECK(r.code == 3);
}
