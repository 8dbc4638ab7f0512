#include "coopcdma/config_io.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace coopcdma;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Small exact sweep whose CSV is kept under tests/data.
ExperimentConfig golden_config() {
  return parse_config(R"(# golden regression run
users = 2
chips = 8
taps = 2
relays = 1
packet_len = 300
training_len = 100
snr_db = 3, 9
trials = 3
seed = 2024
)");
}

}  // namespace

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_config("users = 3\nfrobnicate = 1\n");
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "frobnicate");
  }
}

TEST_CASE("bad values name their key") {
  auto key_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<accepted>");
  };
  CHECK(key_of("alpha = fast\n") == "alpha");
  CHECK(key_of("training_len = 1500\n") == "training_len");
  CHECK(key_of("trials = 0\n") == "trials");
  CHECK(key_of("schemes = CIS, MAX\n") == "schemes");
  CHECK(key_of("seed = -4\n") == "seed");
  CHECK(key_of("no equals sign\n") == "line 1");
}

TEST_CASE("emitted config parses back to the same values") {
  ExperimentConfig cfg;
  cfg.snr_db = {0.1, 7.25, 1.0 / 3.0};
  cfg.alpha = 0.99;
  cfg.schemes = {Scheme::JpaisIpc, Scheme::Ncis};
  cfg.variant = Variant::Adaptive;
  cfg.seed = 18446744073709551615ULL;
  CHECK(parse_config(emit_config(cfg)) == cfg);
}

TEST_CASE("later settings override earlier ones") {
  const ExperimentConfig base = parse_config("users = 3\ntrials = 5\n");
  const ExperimentConfig c = apply_settings(base, {{"trials", "7"}});
  CHECK(c.dims.users == 3);
  CHECK(c.trials == 7);
}

TEST_CASE("numbers keep 17 significant digits") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_number(12.0) == "12");
}

TEST_CASE("csv has the fixed header and one row per point") {
  BerCurve c;
  c.x_name = "snr_db";
  c.scheme = Scheme::JpaisGpc;
  c.rows.push_back({12.0, 0.001, 0.0002, 4000, 0});
  const std::string csv = curves_to_csv({c});
  CHECK(csv ==
        "x_name,x_value,scheme,variant,ber_mean,ber_stderr,bit_count\n"
        "snr_db,12,JPAIS-GPC,exact,0.001,0.00020000000000000001,4000\n");
}

TEST_CASE("json embeds the manifest and the resolved config") {
  BerCurve c;
  c.x_name = "users";
  c.scheme = Scheme::Cis;
  c.rows.push_back({4.0, 0.25, 0.0, 10, 1});
  RunManifest m;
  m.command = "sweep-users";
  m.divergences = divergence_counts({c});
  const auto j = nlohmann::json::parse(curves_to_json({c}, m));
  CHECK(j["manifest"]["command"] == "sweep-users");
  CHECK(j["manifest"]["version"] == kVersionTag);
  CHECK(j["manifest"]["divergences"]["CIS"] == 1);
  CHECK(j["manifest"]["config"].contains("alpha"));
  CHECK(j["rows"][0]["ber_mean"] == 0.25);
}

TEST_CASE("every result file gets a manifest next to it") {
  const auto dir = std::filesystem::temp_directory_path() / "coopcdma_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "out.csv").string();
  BerCurve c;
  c.x_name = "snr_db";
  c.rows.push_back({0.0, 0.1, 0.01, 8, 0});
  write_results({c}, RunManifest{}, path, "csv");
  CHECK(slurp(path) == curves_to_csv({c}));
  const auto m = nlohmann::json::parse(slurp(path + ".manifest.json"));
  CHECK(m["outputs"][0] == path);
  CHECK_THROWS_AS(write_results({c}, RunManifest{}, path, "xml"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical config and seed give byte-identical csv") {
  ExperimentConfig cfg = golden_config();
  cfg.threads = 1;
  const std::string a = curves_to_csv(run_snr_sweep(cfg));
  cfg.threads = 2;
  const std::string b = curves_to_csv(run_snr_sweep(cfg));
  CHECK(a == b);
}

TEST_CASE("golden sweep is unchanged") {
  const std::string golden = slurp(COOPCDMA_TEST_DATA "/golden_sweep.csv");
  REQUIRE_FALSE(golden.empty());
  CHECK(curves_to_csv(run_snr_sweep(golden_config())) == golden);
}
