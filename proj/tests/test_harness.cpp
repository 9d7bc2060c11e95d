#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "collapsim/harness.hpp"

using namespace collapsim;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("collapsim_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("registry lists the nine experiments") {
    const std::vector<std::string> expected = {
        "grw1d",        "flash-chain",     "dilation",      "covariance", "microcausality",
        "bell-noncompare", "factorization", "amplification", "fock-macro"};
    CHECK(experiment_names() == expected);
    for (const std::string& name : expected) {
        CHECK(!experiment_params(name).empty());
        CHECK(!experiment_tolerances(name).empty());
        CHECK(default_trials(name) >= 1);
    }
}

TEST_CASE("strict config parsing names the offending field") {
    using doctest::Contains;
    ExperimentConfig cfg;
    cfg.experiment = "grw1d";
    CHECK_THROWS_WITH(set_param(cfg, "tau", "-1.0"), Contains("'tau'"));
    CHECK_THROWS_WITH(set_param(cfg, "tau", "abc"), Contains("'tau'"));
    CHECK_THROWS_WITH(set_param(cfg, "bogus", "1.0"), Contains("'bogus'"));
    CHECK_THROWS_WITH(set_param(cfg, "trials", "0"), Contains("'trials'"));
    set_param(cfg, "tau", "2.5");
    CHECK(cfg.params.at("tau") == 2.5);

    ExperimentConfig bad;
    bad.experiment = "not-an-experiment";
    bad.trials = 1;
    CHECK_THROWS_WITH((void)run(bad), Contains("unknown experiment"));
}

TEST_CASE("config files parse flat key = value text") {
    const std::string dir = temp_dir("config");
    const std::string path = dir + "/run.cfg";
    {
        std::ofstream out(path);
        out << "# comment line\n"
            << "experiment = grw1d\n"
            << "seed = 99\n"
            << "trials = 40\n"
            << "tau = 1.5   # trailing comment\n";
    }
    ExperimentConfig cfg = parse_config_file(path);
    CHECK(cfg.experiment == "grw1d");
    CHECK(cfg.seed == 99);
    CHECK(cfg.trials == 40);
    CHECK(cfg.params.at("tau") == 1.5);

    {
        std::ofstream out(path);
        out << "experiment = grw1d\nnot a key value line\n";
    }
    CHECK_THROWS(parse_config_file(path));
}

TEST_CASE("run writes summary.json and artifacts; reruns are bit-identical") {
    ExperimentConfig cfg;
    cfg.experiment = "grw1d";
    cfg.seed = 7;
    cfg.trials = 60;
    cfg.out_dir = temp_dir("grw_a");
    RunSummary first = run(cfg);
    CHECK(first.passed);
    CHECK(fs::exists(cfg.out_dir + "/summary.json"));
    CHECK(fs::exists(cfg.out_dir + "/flashes.csv"));

    ExperimentConfig cfg2 = cfg;
    cfg2.out_dir = temp_dir("grw_b");
    RunSummary second = run(cfg2);

    nlohmann::ordered_json a = first.json, b = second.json;
    a.erase("timestamp");
    b.erase("timestamp");
    CHECK(a.dump() == b.dump());
    CHECK(slurp(cfg.out_dir + "/flashes.csv") == slurp(cfg2.out_dir + "/flashes.csv"));

    // summary schema pins
    CHECK(first.json.contains("experiment"));
    CHECK(first.json.contains("version"));
    CHECK(first.json.contains("config"));
    CHECK(first.json.contains("metrics"));
    CHECK(first.json.contains("checks"));
    CHECK(first.json.contains("passed"));
    CHECK(first.json.contains("timestamp"));
    CHECK(first.json["config"]["seed"] == 7);
}

TEST_CASE("a different seed changes the samples") {
    ExperimentConfig cfg;
    cfg.experiment = "grw1d";
    cfg.seed = 7;
    cfg.trials = 40;
    cfg.out_dir = temp_dir("grw_c");
    RunSummary a = run(cfg);
    cfg.seed = 8;
    cfg.out_dir = temp_dir("grw_d");
    RunSummary b = run(cfg);
    CHECK(a.json["metrics"]["mean_interval"] != b.json["metrics"]["mean_interval"]);
}

TEST_CASE("dilation emits the pinned table schema") {
    ExperimentConfig cfg;
    cfg.experiment = "dilation";
    cfg.seed = 1;
    cfg.trials = 40;  // small smoke run; the acceptance suite runs it in full
    cfg.out_dir = temp_dir("dilation");
    (void)run(cfg);
    const std::string csv = slurp(cfg.out_dir + "/dilation.csv");
    CHECK(csv.substr(0, csv.find('\n')) == "eta,mean_dt,ci_lo,ci_hi");
}

TEST_CASE("fock-macro summary carries the report and passes") {
    ExperimentConfig cfg;
    cfg.experiment = "fock-macro";
    cfg.seed = 1;
    cfg.trials = 1;
    cfg.out_dir = temp_dir("fock");
    RunSummary s = run(cfg);
    CHECK(s.passed);
    CHECK(s.json["metrics"]["n_total_eigenvalue"] == 4.0);
    CHECK(s.json["metrics"]["earliest_flash_far_branch"] == 24.0);
}
