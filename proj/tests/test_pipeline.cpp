#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcft/errors.hpp"
#include "hcft/pipeline.hpp"

using namespace hcft;
namespace fs = std::filesystem;

namespace {

std::vector<Bag> small_cohort(std::uint64_t seed) {
    CohortSpec spec;
    spec.n_classes = 2;
    spec.bags_per_class = {8, 8};
    spec.bag_size_min = 20;
    spec.bag_size_max = 30;
    spec.positive_fraction_lo = 0.15;
    spec.positive_fraction_hi = 0.3;
    spec.seed = seed;
    auto bags = generate_cohort(spec);
    split_cohort(bags, {0.5, 0.25, 0.25}, seed + 1);
    return bags;
}

RunConfig quick_config(const std::string& out_dir) {
    RunConfig cfg;
    cfg.k0 = 5;
    cfg.n_clusters = 3;
    cfg.d_emb = 8;
    cfg.d_att = 4;
    cfg.d_hid = 8;
    cfg.mil.max_epochs = 15;
    cfg.mil.patience = 15;
    cfg.encoder.max_epochs = 10;
    cfg.encoder.batch_size = 32;
    cfg.seed = 9;
    cfg.out_dir = out_dir;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config map round trip and error paths") {
    RunConfig cfg;
    cfg.k0 = 17;
    cfg.theta = 0.625;
    cfg.warm_start_mil = true;
    auto m = cfg.to_map();
    RunConfig back;
    for (const auto& [k, v] : m) back.apply(k, v);
    CHECK(back.k0 == 17);
    CHECK(back.theta == doctest::Approx(0.625));
    CHECK(back.warm_start_mil);
    CHECK(back.to_map() == m);

    CHECK_THROWS_AS(cfg.apply("no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.apply("k0", "banana"), ConfigError);
}

TEST_CASE("config file parsing with comments and blank lines") {
    std::string path = (fs::temp_directory_path() / "hcft_cfg_test.conf").string();
    std::ofstream(path) << "# a comment\n"
                        << "\n"
                        << "k0 = 12   # trailing comment\n"
                        << "theta = 0.75\n"
                        << "out_dir = /tmp/somewhere\n";
    RunConfig cfg = RunConfig::from_file(path);
    CHECK(cfg.k0 == 12);
    CHECK(cfg.theta == doctest::Approx(0.75));
    CHECK(cfg.out_dir == "/tmp/somewhere");

    std::ofstream(path) << "this line has no equals sign\n";
    CHECK_THROWS_AS(RunConfig::from_file(path), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/nope.conf"), ConfigError);
}

TEST_CASE("round report accessors and csv shape") {
    RoundReport rep;
    rep.round = 2;
    rep.put("alpha", 0.5);
    rep.put("beta", 1.25);
    CHECK(rep.get("alpha") == 0.5);
    CHECK_THROWS_AS(rep.get("gamma"), DataError);
    std::string path = (fs::temp_directory_path() / "hcft_rep_test.csv").string();
    rep.write_csv(path);
    CHECK(slurp(path) == "metric,value\nround,2\nalpha,0.5\nbeta,1.25\n");
}

TEST_CASE("zero refinement rounds yields a single round-0 report") {
    auto bags = small_cohort(21);
    RunConfig cfg = quick_config("");
    cfg.iterations = 0;
    RunResult res = run_pipeline(cfg, bags, /*write_outputs=*/false);
    REQUIRE(res.reports.size() == 1);
    const RoundReport& rep = res.reports[0];
    CHECK(rep.round == 0);
    double auc = rep.get("val_bag_auc");
    CHECK(auc >= 0.0);
    CHECK(auc <= 1.0);
    rep.get("test_bag_acc");
    rep.get("patch_f1");
}

TEST_CASE("refinement rounds add the bookkeeping metrics") {
    auto bags = small_cohort(22);
    RunConfig cfg = quick_config("");
    cfg.iterations = 1;
    cfg.round_patience = 5;
    RunResult res = run_pipeline(cfg, bags, /*write_outputs=*/false);
    REQUIRE(res.reports.size() == 2);
    const RoundReport& r1 = res.reports[1];
    CHECK(r1.get("th_initial") > 0.0);
    CHECK(r1.get("dstar_size") > 0.0);
    CHECK(r1.get("th_cleaned") <= r1.get("th_initial"));
    // D* histogram covers 2n-1 = 3 classes
    double total = r1.get("dstar_class_0") + r1.get("dstar_class_1") + r1.get("dstar_class_2");
    CHECK(total == r1.get("dstar_size"));
}

TEST_CASE("pipeline is deterministic in memory") {
    auto bags = small_cohort(23);
    RunConfig cfg = quick_config("");
    cfg.iterations = 1;
    cfg.round_patience = 5;
    RunResult a = run_pipeline(cfg, bags, false);
    RunResult b = run_pipeline(cfg, bags, false);
    REQUIRE(a.reports.size() == b.reports.size());
    for (std::size_t r = 0; r < a.reports.size(); ++r)
        CHECK(a.reports[r].metrics == b.reports[r].metrics);
    CHECK(a.mil.flatten() == b.mil.flatten());
    CHECK(a.encoder.flatten() == b.encoder.flatten());
}

TEST_CASE("resume recomputes a deleted round byte-identically") {
    auto bags = small_cohort(24);
    std::string out = (fs::temp_directory_path() / "hcft_resume_test").string();
    fs::remove_all(out);
    RunConfig cfg = quick_config(out);
    cfg.iterations = 1;
    cfg.round_patience = 5;
    run_pipeline(cfg, bags, /*write_outputs=*/true);
    std::string original = slurp(out + "/round_1/report.csv");
    REQUIRE(!original.empty());

    fs::remove_all(out + "/round_1");
    run_pipeline(cfg, bags, /*write_outputs=*/true, /*resume=*/true);
    CHECK(slurp(out + "/round_1/report.csv") == original);
}

TEST_CASE("sweep covers the grid and records per-cell reports") {
    auto bags = small_cohort(25);
    std::string out = (fs::temp_directory_path() / "hcft_sweep_test").string();
    fs::remove_all(out);
    RunConfig cfg = quick_config(out);
    cfg.iterations = 1;
    cfg.round_patience = 5;
    auto rows = sweep(cfg, {5}, {2, 3}, bags);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.ok);
        CHECK(row.final_report.get("val_bag_auc") >= 0.0);
    }
    CHECK(fs::exists(out + "/k0_5_c2/round_1/report.csv"));
    CHECK(fs::exists(out + "/k0_5_c3/round_1/report.csv"));
}

TEST_CASE("missing splits are rejected") {
    auto bags = small_cohort(26);
    for (auto& b : bags) b.split = Split::Train;
    RunConfig cfg = quick_config("");
    CHECK_THROWS_AS(run_pipeline(cfg, bags, false), DataError);
}
