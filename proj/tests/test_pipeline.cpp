#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "lpma/config.hpp"
#include "lpma/csv.hpp"
#include "lpma/pipeline.hpp"

using namespace lpma;
using testing::error_code;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = LPMA_SOURCE_DIR;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("lpma_test_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::vector<std::string>> rows_of(const fs::path& p) {
    std::ifstream in(p);
    const auto t = csv::parse(in);
    std::vector<std::vector<std::string>> out{t.header};
    out.insert(out.end(), t.rows.begin(), t.rows.end());
    return out;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse_run_config("data: {panel: p.csv}\nseed: 3\nhorizons: 4\nbandwidth: 2\n", "/base");
    CHECK(c.panel == fs::path("/base/p.csv"));
    CHECK(c.horizons == std::set<int>{1, 2, 3, 4});
    CHECK(c.bandwidth == 2);
    CHECK(c.windows.size() == 3);
    CHECK_NOTHROW(c.validate());
    CHECK(error_code([] { parse_run_config("data: {panel: p.csv}\nsede: 3\n"); }) == "config.UnknownKey");
    CHECK(error_code([] { parse_run_config("data: {panel: p.csv}\n").validate(); }) == "config.MissingSeed");
    CHECK(error_code([] { parse_run_config("seed: 1\n").validate(); }) == "config.MissingKey");
    CHECK(error_code([] { parse_run_config("regime_evaluation: median\n"); }) == "config.InvalidValue");

    const auto f = parse_run_config("factors: {r_max: 2}\nbootstrap: true\noutput_gap: false\n");
    CHECK(f.factors);
    CHECK(f.factor_r_max == 2);
    CHECK(f.bootstrap);
    CHECK(f.bootstrap_draws == 199);
    CHECK_FALSE(f.output_gap);
}

TEST_CASE("simulate config parsing") {
    const auto s = parse_simulate_config("seed: 4\nreplications: 3\ndgp: {true_form: B, n_periods: 50}\nhorizons: [1, 2]\n");
    CHECK(s.mc.seed == 4);
    CHECK(s.mc.replications == 3);
    CHECK(s.dgp.true_form == ModelForm::B);
    CHECK(s.dgp.n_periods == 50);
    CHECK(s.mc.horizons == std::set<int>{1, 2});
    CHECK(error_code([] { parse_simulate_config("replications: 3\n"); }) == "config.MissingSeed");
}

TEST_CASE("windows resolve against the panel") {
    const auto p = testing::small_panel(2, 20, 1, {2000, 1});
    CHECK(WindowConfig{"all", std::nullopt, std::nullopt}.resolve(p).last == Period{2004, 4});
    CHECK(WindowConfig{"late", Period{2003, 1}, std::nullopt}.resolve(p).first == Period{2003, 1});
    CHECK(error_code([&] { WindowConfig{"bad", Period{2003, 1}, Period{2002, 1}}.resolve(p); }) == "config.EmptyWindow");
}

TEST_CASE("small bundle matches the stored reference") {
    const auto cfg = load_run_config(kSource / "tests/golden/small.yaml");
    const auto data = prepare_data(cfg);
    const auto res = run_pipeline(cfg, data);
    CHECK(res.complete());
    const auto out = scratch("golden");
    write_bundle(res, cfg, data, out);

    for (const char* name : {"full/irf.csv", "full/weights.csv", "post1999/irf.csv"}) {
        const auto golden = kSource / "tests/golden" / name;
        if (std::getenv("LPMA_UPDATE_GOLDEN")) {
            fs::create_directories(golden.parent_path());
            fs::copy_file(out / name, golden, fs::copy_options::overwrite_existing);
        }
        REQUIRE(fs::exists(golden));
        const auto a = rows_of(out / name), b = rows_of(golden);
        REQUIRE(a.size() == b.size());
        for (std::size_t r = 0; r < a.size(); ++r) {
            REQUIRE(a[r].size() == b[r].size());
            for (std::size_t k = 0; k < a[r].size(); ++k) {
                char* end = nullptr;
                const double x = std::strtod(a[r][k].c_str(), &end);
                if (!a[r][k].empty() && *end == '\0' && a[r][k] != "nan")
                    CHECK(x == doctest::Approx(std::strtod(b[r][k].c_str(), nullptr)).epsilon(1e-8).scale(1e-8));
                else
                    CHECK(a[r][k] == b[r][k]);
            }
        }
    }
}

TEST_CASE("bundle layout, schema and window audit") {
    const auto cfg = load_run_config(kSource / "tests/golden/small.yaml");
    const auto out = scratch("layout");
    const auto data = prepare_data(cfg);
    const auto res = run_pipeline(cfg, data);
    write_bundle(res, cfg, data, out);
    for (const char* f : {"run.json", "summary.csv", "full/irf.csv", "full/weights.csv", "full/tests.csv",
                          "post1999/irf.csv", "post1999/weights.csv", "post1999/tests.csv"})
        CHECK(fs::exists(out / f));
    CHECK(rows_of(out / "full/irf.csv")[0] ==
          std::vector<std::string>{"outcome", "policy", "window", "horizon", "model", "regime", "value", "se", "boot_se"});
    CHECK(rows_of(out / "full/weights.csv")[0] ==
          std::vector<std::string>{"outcome", "policy", "horizon", "model", "weight", "criterion"});
    CHECK(rows_of(out / "full/tests.csv")[0] ==
          std::vector<std::string>{"outcome", "policy", "horizon", "prop_accept", "raw_p_summary", "adj_method",
                                   "adj_reject_frac", "verdict"});
    CHECK(rows_of(out / "summary.csv")[0] == std::vector<std::string>{"country", "series", "n", "mean", "sd"});

    const auto run = nlohmann::json::parse(slurp(out / "run.json"));
    CHECK(run["schema_version"] == kOutputSchemaVersion);
    CHECK(run["seed"] == 11);
    CHECK(run["complete"] == true);
    for (const auto& cell : run["cells"]) {
        const auto first = *parse_period(cell["window"]["first"].get<std::string>());
        const auto last = *parse_period(cell["window"]["last"].get<std::string>());
        for (const auto& h : cell["horizons"]) {
            CHECK(h["rows"].get<int>() > 0);
            CHECK(*parse_period(h["first_base_period"].get<std::string>()) >= first);
            CHECK(*parse_period(h["last_base_period"].get<std::string>()) <= last);
        }
    }
    CHECK(run["cells"][1]["window"]["first"] == "1999-Q1");

    std::map<std::string, double> wsum;
    const auto w = rows_of(out / "full/weights.csv");
    for (std::size_t r = 1; r < w.size(); ++r) wsum[w[r][2]] += std::stod(w[r][4]);
    for (const auto& [h, s] : wsum) CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reruns and thread counts give identical bundles") {
    auto cfg = load_run_config(kSource / "tests/golden/small.yaml");
    const auto a = scratch("det_a"), b = scratch("det_b");
    cfg.threads = 1;
    {
        const auto d = prepare_data(cfg);
        write_bundle(run_pipeline(cfg, d), cfg, d, a);
    }
    cfg.threads = 3;
    {
        const auto d = prepare_data(cfg);
        write_bundle(run_pipeline(cfg, d), cfg, d, b);
    }
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
}

TEST_CASE("command line errors are reported as JSON") {
    const auto out = scratch("cli_err");
    const std::string cmd = std::string(LPMA_CLI) + " run --config " + (kSource / "tests/golden/noseed.yaml").string() +
                            " --out " + out.string() + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 1);
    const auto j = nlohmann::json::parse(slurp(out / "error.json"));
    CHECK(j["error"]["code"] == "config.MissingSeed");
    CHECK(j["error"]["module"] == "config");
}

TEST_CASE("hpfilter command on a linear series") {
    const auto dir = scratch("cli_hp");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "lin.csv");
        f << "country,period,v\n";
        for (int t = 0; t < 24; ++t) f << "X," << (Period{2000, 1} + t).str() << "," << 10 + 0.5 * t << "\n";
    }
    const std::string cmd = std::string(LPMA_CLI) + " hpfilter --input " + (dir / "lin.csv").string() +
                            " --column v --out " + (dir / "hp.csv").string();
    CHECK(std::system(cmd.c_str()) == 0);
    const auto r = rows_of(dir / "hp.csv");
    REQUIRE(r.size() == 25);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(std::fabs(std::stod(r[i][4])) <= 1e-8);
}
