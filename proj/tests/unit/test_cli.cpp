#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

#include "sfcmc/distributions.hpp"
#include "sfcmc/ingest.hpp"
#include "sfcmc/sfc_model.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sfcmc;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(SFCMC_TEST_TMP) / "cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Runs the CLI with stdout and stderr captured into dir/stdout.txt and dir/stderr.txt.
int cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = std::string("\"") + SFCMC_CLI_PATH + "\" " + args + " >\"" + (dir / "stdout.txt").string() +
                            "\" 2>\"" + (dir / "stderr.txt").string() + "\"";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path reference_params(const fs::path& dir, ModelParameters p = ModelParameters::reference()) {
    const auto path = dir / "params.txt";
    std::ofstream out(path);
    write_parameter_file(out, p, 100);
    return path;
}

fs::path weight_file(const fs::path& dir, const WeightFunction& f) {
    const auto path = dir / "weight.txt";
    std::ofstream out(path);
    write_weight(out, f);
    return path;
}

}  // namespace

TEST_CASE("fit recovers a three-row Gamma table") {
    const auto dir = scratch("fit");
    const std::vector<double> grid{0.25, 0.5, 0.75};
    std::ofstream(dir / "table.csv") << [&] {
        std::ostringstream s;
        write_percentile_table(s, synthesize_table(WeightFunction::gamma(1.46, 1.55e4), grid));
        return s.str();
    }();
    REQUIRE(cli(dir, "fit --input " + q(dir / "table.csv") + " --family gamma --out-dir " + q(dir / "out")) == 0);
    const auto fitted = read_weight_file((dir / "out" / "fit.txt").string());
    const auto& g = std::get<GammaWeight>(fitted.weight.family());
    CHECK(g.shape == doctest::Approx(1.46).epsilon(0.01));
    CHECK(g.scale == doctest::Approx(1.55e4).epsilon(0.01));
    CHECK(fs::exists(dir / "out" / "fit_cdf.csv"));
    CHECK(fs::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("malformed tables exit with status 2 and a line number") {
    const auto dir = scratch("fit_bad");
    spit(dir / "bad.csv", "percentile,value\n0.5,100\n0.9,90\n0.99,300\n");
    CHECK(cli(dir, "fit --input " + q(dir / "bad.csv") + " --out-dir " + q(dir / "out")) == 2);
    CHECK(slurp(dir / "stderr.txt").find("line 3") != std::string::npos);
    CHECK(cli(dir, "fit --no-such-flag") == 2);
}

TEST_CASE("solve reports the reference steady state") {
    const auto dir = scratch("solve");
    REQUIRE(cli(dir, "solve --params " + q(reference_params(dir)) + " --nw 100 --out-dir " + q(dir)) == 0);
    const auto j = json::parse(slurp(dir / "model.json"));
    CHECK(j["constant_sum"].get<double>() == doctest::Approx(220.0).epsilon(1e-9));
    CHECK(j["aggregate_output"].get<double>() == doctest::Approx(40.0).epsilon(1e-9));
    CHECK(j["income_map"]["slope"].get<double>() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(j["rank"].get<int>() == 208);
    CHECK(j["zero_state"].get<bool>() == false);

    auto zero = ModelParameters::reference();
    zero.alpha0 = 0.0;
    const auto zdir = scratch("solve_zero");
    REQUIRE(cli(zdir, "solve --params " + q(reference_params(zdir, zero)) + " --nw 10 --out-dir " + q(zdir)) == 0);
    const auto z = json::parse(slurp(zdir / "model.json"));
    CHECK(z["zero_state"].get<bool>());
    CHECK(z["constant_sum"].get<double>() == 0.0);

    auto bad = ModelParameters::reference();
    bad.alpha2 = 0.05;
    const auto bdir = scratch("solve_bad");
    CHECK(cli(bdir, "solve --params " + q(reference_params(bdir, bad)) + " --out-dir " + q(bdir)) == 2);
}

TEST_CASE("mu solves the exponential case and refuses condensed densities") {
    const auto dir = scratch("mu");
    REQUIRE(cli(dir, "mu --fit " + q(weight_file(dir, WeightFunction::gamma(1.0, 1.0))) + " --rho 0.5 --out-dir " +
                         q(dir)) == 0);
    const auto j = json::parse(slurp(dir / "phase.json"));
    CHECK(j["mu"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fs::exists(dir / "marginal.csv"));

    REQUIRE(cli(dir, "mu --fit " + q(dir / "weight.txt") + " --rho 1 --out-dir " + q(dir)) == 0);
    CHECK(json::parse(slurp(dir / "phase.json"))["mu"].get<double>() == 0.0);

    const auto pdir = scratch("mu_condensed");
    CHECK(cli(pdir, "mu --fit " + q(weight_file(pdir, WeightFunction::power_law(2.5, 1.0))) + " --rho 6 --out-dir " +
                        q(pdir)) == 3);
}

TEST_CASE("sample writes chains, diagnostics and a histogram") {
    const auto dir = scratch("sample");
    REQUIRE(cli(dir, "sample --uniform --sum 1 --n 5 --thin 10 --samples 200 --seed 4 --chains 2 --out-dir " +
                         q(dir)) == 0);
    for (const char* name : {"chain_4.csv", "chain_5.csv", "chain.csv", "diagnostics.json", "histogram.csv"})
        CHECK(fs::exists(dir / name));
    const auto j = json::parse(slurp(dir / "diagnostics.json"));
    CHECK(j["samples"].get<int>() == 400);
    CHECK(j["rejection_rate"].get<double>() == 0.0);

    const auto pdir = scratch("sample_condensed");
    CHECK(cli(pdir, "sample --fit " + q(weight_file(pdir, WeightFunction::power_law(2.5, 1.0))) +
                        " --sum 60 --n 10 --seed 1 --out-dir " + q(pdir)) == 3);
}

TEST_CASE("sample without a seed records the generated one") {
    const auto dir = scratch("sample_seedless");
    REQUIRE(cli(dir, "sample --uniform --sum 1 --n 3 --thin 2 --samples 5 --out-dir " + q(dir)) == 0);
    const auto m = json::parse(slurp(dir / "manifest.json"));
    REQUIRE(m.contains("seed"));
    CHECK(fs::exists(dir / ("chain_" + std::to_string(m["seed"].get<std::uint64_t>()) + ".csv")));
}

TEST_CASE("rerun from a manifest reproduces outputs bit for bit") {
    const auto dir = scratch("rerun");
    const auto f = weight_file(dir, WeightFunction::lognormal(1.72, 1.0));
    REQUIRE(cli(dir, "sample --fit " + q(f) + " --sum 50 --n 20 --match-mean --thin 50 --samples 100 --chains 2 "
                     "--binary --out-dir " + q(dir / "first")) == 0);
    REQUIRE(cli(dir, "rerun --manifest " + q(dir / "first" / "manifest.json") + " --out-dir " + q(dir / "second")) == 0);
    const auto manifest = json::parse(slurp(dir / "first" / "manifest.json"));
    for (const auto& name : manifest["outputs"]) {
        INFO(name.get<std::string>());
        CHECK(slurp(dir / "first" / name.get<std::string>()) == slurp(dir / "second" / name.get<std::string>()));
    }
    CHECK(manifest["outputs"].size() == 5);
}

TEST_CASE("estimate flags tables in different units") {
    const auto dir = scratch("estimate");
    const auto p = ModelParameters::reference();
    const auto wealth = WeightFunction::lognormal(1.2, 3e4);
    const auto grid = percentile_grid(0.1, 0.9, 0.1);
    auto wt = synthesize_table(wealth, grid);
    wt.unit = "EUR";
    PercentileTable it;
    const double scale = 3e4 / 2.2;
    for (double g : grid) it.rows.push_back({g, scale * 0.004 + 0.05 * wealth.quantile(g)});
    it.unit = "USD";
    std::ofstream(dir / "wealth.csv") << [&] { std::ostringstream s; write_percentile_table(s, wt); return s.str(); }();
    std::ofstream(dir / "income.csv") << [&] { std::ostringstream s; write_percentile_table(s, it); return s.str(); }();
    REQUIRE(cli(dir, "estimate --income " + q(dir / "income.csv") + " --wealth " + q(dir / "wealth.csv") +
                         " --params " + q(reference_params(dir)) + " --starts 4 --seed 1 --out-dir " + q(dir)) == 0);
    const auto j = json::parse(slurp(dir / "estimation.json"));
    bool mismatch = false;
    for (const auto& w : j["warnings"]) mismatch = mismatch || w.get<std::string>().find("unit mismatch") != std::string::npos;
    CHECK(mismatch);
    CHECK(j["residual"].get<double>() < 1e-6);
}
