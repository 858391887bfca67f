// sfcmc: command-line driver for the constant-sum wealth model.
//
//   sfcmc fit      --input table.csv --family lognormal --out-dir out/
//   sfcmc solve    --params model.txt --nw 100 --out-dir out/
//   sfcmc mu       --fit out/fit.txt --rho 2.2 --out-dir out/
//   sfcmc sample   --fit out/fit.txt --params model.txt --nw 100 --match-mean --seed 7 --out-dir out/
//   sfcmc estimate --income inc.csv --wealth wealth.csv --params model.txt --out-dir out/
//   sfcmc rerun    --manifest out/manifest.json [--out-dir other/]
//
// Every command writes manifest.json next to its outputs. The manifest holds
// the fully materialized argument list, so `rerun` reproduces a run exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sfcmc/distributions.hpp"
#include "sfcmc/errors.hpp"
#include "sfcmc/estimation.hpp"
#include "sfcmc/ingest.hpp"
#include "sfcmc/keyvalue.hpp"
#include "sfcmc/mass_transport.hpp"
#include "sfcmc/sampler.hpp"
#include "sfcmc/sfc_model.hpp"
#include "sfcmc/stats.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { Ok = 0, InputError = 2, Refused = 3, Internal = 4 };

struct RunRecord {
    std::string command;
    std::vector<std::string> argv;  // materialized, without the program name
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::optional<std::uint64_t> seed;
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sfcmc::ParameterDomainError("cannot write '" + path.string() + "'");
    return out;
}

void write_manifest(const fs::path& dir, const RunRecord& run) {
    json j;
    j["tool"] = "sfcmc";
    j["version"] = kVersion;
    j["command"] = run.command;
    j["argv"] = run.argv;
    j["inputs"] = run.inputs;
    j["outputs"] = run.outputs;
    if (run.seed) j["seed"] = *run.seed;
    auto out = open_output(dir / "manifest.json");
    out << j.dump(2) << '\n';
}

// Every option of `sub`, defaults included, as a flat argument list.
std::vector<std::string> materialize(const CLI::App& sub) {
    std::vector<std::string> argv{sub.get_name()};
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_name(false, true);
        if (name.empty() || name == "--help" || name == "-h") continue;
        const std::string flag = opt->get_lnames().empty() ? name : "--" + opt->get_lnames().front();
        if (opt->get_expected_max() == 0) {
            if (opt->count() > 0) argv.push_back(flag);
            continue;
        }
        if (opt->count() > 0) {
            for (const auto& r : opt->results()) {
                argv.push_back(flag);
                argv.push_back(r);
            }
        } else if (!opt->get_default_str().empty()) {
            argv.push_back(flag);
            argv.push_back(opt->get_default_str());
        }
    }
    return argv;
}

void replace_value(std::vector<std::string>& argv, const std::string& flag, const std::string& value) {
    for (std::size_t i = 0; i + 1 < argv.size(); ++i)
        if (argv[i] == flag) {
            argv[i + 1] = value;
            return;
        }
    argv.push_back(flag);
    argv.push_back(value);
}

std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// ---- fit ----------------------------------------------------------------

struct FitArgs {
    std::string input;
    std::string family = "lognormal";
    std::string units = "auto";
    std::string out_dir = ".";
};

sfcmc::LoadOptions load_options(const std::string& units) {
    sfcmc::LoadOptions o;
    if (units == "fraction")
        o.units = sfcmc::PercentileUnits::Fraction;
    else if (units == "percent")
        o.units = sfcmc::PercentileUnits::Percent;
    else if (units != "auto")
        throw sfcmc::ParameterDomainError("unknown --units '" + units + "'");
    return o;
}

void run_fit(const FitArgs& a, RunRecord& run) {
    const auto table = sfcmc::load_percentile_table_file(a.input, load_options(a.units));
    const auto fitted = sfcmc::fit_to_percentiles(table, sfcmc::parse_fit_family(a.family));
    const fs::path dir(a.out_dir);
    auto out = open_output(dir / "fit.txt");
    sfcmc::write_weight(out, fitted.weight, fitted.residual);

    auto cdf_out = open_output(dir / "fit_cdf.csv");
    cdf_out << "threshold,percentile,fitted_cdf\n";
    for (const auto& row : table.rows)
        cdf_out << sfcmc::format_double(row.threshold) << ',' << sfcmc::format_double(row.percentile) << ','
                << sfcmc::format_double(fitted.weight.cdf(row.threshold)) << '\n';

    run.inputs = {a.input};
    run.outputs = {"fit.txt", "fit_cdf.csv"};
    std::cout << "fitted " << fitted.weight.family_name() << " (residual " << sfcmc::format_double(fitted.residual)
              << ") -> " << (dir / "fit.txt").string() << '\n';
}

// ---- solve --------------------------------------------------------------

struct SolveArgs {
    std::string params;
    std::size_t nw = 0;
    std::string out_dir = ".";
};

void run_solve(const SolveArgs& a, RunRecord& run) {
    const auto file = sfcmc::read_parameter_file(a.params);
    const std::size_t nw = a.nw ? a.nw : file.nw.value_or(100);
    const auto& p = file.params;
    p.validate(nw);

    json j;
    j["nw"] = nw;
    j["constant_sum"] = sfcmc::constant_sum(p, nw);
    j["aggregate_output"] = sfcmc::aggregate_output(p, nw);
    j["denominator"] = p.denominator();
    const auto map = sfcmc::wealth_income_map(p);
    j["income_map"] = {{"intercept", map.intercept}, {"slope", map.slope}};
    j["zero_state"] = p.alpha0_total(nw) == 0.0;

    const auto reduced = sfcmc::reduce(sfcmc::build_steady_state_system(p, nw));
    j["rank"] = reduced.rank();
    j["unknowns"] = reduced.unknowns();
    j["solution_dimension"] = reduced.solution_dimension();
    std::vector<std::string> free_names;
    for (auto c : reduced.free_columns) free_names.push_back(reduced.labels[c].name());
    j["free_variables"] = free_names;
    j["constant_sum_row"] = {{"coefficients", reduced.constant_sum_row.coefficients},
                             {"rhs", reduced.constant_sum_row.rhs}};

    const fs::path dir(a.out_dir);
    auto out = open_output(dir / "model.json");
    out << j.dump(2) << '\n';

    auto rref = open_output(dir / "rref.csv");
    for (std::size_t c = 0; c < reduced.labels.size(); ++c) rref << reduced.labels[c].name() << ',';
    rref << "rhs\n";
    for (std::size_t r = 0; r < reduced.rref.rows(); ++r) {
        for (std::size_t c = 0; c < reduced.rref.cols(); ++c)
            rref << (c ? "," : "") << sfcmc::format_double(reduced.rref(r, c));
        rref << '\n';
    }
    run.inputs = {a.params};
    run.outputs = {"model.json", "rref.csv"};
    std::cout << "sum M = " << sfcmc::format_double(j["constant_sum"].get<double>())
              << ", Y = " << sfcmc::format_double(j["aggregate_output"].get<double>())
              << ", WB = " << sfcmc::format_double(map.intercept) << " + " << sfcmc::format_double(map.slope)
              << " M\n";
}

// ---- mu -----------------------------------------------------------------

struct MuArgs {
    std::string fit;
    double rho = 0.0;
    std::size_t points = 512;
    std::string out_dir = ".";
};

void run_mu(const MuArgs& a, RunRecord& run) {
    const auto f = sfcmc::read_weight_file(a.fit).weight;
    const auto report = sfcmc::phase_report(f, a.rho);
    const fs::path dir(a.out_dir);
    {
        auto out = open_output(dir / "phase.json");
        sfcmc::write_phase_report_json(out, report);
    }
    run.inputs = {a.fit};
    run.outputs = {"phase.json"};
    if (!report.mu) {
        // Surface the refusal with its own diagnostic.
        sfcmc::solve_chemical_potential(f, a.rho);
    }
    const auto p = sfcmc::marginal(f, *report.mu);
    const double upper = std::isfinite(f.support_upper()) ? f.support_upper() : std::max(p.mean(), a.rho) * 10.0;
    auto out = open_output(dir / "marginal.csv");
    sfcmc::write_marginal_csv(out, p, f.support_lower(), upper, a.points);
    run.outputs.push_back("marginal.csv");
    std::cout << "phase " << sfcmc::to_string(report.phase) << ", mu = " << sfcmc::format_double(*report.mu) << '\n';
}

// ---- sample -------------------------------------------------------------

struct SampleArgs {
    std::string fit;
    bool uniform = false;
    std::string params;
    std::size_t nw = 0;
    double sum = 0.0;
    std::size_t n = 0;
    bool match_mean = false;
    std::string scheme = "hd";
    std::uint64_t thin = 1000;
    std::int64_t burn_in = -1;
    std::uint64_t chain_length = 0;
    std::uint64_t samples = 1000;
    std::uint64_t seed = 0;
    std::size_t chains = 1;
    bool binary = false;
    std::size_t bins = 100;
    std::string out_dir = ".";
};

void run_sample(const SampleArgs& a, RunRecord& run) {
    sfcmc::ConstraintSet cs;
    if (!a.params.empty()) {
        const auto file = sfcmc::read_parameter_file(a.params);
        cs.dimension = a.nw ? a.nw : file.nw.value_or(100);
        cs.total = sfcmc::constant_sum(file.params, cs.dimension);
        run.inputs.push_back(a.params);
    } else {
        cs.total = a.sum;
        cs.dimension = a.n;
    }
    cs.validate();

    std::optional<sfcmc::WeightFunction> f;
    if (a.uniform) {
        f = sfcmc::WeightFunction::uniform(cs.total);
    } else {
        if (a.fit.empty()) throw sfcmc::ParameterDomainError("sample: --fit or --uniform is required");
        f = sfcmc::read_weight_file(a.fit).weight;
        run.inputs.push_back(a.fit);
        if (a.match_mean) f = f->with_mean(cs.barycenter_value());
    }

    sfcmc::SamplerConfig config;
    config.scheme = sfcmc::parse_direction_scheme(a.scheme);
    config.thinning = a.thin;
    if (a.burn_in >= 0) config.burn_in = static_cast<std::uint64_t>(a.burn_in);
    config.chain_length = a.chain_length ? a.chain_length
                                         : sfcmc::SamplerConfig::length_for(a.samples, a.thin,
                                                                            config.resolved_burn_in(cs.dimension));
    std::vector<std::uint64_t> seeds(std::max<std::size_t>(a.chains, 1));
    for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k] = a.seed + k;

    const auto chains = sfcmc::run_chains(*f, cs, config, seeds);
    const auto merged = sfcmc::merge_chains(chains);
    const fs::path dir(a.out_dir);

    for (const auto& c : chains) {
        const std::string name = "chain_" + std::to_string(c.seed) + (a.binary ? ".bin" : ".csv");
        auto out = open_output(dir / name);
        if (a.binary)
            sfcmc::write_chain_binary(out, c);
        else
            sfcmc::write_chain_csv(out, c);
        run.outputs.push_back(name);
    }
    {
        auto out = open_output(dir / "chain.csv");
        sfcmc::write_chain_csv(out, merged);
        run.outputs.push_back("chain.csv");
    }

    const auto diag = sfcmc::diagnostics(merged, &*f);
    json j;
    j["scheme"] = sfcmc::to_string(config.scheme);
    j["dimension"] = cs.dimension;
    j["total"] = cs.total;
    j["weight"] = f->family_name();
    j["phase"] = sfcmc::to_string(sfcmc::classify_phase(*f, cs.barycenter_value()));
    j["chain_length"] = config.chain_length;
    j["burn_in"] = config.resolved_burn_in(cs.dimension);
    j["thinning"] = config.thinning;
    j["seeds"] = seeds;
    j["samples"] = diag.samples;
    j["proposals"] = diag.proposals;
    j["acceptances"] = diag.acceptances;
    j["rejection_rate"] = diag.rejection_rate;
    j["degenerate_chords"] = diag.degenerate_chords;
    j["expected_coordinate_mean"] = diag.expected_coordinate_mean;
    j["max_mean_z"] = diag.max_mean_z;
    json acf = json::array();
    for (const auto& [lag, value] : diag.autocorrelation) acf.push_back({{"lag", lag}, {"value", value}});
    j["autocorrelation"] = acf;
    if (diag.ks_to_weight) j["ks_to_weight"] = *diag.ks_to_weight;
    if (merged.size() > 0) {
        const auto cond = sfcmc::condensate_statistic(merged);
        j["max_share"] = {{"mean", cond.mean}, {"p99", cond.p99}};
    }
    j["warnings"] = merged.warnings;
    {
        auto out = open_output(dir / "diagnostics.json");
        out << j.dump(2) << '\n';
        run.outputs.push_back("diagnostics.json");
    }

    if (merged.size() > 0) {
        double upper = std::isfinite(f->support_upper()) ? std::min(f->support_upper(), cs.total) : f->quantile(0.995);
        upper = std::min(upper, cs.total);
        const auto h = sfcmc::stats::histogram(merged.samples, 0.0, upper, a.bins);
        auto out = open_output(dir / "histogram.csv");
        out << "m,density,weight_pdf\n";
        for (std::size_t b = 0; b < h.density.size(); ++b)
            out << sfcmc::format_double(h.center(b)) << ',' << sfcmc::format_double(h.density[b]) << ','
                << sfcmc::format_double(f->pdf(h.center(b))) << '\n';
        run.outputs.push_back("histogram.csv");
    }
    for (const auto& w : merged.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << diag.samples << " samples, rejection rate " << sfcmc::format_double(diag.rejection_rate);
    if (diag.ks_to_weight) std::cout << ", KS to weight " << sfcmc::format_double(*diag.ks_to_weight);
    std::cout << '\n';
}

// ---- estimate -----------------------------------------------------------

struct EstimateArgs {
    std::string income;
    std::string wealth;
    std::string params;
    std::string family = "lognormal";
    std::string units = "auto";
    std::size_t nw = 100;
    std::size_t starts = 16;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

void run_estimate(const EstimateArgs& a, RunRecord& run) {
    const auto opts = load_options(a.units);
    const auto wealth_table = sfcmc::load_percentile_table_file(a.wealth, opts);
    sfcmc::EstimationProblem problem{
        .wealth_fit = sfcmc::fit_to_percentiles(wealth_table, sfcmc::parse_fit_family(a.family)).weight,
        .income_table = sfcmc::load_percentile_table_file(a.income, opts),
        .fixed = sfcmc::read_parameter_file(a.params).params,
        .nw = a.nw,
        .bounds = {},
        .starts = a.starts,
        .seed = a.seed,
        .execution = sfcmc::Execution::Parallel};

    std::vector<std::string> warnings;
    if (wealth_table.unit != problem.income_table.unit)
        warnings.push_back("unit mismatch: wealth table unit '" + wealth_table.unit + "' vs income table unit '" +
                           problem.income_table.unit + "'");

    const auto result = sfcmc::estimate_parameters(problem);
    std::ostringstream body;
    sfcmc::write_estimation_json(body, result);
    json j = json::parse(body.str());
    j["wealth_fit"] = {{"family", problem.wealth_fit.family_name()}};
    if (result.flat) warnings.push_back("objective is flat along some direction: parameters are only partly identified");
    j["warnings"] = warnings;

    const fs::path dir(a.out_dir);
    auto out = open_output(dir / "estimation.json");
    out << j.dump(2) << '\n';
    run.inputs = {a.income, a.wealth, a.params};
    run.outputs = {"estimation.json"};
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "residual " << sfcmc::format_double(result.residual) << ", alpha = ("
              << sfcmc::format_double(result.params.alpha0) << ", " << sfcmc::format_double(result.params.alpha1)
              << ", " << sfcmc::format_double(result.params.alpha2) << ")\n";
}

int exit_code(const sfcmc::Error& e) {
    switch (e.kind()) {
        case sfcmc::ErrorKind::Input: return InputError;
        case sfcmc::ErrorKind::Refusal: return Refused;
        case sfcmc::ErrorKind::Numeric: return Internal;
    }
    return Internal;
}

int dispatch(std::vector<std::string> args, std::optional<std::string> out_dir_override = {});

int run_main(std::vector<std::string> args) {
    CLI::App app{"Constant-sum wealth model: reduction, fitting, sampling and estimation", "sfcmc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "fit a weight function to a percentile table");
    c_fit->add_option("--input", fit.input, "percentile CSV")->required()->check(CLI::ExistingFile);
    c_fit->add_option("--family", fit.family, "gamma, lognormal or power_law")->capture_default_str();
    c_fit->add_option("--units", fit.units, "auto, fraction or percent")->capture_default_str();
    c_fit->add_option("--out-dir", fit.out_dir)->capture_default_str();

    SolveArgs solve;
    auto* c_solve = app.add_subcommand("solve", "reduce the steady-state system");
    c_solve->add_option("--params", solve.params, "parameter file")->required()->check(CLI::ExistingFile);
    c_solve->add_option("--nw", solve.nw, "number of households (0: from the file, else 100)")->capture_default_str();
    c_solve->add_option("--out-dir", solve.out_dir)->capture_default_str();

    MuArgs mu;
    auto* c_mu = app.add_subcommand("mu", "chemical potential and grand-canonical marginal");
    c_mu->add_option("--fit", mu.fit, "distribution file")->required()->check(CLI::ExistingFile);
    c_mu->add_option("--rho", mu.rho, "money per site")->required();
    c_mu->add_option("--points", mu.points)->capture_default_str();
    c_mu->add_option("--out-dir", mu.out_dir)->capture_default_str();

    SampleArgs sample;
    auto* c_sample = app.add_subcommand("sample", "hit-and-run sampling on the constant-sum simplex");
    c_sample->add_option("--fit", sample.fit, "distribution file");
    c_sample->add_flag("--uniform", sample.uniform, "constant weight on [0, S]");
    c_sample->add_option("--params", sample.params, "parameter file giving S = constant sum");
    c_sample->add_option("--nw", sample.nw, "households (with --params)")->capture_default_str();
    c_sample->add_option("--sum", sample.sum, "explicit S")->capture_default_str();
    c_sample->add_option("--n", sample.n, "explicit N")->capture_default_str();
    c_sample->add_flag("--match-mean", sample.match_mean, "rescale the weight so its mean is S/N");
    c_sample->add_option("--scheme", sample.scheme, "hd or cd")->capture_default_str();
    c_sample->add_option("--thin", sample.thin)->capture_default_str();
    c_sample->add_option("--burn-in", sample.burn_in, "-1: 10 N")->capture_default_str();
    c_sample->add_option("--chain-length", sample.chain_length, "0: from --samples")->capture_default_str();
    c_sample->add_option("--samples", sample.samples, "emitted samples per chain")->capture_default_str();
    auto* sample_seed = c_sample->add_option("--seed", sample.seed);
    c_sample->add_option("--chains", sample.chains)->capture_default_str();
    c_sample->add_flag("--binary", sample.binary, "per-chain files in binary form");
    c_sample->add_option("--bins", sample.bins)->capture_default_str();
    c_sample->add_option("--out-dir", sample.out_dir)->capture_default_str();

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "estimate alpha0, alpha1, alpha2 from income and wealth tables");
    c_est->add_option("--income", est.income)->required()->check(CLI::ExistingFile);
    c_est->add_option("--wealth", est.wealth)->required()->check(CLI::ExistingFile);
    c_est->add_option("--params", est.params, "fixed r, delta, k (alpha0 seeds the search)")
        ->required()
        ->check(CLI::ExistingFile);
    c_est->add_option("--family", est.family)->capture_default_str();
    c_est->add_option("--units", est.units)->capture_default_str();
    c_est->add_option("--nw", est.nw)->capture_default_str();
    c_est->add_option("--starts", est.starts)->capture_default_str();
    auto* est_seed = c_est->add_option("--seed", est.seed);
    c_est->add_option("--out-dir", est.out_dir)->capture_default_str();

    std::string manifest;
    std::string rerun_out;
    auto* c_rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
    c_rerun->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    c_rerun->add_option("--out-dir", rerun_out, "write outputs here instead");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : InputError;
    }

    if (c_rerun->parsed()) {
        std::ifstream in(manifest);
        const json j = json::parse(in);
        auto argv = j.at("argv").get<std::vector<std::string>>();
        return dispatch(argv, rerun_out.empty() ? std::nullopt : std::optional<std::string>(rerun_out));
    }

    RunRecord run;
    std::string out_dir;
    CLI::App* sub = app.get_subcommands().front();
    run.command = sub->get_name();
    run.argv = materialize(*sub);
    if (c_sample->parsed()) {
        if (sample_seed->count() == 0) sample.seed = fresh_seed();
        replace_value(run.argv, "--seed", std::to_string(sample.seed));
        run.seed = sample.seed;
        out_dir = sample.out_dir;
    } else if (c_est->parsed()) {
        if (est_seed->count() == 0) est.seed = fresh_seed();
        replace_value(run.argv, "--seed", std::to_string(est.seed));
        run.seed = est.seed;
        out_dir = est.out_dir;
    } else if (c_fit->parsed()) {
        out_dir = fit.out_dir;
    } else if (c_solve->parsed()) {
        out_dir = solve.out_dir;
    } else {
        out_dir = mu.out_dir;
    }
    fs::create_directories(out_dir);

    int status = Ok;
    try {
        if (c_fit->parsed()) run_fit(fit, run);
        if (c_solve->parsed()) run_solve(solve, run);
        if (c_mu->parsed()) run_mu(mu, run);
        if (c_sample->parsed()) run_sample(sample, run);
        if (c_est->parsed()) run_estimate(est, run);
    } catch (const sfcmc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        status = exit_code(e);
    }
    write_manifest(out_dir, run);
    return status;
}

int dispatch(std::vector<std::string> args, std::optional<std::string> out_dir_override) {
    if (out_dir_override) replace_value(args, "--out-dir", *out_dir_override);
    return run_main(std::move(args));
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_main(std::vector<std::string>(argv + 1, argv + argc));
    } catch (const sfcmc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return Internal;
    }
}
