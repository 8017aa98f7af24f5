#ifndef QCL_CLI_HPP
#define QCL_CLI_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "langevin.hpp"
#include "noise.hpp"
#include "scenarios.hpp"
#include "squeeze.hpp"
#include "verify.hpp"

#ifndef QCL_VERSION
#define QCL_VERSION "0.0.0"
#endif

namespace qcl::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_numerical = 2;
inline constexpr int exit_verify = 3;

struct Invocation {
    std::string subcommand;
    std::optional<std::string> config_path;
    std::string out_dir = "qcl-out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> realizations;
    std::optional<std::size_t> threads;
};

/// Collects the files of one run and writes them atomically.
class Output {
public:
    explicit Output(std::filesystem::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_)) {
            throw ConfigError("io", "output directory " + dir_.string() + " is not writable");
        }
    }

    void write(const std::string& name, const std::string& content)
    {
        io::write_atomic(dir_ / name, content);
        files_.push_back(name);
    }

    void write_json(const std::string& name, const ojson& j) { write(name, j.dump(2) + "\n"); }

    const std::vector<std::string>& files() const noexcept { return files_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline ojson grid_echo(const TimeGrid& g) { return detail::grid_json(g); }

inline ojson report_header(const std::string& subcommand, const Config& cfg, std::size_t realizations)
{
    ojson j;
    j["subcommand"] = subcommand;
    j["artifact_version"] = QCL_VERSION;
    j["master_seed"] = cfg.run.master_seed;
    j["realizations"] = realizations;
    j["config"] = to_json(cfg);
    return j;
}

inline std::size_t pick_realizations(const Invocation& inv, const Config& cfg, std::size_t section_default)
{
    if (inv.realizations) return *inv.realizations;
    if (cfg.realizations_override) return *cfg.realizations_override;
    return section_default;
}

inline int run_squeeze(const Config& cfg, Output& out, ojson& report)
{
    const auto& p = cfg.oscillator;
    const auto& g = cfg.squeeze.grid;
    if (g.t_start() < 0.0) throw ConfigError("schema", "squeeze.grid must start at t >= 0");
    io::Table table({"t", "N", "var_squeezed", "var_antisqueezed"});
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto q = quadrature_variances(p, g[i]);
        table.row({g[i], particle_number(p, g[i]), q.squeezed, q.antisqueezed});
    }
    out.write("squeeze.csv", table.str());
    const double t_end = g.t_end();
    const auto q = quadrature_variances(p, t_end);
    const auto c = bogolubov_coefficients(p, t_end);
    report["final"] = {{"t", t_end},
                       {"N", particle_number(p, t_end)},
                       {"u", {c.u.real(), c.u.imag()}},
                       {"v", {c.v.real(), c.v.imag()}},
                       {"variance_ratio", q.antisqueezed / q.squeezed},
                       {"expected_ratio", std::exp(4.0 * p.omega * t_end)},
                       {"variance_product", q.squeezed * q.antisqueezed}};
    return exit_ok;
}

inline int run_kernels(const Config& cfg, Output& out, ojson& report)
{
    const auto& p = cfg.oscillator;
    const auto& g = cfg.kernels.grid;
    const auto gr = build_retarded(p, g);
    const auto gc = build_hadamard(p, g);
    const auto fk = fluctuation_kernel(cfg.kernels.lambda, gc);
    const auto mk = memory_kernel(cfg.kernels.lambda, gr, gc);
    out.write("retarded.txt", io::format_matrix(gr));
    out.write("hadamard.txt", io::format_matrix(gc));
    out.write("fluctuation.txt", io::format_matrix(fk));
    out.write("memory.txt", io::format_matrix(mk));
    const auto proj = psd_project(gc, default_clip_tol);
    const auto rot = keldysh_rotate(build_contour_matrix(inverted_oscillator_two_point(p), g));
    report["hadamard_clipped_eigenvalues"] = proj.clipped;
    report["hadamard_numerical_rank"] = static_cast<int>(g.size()) - proj.clipped;
    report["keldysh_zero_block_residual"] = rot.zero_block_residual;
    return exit_ok;
}

inline int run_noise(const Config& cfg, std::size_t m, Output& out, ojson& report)
{
    const auto& s = cfg.noise;
    const auto& g = s.grid;
    const auto n = static_cast<Eigen::Index>(g.size());
    std::optional<KernelMatrix> k;
    NoiseEnsemble e = [&] {
        if (s.kind == "white") return sample_white(s.sigma2, g, cfg.run.master_seed, m, cfg.run.threads);
        if (s.kind == "identity") k.emplace(g, Eigen::MatrixXd::Identity(n, n), KernelKind::symmetric);
        if (s.kind == "hadamard") k = build_hadamard(cfg.oscillator, g);
        if (s.kind == "fluctuation") k = fluctuation_kernel(s.lambda, build_hadamard(cfg.oscillator, g));
        return sample_colored(*k, cfg.run.master_seed, m, s.clip_tol, cfg.run.threads);
    }();

    std::vector<std::string> header;
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("xi_" + std::to_string(i));
    io::Table table(header);
    for (std::size_t r = 0; r < e.size(); ++r) table.row(e.realization(r));
    out.write("noise.csv", table.str());

    const Eigen::MatrixXd target = k ? k->values() : Eigen::MatrixXd((s.sigma2 / g.dt()) * Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd cov = e.sample_covariance();
    const Eigen::VectorXd mean = e.sample_mean();
    const double md = static_cast<double>(m);
    double max_cov_z = 0.0, max_mean_z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double se_mean = std::sqrt(target(i, i) / md);
        if (se_mean > 0.0) max_mean_z = std::max(max_mean_z, std::abs(mean(i)) / se_mean);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double se = std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) / md);
            if (se > 0.0) max_cov_z = std::max(max_cov_z, std::abs(cov(i, j) - target(i, j)) / se);
        }
    }
    report["covariance_ref"] = e.covariance_ref;
    report["max_mean_over_stderr"] = max_mean_z;
    report["max_covariance_error_over_stderr"] = max_cov_z;
    report["verdicts"] = {{"mean_within_5_stderr", max_mean_z < 5.0}, {"covariance_within_5_stderr", max_cov_z < 5.0}};
    return exit_ok;
}

inline int run_langevin(const Config& cfg, std::size_t m, Output& out, ojson& report)
{
    const auto& l = cfg.langevin;
    const auto& g = l.grid;
    const std::size_t n = g.size();
    const std::size_t burn = n / 10;
    std::vector<double> v2_tail(m, 0.0);
    std::optional<KernelMatrix> mem;
    std::unique_ptr<ColoredNoiseSampler> sampler;
    if (l.integrator == "memory") {
        if (n > 4096) throw ConfigError("schema", "langevin.grid: memory integrator supports at most 4096 points");
        const auto gr = build_retarded(cfg.oscillator, g);
        const auto gc = build_hadamard(cfg.oscillator, g);
        mem = memory_kernel(l.lambda, gr, gc);
        if (l.noise_amplitude > 0.0) {
            sampler = std::make_unique<ColoredNoiseSampler>(l.lambda > 0.0 ? fluctuation_kernel(l.lambda, gc) : gc);
        }
    }
    const double white_scale = std::sqrt(l.sigma2 / g.dt());
    Trajectory first{g, {}, {}};

    auto realize = [&](std::size_t r, std::uint64_t seed) {
        std::vector<double> xi(n, 0.0);
        Trajectory tr{g, {}, {}};
        if (mem) {
            if (sampler) {
                const Eigen::VectorXd d = sampler->draw(seed);
                for (std::size_t i = 0; i < n; ++i) xi[i] = l.noise_amplitude * d(static_cast<Eigen::Index>(i));
            }
            tr = integrate_memory(cfg.oscillator.omega, *mem, g, xi, l.x0, l.v0);
        } else {
            const auto z = standard_normals(seed, n);
            for (std::size_t i = 0; i < n; ++i) xi[i] = white_scale * z[i];
            tr = integrate_white(l.potential, l.gamma, g, xi, l.x0, l.v0);
        }
        CompensatedSum v2;
        for (std::size_t i = burn; i < n; ++i) v2.add(tr.xdot[i] * tr.xdot[i]);
        v2_tail[r] = v2.value() / static_cast<double>(n - burn);
        if (r == 0) first = tr;
        return tr;
    };
    const auto stats = ensemble_run(g, realize, cfg.run.master_seed, m, {cfg.run.threads, l.histogram_bins, true});

    io::Table ens({"t", "mean", "variance"});
    for (std::size_t i = 0; i < n; ++i) ens.row({g[i], stats.mean[i], stats.variance[i]});
    out.write("ensemble.csv", ens.str());
    io::Table traj({"t", "x", "xdot"});
    for (std::size_t i = 0; i < n; ++i) traj.row({g[i], first.x[i], first.xdot[i]});
    out.write("trajectory_0.csv", traj.str());
    io::Table fin({"run", "x_final"});
    for (std::size_t r = 0; r < m; ++r) fin.row({static_cast<double>(r), stats.per_run_finals[r]});
    out.write("finals.csv", fin.str());

    CompensatedSum v2;
    for (double v : v2_tail) v2.add(v);
    report["tail_start_t"] = g[burn];
    report["tail_mean_x2"] = tail_second_moment(stats.paths, burn);
    report["tail_mean_xdot2"] = v2.value() / static_cast<double>(m);
    if (!mem && l.potential.kind == PotentialKind::quadratic && l.gamma > 0.0) {
        const double w2 = l.potential.omega * l.potential.omega;
        report["stationary_x2_prediction"] = l.sigma2 / (2.0 * l.gamma * w2);
        report["stationary_xdot2_prediction"] = l.sigma2 / (2.0 * l.gamma);
    }
    report["final_histogram"] = {{"edges", stats.final_histogram.edges}, {"counts", stats.final_histogram.counts}};
    return exit_ok;
}

inline int run_ssb_command(const Config& cfg, std::size_t m, Output& out, ojson& report)
{
    SSBConfig c = cfg.ssb;
    c.realizations = m;
    c.master_seed = cfg.run.master_seed;
    c.threads = cfg.run.threads;
    const auto rep = run_ssb(c);
    const auto& g = c.grid;

    io::Table ens({"t", "mean", "variance"});
    for (std::size_t i = 0; i < g.size(); ++i) ens.row({g[i], rep.stats.mean[i], rep.stats.variance[i]});
    out.write("ssb_ensemble.csv", ens.str());
    io::Table fin({"run", "x_final", "sign", "gate_closed_t"});
    for (std::size_t r = 0; r < m; ++r) {
        const double tc = rep.gate_closed_at[r] ? g[*rep.gate_closed_at[r]] : std::nan("");
        fin.row({static_cast<double>(r), rep.stats.per_run_finals[r], static_cast<double>(rep.final_sign[r]), tc});
    }
    out.write("ssb_finals.csv", fin.str());

    std::size_t mean_outside = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(rep.stats.mean[i]) > 5.0 * rep.stats.mean_stderr(i)) ++mean_outside;
    const double basin_sd = 0.5 / std::sqrt(static_cast<double>(m));
    report["noise_rank"] = rep.noise_rank;
    report["expected_minimum"] = rep.expected_minimum;
    report["plus_fraction"] = rep.plus_fraction;
    report["minus_fraction"] = rep.minus_fraction;
    report["unsettled"] = rep.unsettled;
    report["mean_abs_final"] = rep.mean_abs_final;
    report["mean_abs_final_stderr"] = rep.mean_abs_final_stderr;
    report["max_rel_final_deviation"] = rep.max_rel_final_deviation;
    report["mean_points_beyond_5_stderr"] = mean_outside;
    report["recursion"] = {{"leave_radius", rep.leave_radius}, {"return_radius", rep.return_radius},
                           {"probability", rep.recursion}};
    report["final_histogram"] = {{"edges", rep.stats.final_histogram.edges}, {"counts", rep.stats.final_histogram.counts}};
    report["verdicts"] = {
        {"basin_fraction_within_3_binomial_sd", std::abs(rep.plus_fraction - 0.5) <= 3.0 * basin_sd},
        {"final_modulus_within_5_percent", rep.unsettled == 0 && rep.max_rel_final_deviation <= 0.05},
        {"ensemble_mean_consistent_with_zero", mean_outside == 0},
        {"mean_abs_final_above_10_stderr", rep.mean_abs_final > 10.0 * rep.mean_abs_final_stderr},
        {"recursion_below_0.05", rep.recursion < 0.05}};
    return exit_ok;
}

inline int run_bec_command(const Config& cfg, std::size_t m, Output& out, ojson& report)
{
    BECConfig c = cfg.bec;
    c.realizations = m;
    c.master_seed = cfg.run.master_seed;
    c.threads = cfg.run.threads;
    const auto rep = run_bec(c);
    const auto& g = c.grid;

    io::Table ens({"t", "mean_re", "mean_im", "mean_modulus_sq"});
    for (std::size_t i = 0; i < g.size(); ++i)
        ens.row({g[i], rep.real_part.mean[i], rep.imag_part.mean[i], rep.mean_modulus_sq[i]});
    out.write("bec_ensemble.csv", ens.str());
    io::Table fin({"run", "modulus", "phase", "gate_closed_t"});
    for (std::size_t r = 0; r < m; ++r) {
        const double tc = rep.gate_closed_at[r] ? g[*rep.gate_closed_at[r]] : std::nan("");
        fin.row({static_cast<double>(r), rep.final_modulus[r], rep.final_phase[r], tc});
    }
    out.write("bec_finals.csv", fin.str());

    report["noise_rank"] = rep.noise_rank;
    report["expected_modulus"] = rep.expected_modulus;
    report["gate_threshold"] = c.threshold();
    report["kuiper"] = rep.kuiper;
    report["kuiper_p"] = rep.kuiper_p;
    report["kuiper_critical_1pct"] = kuiper_critical_1pct;
    report["rayleigh_z"] = rep.rayleigh_z;
    report["mean_rel_modulus_deviation"] = rep.mean_rel_modulus_deviation;
    report["max_rel_modulus_deviation"] = rep.max_rel_modulus_deviation;
    report["condensate_fraction"] = rep.condensate_fraction;
    report["verdicts"] = {{"phase_uniform_kuiper_1pct", rep.kuiper < kuiper_critical_1pct},
                          {"modulus_within_5_percent", rep.max_rel_modulus_deviation <= 0.05},
                          {"odlro_proxy_90_percent", rep.condensate_fraction >= 0.9}};
    return exit_ok;
}

inline int run_inflation_command(const Config& cfg, std::size_t m, Output& out, ojson& report)
{
    InflationConfig c = cfg.inflation;
    c.realizations = m;
    c.master_seed = cfg.run.master_seed;
    c.threads = cfg.run.threads;
    const auto rep = run_inflation(c);
    io::Table table({"k", "variance", "predicted_variance", "noise_intensity"});
    for (std::size_t i = 0; i < rep.spectrum.k.size(); ++i)
        table.row({rep.spectrum.k[i], rep.spectrum.power[i], rep.predicted_variance[i], rep.noise_intensity[i]});
    out.write("spectrum.csv", table.str());
    report["relaxation_rate"] = rep.relaxation_rate;
    report["burn_in_time"] = rep.burn_in_time;
    report["fit"] = {{"slope", rep.spectrum.slope},
                     {"slope_stderr", rep.spectrum.slope_stderr},
                     {"intercept", rep.spectrum.intercept}};
    report["verdicts"] = {{"slope_within_0.1_of_minus_3", std::abs(rep.spectrum.slope + 3.0) <= 0.1}};
    return exit_ok;
}

inline int run_verify_command(const Config& cfg, Output&, ojson& report, std::ostream& log)
{
    const auto rep = run_verify(cfg.oscillator, cfg.verify.hs_realizations, cfg.run.master_seed, cfg.run.threads);
    ojson checks = ojson::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"suite", c.suite}, {"name", c.name}, {"value", c.value}, {"threshold", c.threshold},
                          {"passed", c.passed}});
        log << (c.passed ? "[PASS] " : "[FAIL] ") << c.suite << ": " << c.name << " = " << io::format_double(c.value)
            << " (<= " << io::format_double(c.threshold) << ")\n";
    }
    report["checks"] = checks;
    report["passed"] = rep.passed();
    return rep.passed() ? exit_ok : exit_verify;
}

inline int execute(const Invocation& inv, std::ostream& log)
{
    Config cfg = inv.config_path ? load_config(*inv.config_path) : parse_config("{}");
    if (inv.seed) cfg.run.master_seed = *inv.seed;
    if (inv.threads) cfg.run.threads = *inv.threads;
    std::size_t m = 0;
    if (inv.subcommand == "noise") m = pick_realizations(inv, cfg, cfg.noise.realizations);
    if (inv.subcommand == "langevin") m = pick_realizations(inv, cfg, cfg.langevin.realizations);
    if (inv.subcommand == "ssb") m = pick_realizations(inv, cfg, cfg.ssb.realizations);
    if (inv.subcommand == "bec") m = pick_realizations(inv, cfg, cfg.bec.realizations);
    if (inv.subcommand == "inflation") m = pick_realizations(inv, cfg, cfg.inflation.realizations);
    if (inv.subcommand == "verify") m = pick_realizations(inv, cfg, cfg.verify.hs_realizations);
    if (inv.subcommand == "verify") cfg.verify.hs_realizations = m;
    cfg.run.n_realizations = std::max<std::size_t>(m, 1);
    cfg.run.validate();

    Output out(inv.out_dir);
    const auto start = std::chrono::steady_clock::now();
    ojson report = report_header(inv.subcommand, cfg, m);
    int code = exit_ok;
    if (inv.subcommand == "squeeze") code = run_squeeze(cfg, out, report);
    else if (inv.subcommand == "kernels") code = run_kernels(cfg, out, report);
    else if (inv.subcommand == "noise") code = run_noise(cfg, m, out, report);
    else if (inv.subcommand == "langevin") code = run_langevin(cfg, m, out, report);
    else if (inv.subcommand == "ssb") code = run_ssb_command(cfg, m, out, report);
    else if (inv.subcommand == "bec") code = run_bec_command(cfg, m, out, report);
    else if (inv.subcommand == "inflation") code = run_inflation_command(cfg, m, out, report);
    else if (inv.subcommand == "verify") code = run_verify_command(cfg, out, report, log);
    out.write_json(inv.subcommand + "_report.json", report);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    ojson manifest;
    manifest["artifact"] = "qcl";
    manifest["artifact_version"] = QCL_VERSION;
    manifest["subcommand"] = inv.subcommand;
    manifest["master_seed"] = cfg.run.master_seed;
    manifest["realizations"] = m;
    manifest["threads"] = cfg.run.threads;
    manifest["config"] = to_json(cfg);
    manifest["outputs"] = out.files();
    manifest["exit_code"] = code;
    manifest["wall_time_seconds"] = wall;
    out.write_json("manifest.json", manifest);
    log << inv.subcommand << ": wrote " << out.files().size() + 1 << " files to " << out.dir().string() << "\n";
    return code;
}

/// Entry point of the command-line front end. Exit codes: 0 success, 1
/// configuration error, 2 numerical failure, 3 verification failure.
inline int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr)
{
    CLI::App app{"Quantum-to-classical transient simulations"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Invocation inv;
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t realizations = 0, threads = 0;
    auto* copt = app.add_option("--config", config_path, "Configuration document (JSON)");
    app.add_option("--out", inv.out_dir, "Output directory")->capture_default_str();
    auto* sopt = app.add_option("--seed", seed, "Master seed override");
    auto* ropt = app.add_option("--realizations", realizations, "Ensemble size override")->check(CLI::PositiveNumber);
    auto* topt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    const std::pair<const char*, const char*> commands[] = {
        {"squeeze", "Squeezed-state analytics: N(t) and quadrature variances"},
        {"kernels", "Export retarded, Hadamard, fluctuation and memory kernels"},
        {"noise", "Sample white or colored noise ensembles"},
        {"langevin", "Integrate a Langevin ensemble"},
        {"ssb", "Spontaneous symmetry breaking in a double well"},
        {"bec", "Condensate growth of a complex order parameter"},
        {"inflation", "Overdamped de Sitter modes and their power spectrum"},
        {"verify", "Run the identity verification suites"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return exit_config;
    }
    inv.subcommand = app.get_subcommands().front()->get_name();
    if (copt->count()) inv.config_path = config_path;
    if (sopt->count()) inv.seed = seed;
    if (ropt->count()) inv.realizations = realizations;
    if (topt->count()) inv.threads = threads;

    try {
        return execute(inv, out);
    } catch (const NumericalError& e) {
        err << "numerical failure [" << e.code() << "]: " << e.what() << "\n";
        return exit_numerical;
    } catch (const Error& e) {
        err << "configuration error [" << e.code() << "]: " << e.what() << "\n";
        return exit_config;
    }
}

} // namespace qcl::cli

#endif
