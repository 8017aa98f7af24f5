#ifndef QCL_CONFIG_HPP
#define QCL_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "langevin.hpp"
#include "scenarios.hpp"
#include "squeeze.hpp"

namespace qcl {

using ojson = nlohmann::ordered_json;

struct SqueezeSection {
    TimeGrid grid{0.0, 3.0, 101};
};

struct KernelsSection {
    TimeGrid grid{0.0, 1.0, 64};
    double lambda = 0.5;
};

struct NoiseSection {
    /// white | identity | hadamard | fluctuation
    std::string kind = "hadamard";
    double sigma2 = 1.0;
    double lambda = 0.5;
    TimeGrid grid{0.0, 1.0, 16};
    std::size_t realizations = 20000;
    double clip_tol = default_clip_tol;
};

struct LangevinSection {
    /// white: x'' = -gamma x' - V'(x) + xi with white noise of intensity sigma2.
    /// memory: X'' = omega^2 X - int M X - xi with the oscillator's memory
    /// kernel and colored noise of the fluctuation kernel scaled by noise_amplitude.
    std::string integrator = "white";
    PotentialSpec potential = PotentialSpec::quadratic(1.0);
    double gamma = 0.5;
    double sigma2 = 1.0;
    double lambda = 0.0;
    double noise_amplitude = 0.0;
    double x0 = 0.0;
    double v0 = 0.0;
    TimeGrid grid{0.0, 200.0, 20001};
    std::size_t realizations = 200;
    std::size_t histogram_bins = 40;
};

struct VerifySection {
    std::size_t hs_realizations = 20000;
};

/// A fully validated configuration with every default populated.
struct Config {
    RunConfig run;
    /// realizations override from the "run" section, applied to the chosen subcommand
    std::optional<std::size_t> realizations_override;
    SqueezeParams oscillator;
    SqueezeSection squeeze;
    KernelsSection kernels;
    NoiseSection noise;
    LangevinSection langevin;
    SSBConfig ssb;
    BECConfig bec;
    InflationConfig inflation;
    VerifySection verify;
};

namespace detail {

/// Reads one object of the document, remembering which keys were consumed so
/// that leftovers can be rejected.
class SectionReader {
public:
    SectionReader(const nlohmann::json* node, std::string path) : node_(node), path_(std::move(path))
    {
        if (node_ && !node_->is_object()) throw ConfigError("schema", path_ + " must be an object");
    }

    double number(const char* key, double def)
    {
        const auto* v = take(key);
        if (!v) return def;
        if (!v->is_number()) throw ConfigError("schema", name(key) + " must be a number");
        return v->get<double>();
    }

    std::optional<double> optional_number(const char* key)
    {
        const auto* v = take(key);
        if (!v || v->is_null()) return std::nullopt;
        if (!v->is_number()) throw ConfigError("schema", name(key) + " must be a number");
        return v->get<double>();
    }

    std::uint64_t unsigned_integer(const char* key, std::uint64_t def)
    {
        const auto* v = take(key);
        if (!v) return def;
        if (!v->is_number_unsigned()) throw ConfigError("schema", name(key) + " must be a non-negative integer");
        return v->get<std::uint64_t>();
    }

    std::size_t count(const char* key, std::size_t def)
    {
        const auto c = unsigned_integer(key, def);
        if (c < 1) throw ConfigError("schema", name(key) + " must be >= 1");
        return static_cast<std::size_t>(c);
    }

    bool boolean(const char* key, bool def)
    {
        const auto* v = take(key);
        if (!v) return def;
        if (!v->is_boolean()) throw ConfigError("schema", name(key) + " must be a boolean");
        return v->get<bool>();
    }

    std::string choice(const char* key, const std::string& def, std::initializer_list<const char*> allowed)
    {
        const auto* v = take(key);
        if (!v) return def;
        if (!v->is_string()) throw ConfigError("schema", name(key) + " must be a string");
        const auto s = v->get<std::string>();
        for (const char* a : allowed)
            if (s == a) return s;
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        throw ConfigError("schema", name(key) + " must be one of: " + list);
    }

    SectionReader child(const char* key)
    {
        const auto* v = take(key);
        return SectionReader(v, name(key));
    }

    TimeGrid grid(const char* key, const TimeGrid& def)
    {
        auto g = child(key);
        const double t0 = g.number("t_start", def.t_start());
        const double t1 = g.number("t_end", def.t_end());
        const auto n = g.count("n_points", def.size());
        g.finish();
        try {
            return TimeGrid(t0, t1, n);
        } catch (const InvalidArgument& e) {
            throw ConfigError("schema", name(key) + ": " + e.what());
        }
    }

    void finish() const
    {
        if (!node_) return;
        for (auto it = node_->begin(); it != node_->end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError("unknown-key", "unknown configuration key " + name(it.key()));
        }
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const nlohmann::json* take(const char* key)
    {
        seen_.insert(key);
        if (!node_) return nullptr;
        const auto it = node_->find(key);
        return it == node_->end() ? nullptr : &*it;
    }

    const nlohmann::json* node_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename F>
void checked(const std::string& section, F&& validate)
{
    try {
        validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("schema", section + ": " + e.what());
    }
}

inline nlohmann::json parse_strict(const std::string& text)
{
    // Keys already seen in each open object, innermost last.
    std::vector<std::set<std::string>> open;
    const nlohmann::json::parser_callback_t cb = [&open](int, nlohmann::json::parse_event_t event,
                                                         nlohmann::json& parsed) {
        using E = nlohmann::json::parse_event_t;
        if (event == E::object_start) {
            open.emplace_back();
        } else if (event == E::object_end) {
            open.pop_back();
        } else if (event == E::key) {
            const auto key = parsed.get<std::string>();
            if (!open.back().insert(key).second) throw ConfigError("duplicate-key", "duplicate configuration key '" + key + "'");
        }
        return true;
    };
    try {
        return nlohmann::json::parse(text, cb);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("parse-error", e.what());
    }
}

inline void read_order_parameter(SectionReader& s, OrderParameterConfig& c)
{
    c.m2 = s.number("m2", c.m2);
    c.lambda = s.number("lambda", c.lambda);
    c.gamma = s.number("gamma", c.gamma);
    c.gate = s.boolean("gate", c.gate);
    c.gate_threshold = s.optional_number("gate_threshold");
    c.memory = s.boolean("memory", c.memory);
    c.grid = s.grid("grid", c.grid);
    c.realizations = s.count("realizations", c.realizations);
    auto n = s.child("noise");
    const auto kind = n.choice("kernel", to_string(c.noise.kernel), {"hadamard", "composed", "white"});
    c.noise.kernel = kind == "hadamard" ? NoiseKernelChoice::hadamard
                   : kind == "composed" ? NoiseKernelChoice::composed
                                        : NoiseKernelChoice::white;
    c.noise.amplitude = n.number("amplitude", c.noise.amplitude);
    c.noise.window = n.number("window", c.noise.window);
    c.noise.hbar = n.number("hbar", c.noise.hbar);
    c.noise.clip_tol = n.number("clip_tol", c.noise.clip_tol);
    n.finish();
}

inline ojson grid_json(const TimeGrid& g)
{
    return {{"t_start", g.t_start()}, {"t_end", g.t_end()}, {"n_points", g.size()}};
}

inline ojson order_parameter_json(const OrderParameterConfig& c)
{
    ojson j;
    j["m2"] = c.m2;
    j["lambda"] = c.lambda;
    j["gamma"] = c.gamma;
    j["gate"] = c.gate;
    j["gate_threshold"] = c.threshold();
    j["memory"] = c.memory;
    j["grid"] = grid_json(c.grid);
    j["realizations"] = c.realizations;
    j["noise"] = {{"kernel", to_string(c.noise.kernel)}, {"amplitude", c.noise.amplitude},
                  {"window", c.noise.window},           {"hbar", c.noise.hbar},
                  {"clip_tol", c.noise.clip_tol}};
    return j;
}

} // namespace detail

/// Parses and validates a configuration document (JSON). Unknown keys,
/// duplicate keys, type errors and physical-invariant violations are fatal.
inline Config parse_config(const std::string& text)
{
    const nlohmann::json doc = detail::parse_strict(text);
    Config c;
    detail::SectionReader root(&doc, "");

    {
        auto s = root.child("run");
        c.run.master_seed = s.unsigned_integer("master_seed", c.run.master_seed);
        c.run.threads = s.count("threads", c.run.threads);
        constexpr auto absent = std::numeric_limits<std::uint64_t>::max();
        if (const auto r = s.unsigned_integer("realizations", absent); r != absent) {
            if (r < 1) throw ConfigError("schema", "run.realizations must be >= 1");
            c.realizations_override = static_cast<std::size_t>(r);
        }
        s.finish();
    }
    {
        auto s = root.child("oscillator");
        c.oscillator.mass = s.number("mass", c.oscillator.mass);
        c.oscillator.omega = s.number("omega", c.oscillator.omega);
        c.oscillator.phi = s.number("phi", c.oscillator.phi);
        c.oscillator.hbar = s.number("hbar", c.oscillator.hbar);
        s.finish();
        detail::checked("oscillator", [&] { c.oscillator.validate(); });
    }
    {
        auto s = root.child("squeeze");
        c.squeeze.grid = s.grid("grid", c.squeeze.grid);
        s.finish();
    }
    {
        auto s = root.child("kernels");
        c.kernels.grid = s.grid("grid", c.kernels.grid);
        c.kernels.lambda = s.number("lambda", c.kernels.lambda);
        s.finish();
    }
    {
        auto s = root.child("noise");
        c.noise.kind = s.choice("kind", c.noise.kind, {"white", "identity", "hadamard", "fluctuation"});
        c.noise.sigma2 = s.number("sigma2", c.noise.sigma2);
        c.noise.lambda = s.number("lambda", c.noise.lambda);
        c.noise.grid = s.grid("grid", c.noise.grid);
        c.noise.realizations = s.count("realizations", c.noise.realizations);
        c.noise.clip_tol = s.number("clip_tol", c.noise.clip_tol);
        s.finish();
        if (!(c.noise.sigma2 > 0.0)) throw ConfigError("schema", "noise.sigma2 must be positive");
        if (!(c.noise.clip_tol > 0.0)) throw ConfigError("schema", "noise.clip_tol must be positive");
    }
    {
        auto s = root.child("langevin");
        auto& l = c.langevin;
        l.integrator = s.choice("integrator", l.integrator, {"white", "memory"});
        auto p = s.child("potential");
        const auto kind = p.choice("kind", to_string(l.potential.kind), {"quadratic", "inverted", "double_well"});
        const double omega = p.number("omega", 1.0);
        const double m2 = p.number("m2", -1.0);
        const double lam = p.number("lambda", 0.6);
        p.finish();
        l.potential = kind == "quadratic" ? PotentialSpec::quadratic(omega)
                    : kind == "inverted"  ? PotentialSpec::inverted(omega)
                                          : PotentialSpec{PotentialKind::double_well, 0.0, m2, lam};
        detail::checked("langevin.potential", [&] { l.potential.validate(); });
        l.gamma = s.number("gamma", l.gamma);
        l.sigma2 = s.number("sigma2", l.sigma2);
        l.lambda = s.number("lambda", l.lambda);
        l.noise_amplitude = s.number("noise_amplitude", l.noise_amplitude);
        l.x0 = s.number("x0", l.x0);
        l.v0 = s.number("v0", l.v0);
        l.grid = s.grid("grid", l.grid);
        l.realizations = s.count("realizations", l.realizations);
        l.histogram_bins = s.count("histogram_bins", l.histogram_bins);
        s.finish();
        if (!(l.gamma >= 0.0)) throw ConfigError("schema", "langevin.gamma must be non-negative");
        if (!(l.sigma2 > 0.0)) throw ConfigError("schema", "langevin.sigma2 must be positive");
        if (!(l.noise_amplitude >= 0.0)) throw ConfigError("schema", "langevin.noise_amplitude must be non-negative");
    }
    {
        auto s = root.child("ssb");
        detail::read_order_parameter(s, c.ssb);
        c.ssb.return_radius = s.number("return_radius", c.ssb.return_radius);
        c.ssb.histogram_bins = s.count("histogram_bins", c.ssb.histogram_bins);
        s.finish();
        detail::checked("ssb", [&] { c.ssb.validate(); });
        if (!(c.ssb.return_radius > 0.0)) throw ConfigError("schema", "ssb.return_radius must be positive");
    }
    {
        auto s = root.child("bec");
        detail::read_order_parameter(s, c.bec);
        s.finish();
        detail::checked("bec", [&] { c.bec.validate(); });
    }
    {
        auto s = root.child("inflation");
        auto& f = c.inflation;
        f.hubble = s.number("H", f.hubble);
        f.lambda = s.number("lambda", f.lambda);
        f.phi0 = s.number("phi0", f.phi0);
        f.k_min = s.number("k_min", f.k_min);
        f.k_max = s.number("k_max", f.k_max);
        f.n_modes = s.count("n_modes", f.n_modes);
        f.grid = s.grid("grid", f.grid);
        f.realizations = s.count("realizations", f.realizations);
        f.burn_in_relaxations = s.number("burn_in_relaxations", f.burn_in_relaxations);
        s.finish();
        detail::checked("inflation", [&] { f.validate(); });
    }
    {
        auto s = root.child("verify");
        c.verify.hs_realizations = s.count("hs_realizations", c.verify.hs_realizations);
        s.finish();
    }
    root.finish();
    return c;
}

inline Config load_config(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("missing-config", "cannot open configuration file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(e.code(), path.string() + ": " + e.what());
    }
}

/// The populated configuration, every default included.
inline ojson to_json(const Config& c)
{
    using detail::grid_json;
    ojson j;
    j["run"] = {{"master_seed", c.run.master_seed}, {"threads", c.run.threads}};
    if (c.realizations_override) j["run"]["realizations"] = *c.realizations_override;
    j["oscillator"] = {{"mass", c.oscillator.mass}, {"omega", c.oscillator.omega},
                       {"phi", c.oscillator.phi},   {"hbar", c.oscillator.hbar}};
    j["squeeze"] = {{"grid", grid_json(c.squeeze.grid)}};
    j["kernels"] = {{"grid", grid_json(c.kernels.grid)}, {"lambda", c.kernels.lambda}};
    j["noise"] = {{"kind", c.noise.kind},     {"sigma2", c.noise.sigma2},
                  {"lambda", c.noise.lambda}, {"grid", grid_json(c.noise.grid)},
                  {"realizations", c.noise.realizations}, {"clip_tol", c.noise.clip_tol}};
    const auto& l = c.langevin;
    j["langevin"] = {{"integrator", l.integrator},
                     {"potential", {{"kind", to_string(l.potential.kind)}, {"omega", l.potential.omega},
                                    {"m2", l.potential.m2}, {"lambda", l.potential.lambda}}},
                     {"gamma", l.gamma}, {"sigma2", l.sigma2}, {"lambda", l.lambda},
                     {"noise_amplitude", l.noise_amplitude}, {"x0", l.x0}, {"v0", l.v0},
                     {"grid", grid_json(l.grid)}, {"realizations", l.realizations},
                     {"histogram_bins", l.histogram_bins}};
    j["ssb"] = detail::order_parameter_json(c.ssb);
    j["ssb"]["return_radius"] = c.ssb.return_radius;
    j["ssb"]["histogram_bins"] = c.ssb.histogram_bins;
    j["bec"] = detail::order_parameter_json(c.bec);
    const auto& f = c.inflation;
    j["inflation"] = {{"H", f.hubble}, {"lambda", f.lambda}, {"phi0", f.phi0}, {"k_min", f.k_min},
                      {"k_max", f.k_max}, {"n_modes", f.n_modes}, {"grid", grid_json(f.grid)},
                      {"realizations", f.realizations}, {"burn_in_relaxations", f.burn_in_relaxations}};
    j["verify"] = {{"hs_realizations", c.verify.hs_realizations}};
    return j;
}

} // namespace qcl

#endif
