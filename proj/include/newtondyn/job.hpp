#pragma once

// Configuration-driven jobs behind the newtondyn command-line tool. Requires
// nlohmann/json (vendored as json.hpp).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "analysis.hpp"
#include "backward.hpp"
#include "forward.hpp"
#include "io.hpp"
#include "newton.hpp"
#include "parse.hpp"
#include "poly.hpp"
#include "raster.hpp"

#ifndef NEWTONDYN_VERSION
#define NEWTONDYN_VERSION "1.0.0"
#endif

namespace newtondyn {

using json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

/// Invalid job configuration (exit status 1).
class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// A pipeline stage failed after validation (exit status 2).
class JobRuntimeError : public std::runtime_error {
public:
    JobRuntimeError(const std::string& operation, const std::string& what)
        : std::runtime_error(operation + ": " + what), operation_(operation)
    {
    }
    const std::string& operation() const { return operation_; }

private:
    std::string operation_;
};

enum class Mode { Basins, AlphaTree, AlphaRandom, Ifs, ParamScan, Barna, Ghost, Compare };

inline const std::vector<std::pair<Mode, std::string>>& mode_names()
{
    static const std::vector<std::pair<Mode, std::string>> names{
        {Mode::Basins, "basins"},       {Mode::AlphaTree, "alpha-tree"}, {Mode::AlphaRandom, "alpha-random"},
        {Mode::Ifs, "ifs"},             {Mode::ParamScan, "param-scan"}, {Mode::Barna, "barna"},
        {Mode::Ghost, "ghost"},         {Mode::Compare, "compare"}};
    return names;
}

inline std::string to_string(Mode m)
{
    for (const auto& [k, v] : mode_names())
        if (k == m) return v;
    return "?";
}

inline Mode parse_mode(const std::string& s)
{
    for (const auto& [k, v] : mode_names())
        if (v == s) return k;
    throw ConfigError("unknown mode '" + s + "'");
}

struct JobConfig {
    Mode mode = Mode::Basins;
    std::string map_kind = "complex"; ///< complex | planar | rational
    std::string variable = "z";
    std::string poly;
    std::string f1, f2;
    std::string numerator, denominator;
    std::string family;
    std::string parameter = "A";

    Box window{-2.0, 2.0, -2.0, 2.0};
    int width = 256;
    int height = 256;
    std::optional<Vec2> seed_point;
    std::optional<Box> domain;   ///< planar counterimage search domain (default: window)
    std::optional<Box> root_box; ///< planar root search box (default: window)

    int depth = 10;
    std::size_t cap = 2000000;
    int length = 2000;
    int burn_in = 100;
    int orbits = 1;
    int steps = 12;
    std::optional<double> exclusion_radius;
    std::vector<Disk> exclusion_disks;

    std::string alpha_source = "tree"; ///< compare mode: tree | random
    bool nonregular_only = false;

    std::uint64_t prng_seed = 1;
    unsigned threads = 0;
    ScanConfig scan;
    BarnaConfig barna;
    GhostProbeConfig probe;
    int ghost_seeds_per_axis = 32;

    std::map<std::string, std::string> outputs;
};

namespace detail {

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte)
{
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

class ConfigReader {
public:
    explicit ConfigReader(const json& j) : j_(j)
    {
        if (!j_.is_object()) throw ConfigError("config must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void opt(const std::string& key, T& out)
    {
        if (!has(key)) return;
        out = get<T>(key);
    }

    template <class T>
    T get(const std::string& key)
    {
        const json& v = raw(key);
        if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected true or false");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) fail(key, "expected a number");
            return v.get<double>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() && !v.is_number_unsigned()) fail(key, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && v.get<std::int64_t>() < 0) fail(key, "expected a non-negative integer");
                return static_cast<T>(v.get<std::uint64_t>());
            } else {
                return static_cast<T>(v.get<std::int64_t>());
            }
        } else {
            static_assert(sizeof(T) == 0, "unsupported config type");
        }
    }

    std::vector<double> numbers(const std::string& key, std::size_t n)
    {
        const json& v = raw(key);
        if (!v.is_array() || v.size() != n) fail(key, "expected an array of " + std::to_string(n) + " numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail(key, "expected an array of " + std::to_string(n) + " numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    Box box(const std::string& key)
    {
        const auto v = numbers(key, 4);
        const Box b{v[0], v[1], v[2], v[3]};
        if (!b.valid()) fail(key, "expected [xmin, xmax, ymin, ymax] with xmin < xmax and ymin < ymax");
        return b;
    }

    void check_unknown() const
    {
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }

    [[noreturn]] static void fail(const std::string& key, const std::string& msg)
    {
        throw ConfigError("config key '" + key + "': " + msg);
    }

private:
    const json& j_;
    std::set<std::string> seen_;
};

inline json box_json(const Box& b) { return json::array({b.xmin, b.xmax, b.ymin, b.ymax}); }

inline std::vector<std::string> output_roles(Mode m)
{
    switch (m) {
    case Mode::Basins: return {"report", "image"};
    case Mode::AlphaTree: return {"report", "image"};
    case Mode::AlphaRandom: return {"report", "image", "orbit_csv"};
    case Mode::Ifs: return {"report", "image"};
    case Mode::ParamScan: return {"report", "image"};
    case Mode::Barna: return {"report"};
    case Mode::Ghost: return {"report"};
    case Mode::Compare: return {"report", "image", "boundary_image", "alpha_image"};
    }
    return {"report"};
}

inline std::string default_output(Mode m, const std::string& role)
{
    if (role == "report") return "report.json";
    if (role == "orbit_csv") return "orbit.csv";
    if (role == "boundary_image") return "boundary.ppm";
    if (role == "alpha_image") return "alpha.ppm";
    switch (m) {
    case Mode::Basins: return "basins.ppm";
    case Mode::AlphaTree:
    case Mode::AlphaRandom: return "alpha.ppm";
    case Mode::Ifs: return "ifs.ppm";
    case Mode::ParamScan: return "param.ppm";
    case Mode::Compare: return "basins.ppm";
    default: return role;
    }
}

} // namespace detail

/// Parses a JSON text, reporting syntax errors with line and column.
inline json parse_json_text(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError("JSON syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
    }
}

/// Reads and checks a flat JSON job configuration. `mode_override` is the
/// mode given on the command line; a different "mode" in the file is an error.
inline JobConfig parse_job_config(const json& j, std::optional<Mode> mode_override = std::nullopt)
{
    detail::ConfigReader r(j);
    JobConfig c;
    if (r.has("mode")) {
        c.mode = parse_mode(r.get<std::string>("mode"));
        if (mode_override && *mode_override != c.mode)
            throw ConfigError("config mode '" + to_string(c.mode) + "' does not match requested mode '" +
                              to_string(*mode_override) + "'");
    } else if (mode_override) {
        c.mode = *mode_override;
    } else {
        throw ConfigError("no mode given");
    }

    r.opt("map_kind", c.map_kind);
    r.opt("variable", c.variable);
    r.opt("poly", c.poly);
    r.opt("f1", c.f1);
    r.opt("f2", c.f2);
    r.opt("numerator", c.numerator);
    r.opt("denominator", c.denominator);
    r.opt("family", c.family);
    r.opt("parameter", c.parameter);
    if (r.has("window")) c.window = r.box("window");
    if (r.has("resolution")) {
        const auto v = r.numbers("resolution", 2);
        if (v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]) || v[0] < 1 || v[1] < 1 || v[0] > 16384 ||
            v[1] > 16384)
            detail::ConfigReader::fail("resolution", "expected [width, height] with integers in 1..16384");
        c.width = static_cast<int>(v[0]);
        c.height = static_cast<int>(v[1]);
    }
    if (r.has("seed_point")) {
        const auto v = r.numbers("seed_point", 2);
        c.seed_point = Vec2{v[0], v[1]};
    }
    if (r.has("domain")) c.domain = r.box("domain");
    if (r.has("root_box")) c.root_box = r.box("root_box");
    r.opt("depth", c.depth);
    r.opt("cap", c.cap);
    r.opt("length", c.length);
    r.opt("burn_in", c.burn_in);
    r.opt("orbits", c.orbits);
    r.opt("steps", c.steps);
    if (r.has("exclusion_radius")) c.exclusion_radius = r.get<double>("exclusion_radius");
    if (r.has("exclusion_disks")) {
        const json& v = r.raw("exclusion_disks");
        if (!v.is_array()) detail::ConfigReader::fail("exclusion_disks", "expected a list of [x, y, radius]");
        for (const auto& d : v) {
            if (!d.is_array() || d.size() != 3 || !d[0].is_number() || !d[1].is_number() || !d[2].is_number())
                detail::ConfigReader::fail("exclusion_disks", "expected a list of [x, y, radius]");
            c.exclusion_disks.push_back({{d[0].get<double>(), d[1].get<double>()}, d[2].get<double>()});
        }
    }
    r.opt("alpha_source", c.alpha_source);
    r.opt("nonregular_only", c.nonregular_only);
    r.opt("prng_seed", c.prng_seed);
    r.opt("threads", c.threads);

    r.opt("root_tol", c.scan.root_tol);
    r.opt("escape_radius", c.scan.escape_radius);
    r.opt("max_iter", c.scan.max_iter);
    r.opt("cycle_window", c.scan.cycle_window);
    r.opt("cycle_tol", c.scan.cycle_tol);
    r.opt("multiplier_step", c.scan.multiplier_step);

    r.opt("max_period", c.barna.max_period);
    r.opt("samples", c.barna.samples);
    if (r.has("sample_interval")) {
        const auto v = r.numbers("sample_interval", 2);
        c.barna.sample_lo = v[0];
        c.barna.sample_hi = v[1];
    }
    r.opt("barna_max_iter", c.barna.max_iter);
    r.opt("brackets", c.barna.scan.brackets);

    r.opt("probe_seeds", c.probe.seeds);
    r.opt("probe_steps", c.probe.steps);
    r.opt("probe_delta", c.probe.delta);
    r.opt("probe_half_length", c.probe.half_length);
    r.opt("ghost_seeds_per_axis", c.ghost_seeds_per_axis);

    if (r.has("outputs")) {
        const json& o = r.raw("outputs");
        if (!o.is_object()) detail::ConfigReader::fail("outputs", "expected an object of role: file name");
        const auto roles = detail::output_roles(c.mode);
        for (const auto& [role, name] : o.items()) {
            if (std::find(roles.begin(), roles.end(), role) == roles.end())
                detail::ConfigReader::fail("outputs", "role '" + role + "' is not produced by mode " + to_string(c.mode));
            if (!name.is_string()) detail::ConfigReader::fail("outputs", "file names must be strings");
            const std::string s = name.get<std::string>();
            if (s.empty() || s.find('/') != std::string::npos || s.find('\\') != std::string::npos || s == "." ||
                s == "..")
                detail::ConfigReader::fail("outputs", "file names must be plain names without directories");
            c.outputs[role] = s;
        }
    }
    r.check_unknown();

    // derived and cross-field checks
    c.barna.root_tol = c.scan.root_tol;
    c.barna.prng_seed = c.prng_seed;
    c.barna.scan.multiplier_step = c.scan.multiplier_step;
    c.probe.prng_seed = c.prng_seed;
    for (const auto& role : detail::output_roles(c.mode))
        if (!c.outputs.count(role)) c.outputs[role] = detail::default_output(c.mode, role);
    std::set<std::string> names;
    for (const auto& [role, name] : c.outputs)
        if (!names.insert(name).second) throw ConfigError("two outputs share the file name '" + name + "'");

    try {
        c.scan.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }

    const bool needs_map = c.mode != Mode::ParamScan;
    if (needs_map) {
        if (c.map_kind == "complex") {
            if (c.poly.empty()) throw ConfigError("map_kind complex needs 'poly'");
        } else if (c.map_kind == "planar") {
            if (c.f1.empty() || c.f2.empty()) throw ConfigError("map_kind planar needs 'f1' and 'f2'");
        } else if (c.map_kind == "rational") {
            if (c.numerator.empty() || c.denominator.empty())
                throw ConfigError("map_kind rational needs 'numerator' and 'denominator'");
        } else {
            throw ConfigError("map_kind must be complex, planar or rational");
        }
    }

    switch (c.mode) {
    case Mode::Basins: break;
    case Mode::AlphaTree:
        if (!c.seed_point) throw ConfigError("alpha-tree needs 'seed_point'");
        if (c.depth < 1) throw ConfigError("depth must be >= 1");
        if (c.cap < 1) throw ConfigError("cap must be >= 1");
        break;
    case Mode::AlphaRandom:
        if (!c.seed_point) throw ConfigError("alpha-random needs 'seed_point'");
        if (c.burn_in < 0 || c.length <= c.burn_in) throw ConfigError("need length > burn_in >= 0");
        if (c.orbits < 1) throw ConfigError("orbits must be >= 1");
        break;
    case Mode::Ifs:
        if (!c.exclusion_radius && c.exclusion_disks.empty())
            throw ConfigError("ifs needs 'exclusion_radius' or 'exclusion_disks'");
        if (c.exclusion_radius && !(*c.exclusion_radius > 0)) throw ConfigError("exclusion_radius must be positive");
        if (c.steps < 1) throw ConfigError("steps must be >= 1");
        break;
    case Mode::ParamScan:
        if (c.family.empty()) throw ConfigError("param-scan needs 'family'");
        if (!c.seed_point) c.seed_point = Vec2{0.0, 0.0};
        break;
    case Mode::Barna:
        if (c.map_kind != "complex") throw ConfigError("barna needs map_kind complex with a real 'poly'");
        if (c.barna.max_period < 1 || c.barna.max_iter < 1 || c.barna.samples < 1 ||
            !(c.barna.sample_lo < c.barna.sample_hi) || c.barna.scan.brackets < 1)
            throw ConfigError("invalid barna settings");
        break;
    case Mode::Ghost:
        if (c.map_kind != "planar") throw ConfigError("ghost needs map_kind planar");
        if (c.ghost_seeds_per_axis < 1 || c.probe.seeds < 0 || c.probe.steps < 1 || !(c.probe.delta > 0))
            throw ConfigError("invalid ghost probe settings");
        break;
    case Mode::Compare:
        if (c.map_kind == "rational") throw ConfigError("compare needs a complex or planar Newton map");
        if (!c.seed_point) throw ConfigError("compare needs 'seed_point'");
        if (c.alpha_source != "tree" && c.alpha_source != "random")
            throw ConfigError("alpha_source must be tree or random");
        if (c.depth < 1 || c.cap < 1) throw ConfigError("depth and cap must be >= 1");
        if (c.burn_in < 0 || c.length <= c.burn_in || c.orbits < 1)
            throw ConfigError("need length > burn_in >= 0 and orbits >= 1");
        break;
    }
    return c;
}

/// Effective configuration; running it again reproduces the same artifacts.
inline json config_to_json(const JobConfig& c)
{
    json j;
    j["mode"] = to_string(c.mode);
    if (c.mode != Mode::ParamScan) {
        j["map_kind"] = c.map_kind;
        if (c.map_kind == "complex") {
            j["poly"] = c.poly;
            j["variable"] = c.variable;
        } else if (c.map_kind == "planar") {
            j["f1"] = c.f1;
            j["f2"] = c.f2;
        } else {
            j["numerator"] = c.numerator;
            j["denominator"] = c.denominator;
            j["variable"] = c.variable;
        }
    } else {
        j["family"] = c.family;
        j["parameter"] = c.parameter;
        j["variable"] = c.variable;
    }
    j["window"] = detail::box_json(c.window);
    j["resolution"] = json::array({c.width, c.height});
    if (c.seed_point) j["seed_point"] = json::array({c.seed_point->x, c.seed_point->y});
    if (c.domain) j["domain"] = detail::box_json(*c.domain);
    if (c.root_box) j["root_box"] = detail::box_json(*c.root_box);
    j["depth"] = c.depth;
    j["cap"] = c.cap;
    j["length"] = c.length;
    j["burn_in"] = c.burn_in;
    j["orbits"] = c.orbits;
    j["steps"] = c.steps;
    if (c.exclusion_radius) j["exclusion_radius"] = *c.exclusion_radius;
    if (!c.exclusion_disks.empty()) {
        json d = json::array();
        for (const auto& e : c.exclusion_disks) d.push_back(json::array({e.center.x, e.center.y, e.radius}));
        j["exclusion_disks"] = d;
    }
    j["alpha_source"] = c.alpha_source;
    j["nonregular_only"] = c.nonregular_only;
    j["prng_seed"] = c.prng_seed;
    j["root_tol"] = c.scan.root_tol;
    j["escape_radius"] = c.scan.escape_radius;
    j["max_iter"] = c.scan.max_iter;
    j["cycle_window"] = c.scan.cycle_window;
    j["cycle_tol"] = c.scan.cycle_tol;
    j["multiplier_step"] = c.scan.multiplier_step;
    j["max_period"] = c.barna.max_period;
    j["samples"] = c.barna.samples;
    j["sample_interval"] = json::array({c.barna.sample_lo, c.barna.sample_hi});
    j["barna_max_iter"] = c.barna.max_iter;
    j["brackets"] = c.barna.scan.brackets;
    j["probe_seeds"] = c.probe.seeds;
    j["probe_steps"] = c.probe.steps;
    j["probe_delta"] = c.probe.delta;
    j["probe_half_length"] = c.probe.half_length;
    j["ghost_seeds_per_axis"] = c.ghost_seeds_per_axis;
    j["outputs"] = c.outputs;
    return j;
}

/// Parsed polynomials and Newton maps for a validated config.
struct PreparedMap {
    std::string kind;
    std::optional<UniComplexPoly> poly;
    std::optional<NewtonComplexMap> complex_newton;
    std::optional<RationalMap> rational;
    std::optional<PlaneMap> plane;
    std::optional<NewtonPlaneMap> plane_newton;
};

struct PreparedJob {
    JobConfig config;
    std::optional<PreparedMap> map;
    std::shared_ptr<const Expr> family;
};

/// Parses all polynomial text. Errors are ConfigError with line and column.
inline PreparedJob prepare_job(const JobConfig& c)
{
    PreparedJob job{c, std::nullopt, nullptr};
    auto wrap = [](const std::string& key, auto&& fn) {
        try {
            return fn();
        } catch (const ParseError& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidInput& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    };
    if (c.mode == Mode::ParamScan) {
        job.family = wrap("family", [&] { return parse_expression(c.family); });
        // probe one member so unknown identifiers surface now
        wrap("family", [&] {
            return evaluate_complex_poly(*job.family, c.variable, {{c.parameter, cplx(0.0)}});
        });
        return job;
    }
    PreparedMap m;
    m.kind = c.map_kind;
    if (c.map_kind == "complex") {
        m.poly = wrap("poly", [&] { return parse_complex_poly(c.poly, c.variable); });
        if (m.poly->degree() < 1) throw ConfigError("config key 'poly': polynomial must be nonconstant");
        m.complex_newton = build_newton_complex(*m.poly);
        if (c.mode == Mode::Barna && !m.poly->is_real())
            throw ConfigError("config key 'poly': barna needs real coefficients");
    } else if (c.map_kind == "planar") {
        m.plane = wrap("f1/f2", [&] { return parse_plane_map(c.f1, c.f2); });
        if (m.plane->degree() < 1) throw ConfigError("config keys 'f1'/'f2': map must be nonconstant");
        m.plane_newton = build_newton_plane(*m.plane);
    } else {
        const auto num = wrap("numerator", [&] { return parse_complex_poly(c.numerator, c.variable); });
        const auto den = wrap("denominator", [&] { return parse_complex_poly(c.denominator, c.variable); });
        if (den.is_zero()) throw ConfigError("config key 'denominator': must be nonzero");
        m.rational = RationalMap(num, den);
    }
    job.map = std::move(m);
    return job;
}

struct JobResult {
    json report;
    std::vector<std::pair<std::string, std::string>> artifacts; ///< (file name, bytes), report excluded
};

namespace detail {

template <class Fn>
auto stage(const std::string& name, Fn&& fn)
{
    try {
        return fn();
    } catch (const JobRuntimeError&) {
        throw;
    } catch (const std::exception& e) {
        throw JobRuntimeError(name, e.what());
    }
}

inline json vec_json(Vec2 p) { return json::array({p.x, p.y}); }

inline json fractions_json(const BasinRaster& r)
{
    json f = json::object();
    for (const auto& [code, frac] : r.fractions()) {
        const auto it = r.legend.find(code);
        f[std::to_string(code)] = {{"fraction", frac}, {"label", it == r.legend.end() ? "" : it->second}};
    }
    return f;
}

inline json scan_tolerances(const ScanConfig& s)
{
    return {{"root_tol", s.root_tol},         {"escape_radius", s.escape_radius}, {"max_iter", s.max_iter},
            {"cycle_window", s.cycle_window}, {"cycle_tol", s.cycle_tol},         {"multiplier_step", s.multiplier_step}};
}

class JobRunner {
public:
    explicit JobRunner(const PreparedJob& job) : job_(job), c_(job.config) {}

    JobResult run()
    {
        const auto t0 = std::chrono::steady_clock::now();
        json stats;
        switch (c_.mode) {
        case Mode::Basins: stats = run_basins(); break;
        case Mode::AlphaTree: stats = run_alpha_tree(); break;
        case Mode::AlphaRandom: stats = run_alpha_random(); break;
        case Mode::Ifs: stats = run_ifs(); break;
        case Mode::ParamScan: stats = run_param_scan(); break;
        case Mode::Barna: stats = run_barna(); break;
        case Mode::Ghost: stats = run_ghost(); break;
        case Mode::Compare: stats = run_compare(); break;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        timings_["total_seconds"] = secs;
        timings_["threads"] = c_.threads;

        json rep;
        rep["schema_version"] = kReportSchemaVersion;
        rep["version"] = NEWTONDYN_VERSION;
        rep["mode"] = to_string(c_.mode);
        rep["config"] = config_to_json(c_);
        rep["tolerances"] = tolerances();
        rep["statistics"] = std::move(stats);
        rep["notes"] = notes_;
        json arts = json::array();
        for (const auto& a : result_.artifacts) arts.push_back(a.first);
        rep["artifacts"] = arts;
        rep["timings"] = timings_;
        result_.report = std::move(rep);
        return std::move(result_);
    }

private:
    const PreparedMap& map() const { return *job_.map; }
    bool planar() const { return map().kind == "planar"; }

    json tolerances() const
    {
        json t = scan_tolerances(c_.scan);
        t["root_solver_tol"] = 1e-10;
        t["root_merge_radius"] = 1e-9;
        t["singular_threshold"] = "|det| < 1e-12 (1 + ||D||_inf)";
        t["counterimage_residual"] = 1e-8;
        return t;
    }

    void add_artifact(const std::string& role, std::string bytes)
    {
        result_.artifacts.emplace_back(c_.outputs.at(role), std::move(bytes));
    }

    void timed(const std::string& name, const std::function<void()>& fn)
    {
        const auto t0 = std::chrono::steady_clock::now();
        stage(name, fn);
        timings_[name + "_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    std::vector<Vec2> roots()
    {
        if (roots_) return *roots_;
        std::vector<Vec2> r;
        if (map().kind == "complex") {
            r = complex_root_points(*map().poly);
        } else if (planar()) {
            r = system_real_roots(*map().plane, c_.root_box.value_or(c_.window)).roots;
        }
        roots_ = r;
        return r;
    }

    json roots_json()
    {
        json a = json::array();
        for (Vec2 p : roots()) a.push_back(vec_json(p));
        return a;
    }

    InverseMap inverse() const
    {
        if (map().kind == "complex") return InverseMap::complex(*map().complex_newton);
        if (map().kind == "rational") return InverseMap::complex(*map().rational);
        return InverseMap::planar(*map().plane_newton, c_.domain.value_or(c_.window));
    }

    BasinScan basins()
    {
        const auto r = roots();
        const unsigned th = c_.threads;
        if (map().kind == "complex")
            return render_basins(*map().complex_newton, r, c_.window, c_.width, c_.height, c_.scan, th);
        if (map().kind == "rational")
            return render_basins(*map().rational, r, c_.window, c_.width, c_.height, c_.scan, th);
        return render_basins(*map().plane_newton, r, c_.window, c_.width, c_.height, c_.scan, th);
    }

    json basin_stats(const BasinScan& s)
    {
        json j;
        j["roots"] = roots_json();
        j["fractions"] = fractions_json(s.raster);
        j["cycle_pixels"] = s.cycles.size();
        j["budget"] = scan_tolerances(c_.scan);
        return j;
    }

    void note_branch_law()
    {
        if (map().kind == "planar")
            notes_.push_back(
                "planar counterimages: uniform choice among the real counterimages found in the search domain; "
                "the branch count varies with the point, so this is not the d^-k Bernoulli law");
        else
            notes_.push_back("complex counterimages: uniform choice among the d counterimages counted with multiplicity");
    }

    /// Hausdorff distance of an alpha raster to the basin boundary, or null
    /// when the map has fewer than two attractors in the window.
    json alpha_vs_boundary(const OccupancyRaster& alpha)
    {
        if (map().kind == "rational" || alpha.empty()) return nullptr;
        std::optional<BoundaryRaster> b;
        timed("extract_boundary", [&] {
            const auto scan = basins();
            try {
                b = extract_boundary(scan.raster);
            } catch (const InvalidInput&) {
                b.reset();
            }
        });
        if (!b || b->boundary.empty()) return nullptr;
        const auto full = compare_alpha_boundary(alpha, *b, false);
        json j{{"hausdorff_pixels", full.hausdorff_pixels},
               {"alpha_to_boundary_pixels", full.alpha_to_boundary},
               {"boundary_to_alpha_pixels", full.boundary_to_alpha},
               {"boundary_pixel_count", full.boundary_pixel_count},
               {"alpha_pixel_count", full.alpha_pixel_count},
               {"nonregular_fraction", full.nonregular_fraction},
               {"nonregular_rule", "3x3 block with >= 3 attractor codes"}};
        if (!b->nonregular.empty())
            j["hausdorff_pixels_nonregular"] = compare_alpha_boundary(alpha, *b, true).hausdorff_pixels;
        return j;
    }

    json run_basins()
    {
        BasinScan s;
        timed("render_basins", [&] { s = basins(); });
        add_artifact("image", ppm_bytes(s.raster));
        return basin_stats(s);
    }

    OccupancyRaster tree_raster(json& stats)
    {
        BackwardTree t;
        timed("backward_tree", [&] {
            t = backward_tree(inverse(), *c_.seed_point, c_.depth, c_.cap, c_.window, c_.width, c_.height, c_.threads);
        });
        stats["requested_depth"] = c_.depth;
        stats["completed_depth"] = t.completed_depth;
        stats["nodes"] = t.nodes;
        stats["cap"] = c_.cap;
        stats["level_size"] = t.level_size;
        stats["partial"] = t.raster.partial();
        stats["set_pixels"] = t.raster.count();
        return t.raster;
    }

    OccupancyRaster random_raster(json& stats, std::vector<Vec2>* all_points)
    {
        OccupancyRaster acc(c_.window, c_.width, c_.height);
        json orbits = json::array();
        const InverseMap inv = inverse();
        std::vector<BackwardOrbit> runs(static_cast<std::size_t>(c_.orbits));
        timed("random_backward_orbit", [&] {
            parallel_for(runs.size(), c_.threads, [&](std::size_t i) {
                runs[i] = random_backward_orbit(inv, *c_.seed_point, c_.length, c_.burn_in, c_.prng_seed, i);
            });
        });
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& o = runs[i];
            acc = union_of(acc, rasterize(o.points, c_.window, c_.width, c_.height));
            if (all_points) all_points->insert(all_points->end(), o.points.begin(), o.points.end());
            orbits.push_back({{"stream", i},
                              {"recorded_points", o.points.size()},
                              {"truncated", o.truncated},
                              {"backtracks", o.backtracks}});
        }
        stats["orbits"] = orbits;
        stats["length"] = c_.length;
        stats["burn_in"] = c_.burn_in;
        stats["prng"] = "mt19937_64 seeded with splitmix64(splitmix64(prng_seed) ^ orbit_index)";
        stats["set_pixels"] = acc.count();
        note_branch_law();
        return acc;
    }

    json run_alpha_tree()
    {
        json stats;
        const OccupancyRaster r = tree_raster(stats);
        add_artifact("image", ppm_bytes(r));
        stats["vs_boundary"] = alpha_vs_boundary(r);
        return stats;
    }

    json run_alpha_random()
    {
        json stats;
        std::vector<Vec2> pts;
        const OccupancyRaster r = random_raster(stats, &pts);
        add_artifact("image", ppm_bytes(r));
        add_artifact("orbit_csv", csv_bytes(pts));
        stats["vs_boundary"] = alpha_vs_boundary(r);
        return stats;
    }

    json run_ifs()
    {
        std::vector<Disk> disks = c_.exclusion_disks;
        if (c_.exclusion_radius)
            for (Vec2 r : roots()) disks.push_back({r, *c_.exclusion_radius});
        HutchinsonRun run;
        timed("hutchinson_iterate", [&] {
            run = hutchinson_iterate(inverse(), OccupancyRaster::full(c_.window, c_.width, c_.height), disks, c_.steps,
                                     c_.threads);
        });
        add_artifact("image", ppm_bytes(run.iterates.back()));
        json d = json::array();
        for (const auto& e : disks) d.push_back(json::array({e.center.x, e.center.y, e.radius}));
        json counts = json::array();
        for (const auto& k : run.iterates) counts.push_back(k.count());
        note_branch_law();
        return {{"steps", c_.steps},     {"exclusion_disks", d},   {"hausdorff_gaps_pixels", run.gaps},
                {"set_pixels", counts}, {"final_gap_pixels", run.gaps.back()}};
    }

    json run_param_scan()
    {
        const auto expr = job_.family;
        const std::string var = c_.variable, par = c_.parameter;
        const PolyFamily fam = [expr, var, par](cplx a) { return evaluate_complex_poly(*expr, var, {{par, a}}); };
        BasinScan s;
        timed("parameter_scan", [&] {
            s = parameter_scan(fam, to_complex(*c_.seed_point), c_.window, c_.width, c_.height, c_.scan, c_.threads);
        });
        add_artifact("image", ppm_bytes(s.raster));
        json cycles = json::array();
        std::size_t attracting = 0;
        for (const auto& h : s.cycles) {
            if (h.outcome.multiplier < 1.0) ++attracting;
            if (cycles.size() < 100) {
                const Vec2 a = s.raster.grid.center(h.pixel);
                cycles.push_back({{"parameter", vec_json(a)},
                                  {"period", h.outcome.period},
                                  {"point", vec_json(h.outcome.point)},
                                  {"multiplier", h.outcome.multiplier}});
            }
        }
        return {{"fractions", fractions_json(s.raster)},
                {"cycle_pixels", s.cycles.size()},
                {"attracting_cycle_pixels", attracting},
                {"cycles_listed", cycles},
                {"budget", scan_tolerances(c_.scan)}};
    }

    json run_barna()
    {
        BarnaReport rep;
        timed("barna_check", [&] { rep = barna_check(*map().poly, c_.barna, c_.threads); });
        json roots = json::array();
        for (const auto& r : rep.roots)
            roots.push_back({{"re", r.value.real()}, {"im", r.value.imag()}, {"multiplicity", r.multiplicity}});
        json periods = json::array();
        for (const auto& f : rep.periods) {
            json cycles = json::array();
            for (const auto& cy : f.cycles)
                cycles.push_back({{"points", cy.points},
                                  {"multiplier", cy.multiplier},
                                  {"stability", to_string(cy.stability)}});
            periods.push_back({{"period", f.period},
                               {"cycles", cycles},
                               {"minimal_period_cycles", f.cycles.size()},
                               {"periodic_points", f.periodic_points},
                               {"bound", f.bound},
                               {"bound_ok", f.bound_ok}});
        }
        notes_.push_back("periodic_points counts all real solutions of N^k(x) = x, compared with (n-2)^k");
        return {{"polynomial", rep.polynomial},
                {"degree", rep.degree},
                {"roots", roots},
                {"all_roots_real", rep.all_roots_real},
                {"simple_roots", rep.simple_roots},
                {"hypotheses_met", rep.hypotheses_met},
                {"hypothesis_notes", rep.notes},
                {"scan_interval", json::array({rep.scan_lo, rep.scan_hi})},
                {"periods", periods},
                {"attracting_cycle_period_ge_2", rep.attracting_cycle_period_ge_2},
                {"nonconvergent_fraction", rep.nonconvergent_fraction},
                {"sample_count", rep.sample_count},
                {"sample_interval", json::array({c_.barna.sample_lo, c_.barna.sample_hi})},
                {"budget", {{"max_iter", c_.barna.max_iter}, {"root_tol", c_.barna.root_tol}}},
                {"brackets_per_piece", c_.barna.scan.brackets}};
    }

    json run_ghost()
    {
        std::vector<GhostProbe> probes;
        GhostSearchOptions search;
        search.seeds_per_axis = c_.ghost_seeds_per_axis;
        timed("ghost_lines", [&] { probes = probe_ghost_attractors(*map().plane, c_.window, c_.probe, search); });
        json lines = json::array();
        for (const auto& p : probes) {
            lines.push_back({{"base", vec_json(p.line.base)},
                             {"direction", vec_json(p.line.direction)},
                             {"solution",
                              {{"z", {p.line.solution[0].real(), p.line.solution[0].imag()}},
                               {"w", {p.line.solution[1].real(), p.line.solution[1].imag()}}}},
                             {"invariance_defect", p.invariance_defect},
                             {"line_invariant", p.line_invariant},
                             {"seeds", p.seeds},
                             {"stayed_within_delta", p.stayed},
                             {"fraction_within_delta", p.fraction_within},
                             {"singular_hits", p.singular_hits},
                             {"divergence_rate", p.divergence_rate},
                             {"divergence_pairs", p.divergence_pairs}});
        }
        return {{"ghost_lines", lines},
                {"probe", {{"delta", c_.probe.delta}, {"steps", c_.probe.steps}, {"half_length", c_.probe.half_length},
                           {"divergence_steps", c_.probe.divergence_steps}, {"separation", c_.probe.separation},
                           {"invariance_tol", c_.probe.invariance_tol}}},
                {"seeds_per_axis", c_.ghost_seeds_per_axis}};
    }

    json run_compare()
    {
        BasinScan s;
        timed("render_basins", [&] { s = basins(); });
        BoundaryRaster b;
        timed("extract_boundary", [&] { b = extract_boundary(s.raster); });
        json stats;
        stats["basins"] = basin_stats(s);
        json alpha_stats;
        const OccupancyRaster alpha =
            c_.alpha_source == "tree" ? tree_raster(alpha_stats) : random_raster(alpha_stats, nullptr);
        stats["alpha"] = alpha_stats;
        stats["alpha_source"] = c_.alpha_source;
        BoundaryComparison cmp;
        timed("compare_alpha_boundary", [&] { cmp = compare_alpha_boundary(alpha, b, c_.nonregular_only); });
        stats["comparison"] = {{"hausdorff_pixels", cmp.hausdorff_pixels},
                               {"alpha_to_boundary_pixels", cmp.alpha_to_boundary},
                               {"boundary_to_alpha_pixels", cmp.boundary_to_alpha},
                               {"boundary_pixel_count", cmp.boundary_pixel_count},
                               {"alpha_pixel_count", cmp.alpha_pixel_count},
                               {"nonregular_fraction", cmp.nonregular_fraction},
                               {"nonregular_only", cmp.nonregular_only},
                               {"nonregular_rule", "3x3 block with >= 3 attractor codes"}};
        add_artifact("image", ppm_bytes(s.raster));
        add_artifact("boundary_image", ppm_bytes(cmp.nonregular_only ? b.nonregular : b.boundary));
        add_artifact("alpha_image", ppm_bytes(alpha));
        return stats;
    }

    const PreparedJob& job_;
    const JobConfig& c_;
    JobResult result_;
    json timings_ = json::object();
    json notes_ = json::array();
    std::optional<std::vector<Vec2>> roots_;
};

} // namespace detail

/// Runs a prepared job entirely in memory. Failures are JobRuntimeError
/// naming the operation.
inline JobResult run_job(const PreparedJob& job) { return detail::JobRunner(job).run(); }

inline JobResult run_job(const JobConfig& config) { return run_job(prepare_job(config)); }

/// Writes artifacts, then the report, into `out_dir` (created if missing).
inline std::vector<std::string> write_job_outputs(const JobResult& result, const JobConfig& config,
                                                  const std::string& out_dir)
{
    std::vector<std::string> written;
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());
    for (const auto& [name, bytes] : result.artifacts) {
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        write_file(path, bytes);
        written.push_back(path);
    }
    const std::string report = (std::filesystem::path(out_dir) / config.outputs.at("report")).string();
    write_file(report, result.report.dump(2) + "\n");
    written.push_back(report);
    return written;
}

} // namespace newtondyn
