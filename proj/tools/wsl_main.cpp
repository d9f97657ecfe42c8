#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsl/dynamics.hpp"
#include "wsl/errors.hpp"
#include "wsl/io.hpp"
#include "wsl/model.hpp"
#include "wsl/modes.hpp"
#include "wsl/saddle.hpp"
#include "wsl/scan.hpp"
#include "wsl/stability.hpp"
#include "wsl/system.hpp"
#include "wsl/threshold.hpp"
#include "wsl/units.hpp"
#include "wsl/version.hpp"

// Batch front end. Every command resolves its configuration (flags override
// an optional JSON config file), writes plain-text outputs at full round-trip
// precision, and drops a manifest with digests of everything it wrote, so a
// rerun from the same config is byte-identical.
//
// Exit codes: 0 completed (including classified trajectory failures),
// 2 configuration error, 3 numerical non-convergence.

namespace {

using nlohmann::json;
using namespace wsl;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Two-way binding between config-file keys and the option variables, so a
// config file can seed any value the equivalent flag would set and the
// manifest can dump the fully resolved configuration.
struct ConfigBinder {
    std::vector<std::string> keys;
    std::map<std::string, std::function<void(const json&)>> setters;
    std::map<std::string, std::function<json()>> getters;

    template <class T>
    void bind(const std::string& key, T& var)
    {
        keys.push_back(key);
        setters[key] = [&var](const json& v) { var = v.get<T>(); };
        getters[key] = [&var] { return json(var); };
    }

    static std::string flag_name(const std::string& key)
    {
        std::string f = "--" + key;
        for (char& c : f)
            if (c == '_')
                c = '-';
        return f;
    }

    void overlay(const CLI::App* cmd, const json& cfg) const
    {
        if (!cfg.is_object())
            throw ConfigError("config file must hold a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            const auto it = setters.find(key);
            if (it == setters.end())
                throw ConfigError("unknown config key: " + key);
            const CLI::Option* opt = cmd->get_option_no_throw(flag_name(key));
            if (opt != nullptr && opt->count() > 0)
                continue;  // explicit flags override file values
            try {
                it->second(value);
            } catch (const json::exception& e) {
                throw ConfigError("config key '" + key + "': " + e.what());
            }
        }
    }

    json resolved() const
    {
        json j = json::object();
        for (const std::string& k : keys)
            j[k] = getters.at(k)();
        return j;
    }
};

std::string out_stem(const std::string& path)
{
    const std::size_t slash = path.find_last_of('/');
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path;
    return path.substr(0, dot);
}

// Collects outputs, then writes them plus the manifest in one go.
struct RunContext {
    std::string command;
    json config;
    json summary;
    std::vector<std::pair<std::string, std::string>> files;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void add_file(const std::string& path, const std::string& content)
    {
        files.emplace_back(path, content);
    }

    void finish(const std::string& primary_out)
    {
        RunManifest m;
        m.command = command;
        m.config = config;
        m.summary = summary;
        for (const auto& [path, content] : files) {
            write_text_file(path, content);
            m.add_output(path, content);
        }
        m.duration_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m.write(out_stem(primary_out) + ".manifest.json");
    }
};

json load_config(const std::string& path)
{
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
}

// System parameters shared by every command that integrates or analyzes.
struct SysOpts {
    double Z = 2.0;
    double F = 1.0;
    double f_kv_cm = 0.0;
    CLI::Option* o_fkv = nullptr;

    void add_to(CLI::App* cmd, ConfigBinder& b)
    {
        CLI::Option* oZ = cmd->add_option("--Z", Z, "nuclear charge, >= 1")
                              ->capture_default_str();
        CLI::Option* oF = cmd->add_option("--F", F, "field strength, atomic units")
                              ->capture_default_str();
        o_fkv = cmd->add_option("--F-kv-cm", f_kv_cm, "field strength in kV/cm");
        o_fkv->excludes(oF);
        oF->excludes(o_fkv);
        (void)oZ;
        b.bind("Z", Z);
        b.bind("F", F);
    }

    SystemParams resolve()
    {
        if (o_fkv != nullptr && o_fkv->count() > 0)
            F = units::field_from_kv_per_cm(f_kv_cm);
        return SystemParams(Z, F);
    }
};

// ---------------------------------------------------------------- saddle

struct SaddleOpts {
    SysOpts sys;
    std::string out = "saddle.json";
    std::string format = "json";
    std::string config_path;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add_to(CLI::App& app)
    {
        cmd = app.add_subcommand("saddle",
                                 "Report the field-induced saddle: position, energy "
                                 "(hartree and eV), stability rates, and the threshold "
                                 "exponent. Writes a JSON report.");
        sys.add_to(cmd, binder);
        cmd->add_option("--out", out, "output JSON path")->capture_default_str();
        cmd->add_option("--format", format, "output format (json)")
            ->check(CLI::IsMember({"json"}));
        cmd->add_option("--config", config_path, "JSON config file; flags override");
        binder.bind("out", out);
        binder.bind("format", format);
    }
};

int run_saddle(SaddleOpts& o)
{
    RunContext ctx;
    ctx.command = "saddle";
    if (!o.config_path.empty())
        o.binder.overlay(o.cmd, load_config(o.config_path));
    const SystemParams sp = o.sys.resolve();
    ctx.config = o.binder.resolved();

    const StabilitySpectrum spec = stability_spectrum(sp);
    const NormalModeFrame frame = normal_mode_frame(sp);
    const SaddleInfo& s = spec.saddle;
    const double alpha = threshold_exponent(sp.Z);
    const double angle_deg = std::atan(s.locus_ratio) * 180.0 / M_PI;

    json rep;
    rep["Z"] = sp.Z;
    rep["F_au"] = sp.F;
    rep["F_kv_cm"] = units::field_to_kv_per_cm(sp.F);
    rep["a"] = s.a;
    rep["r_s"] = s.r_s;
    rep["z_s"] = s.z_s;
    rep["locus_ratio"] = s.locus_ratio;
    rep["locus_angle_deg"] = angle_deg;
    rep["V_s_hartree"] = s.v_s;
    rep["V_s_ev"] = units::hartree_to_ev(s.v_s);
    rep["mu2"] = spec.mu2_closed;
    rep["nu2"] = spec.nu2_closed;
    rep["mu2_numeric"] = spec.mu2_numeric;
    rep["nu2_numeric"] = spec.nu2_numeric;
    rep["zero_mode"] = spec.zero_mode;
    rep["mu"] = frame.mu;
    rep["nu"] = frame.nu;
    rep["omega"] = {frame.omega[0], frame.omega[1], frame.omega[2]};
    rep["alpha"] = alpha;
    rep["wannier_alpha"] = wannier_exponent(sp.Z);
    ctx.add_file(o.out, rep.dump(2) + "\n");

    std::printf("saddle: r_s = %.6f, z_s = %.6f  (locus angle %.4f deg)\n", s.r_s, s.z_s,
                angle_deg);
    std::printf("V_s = %.6f hartree = %.6f eV\n", s.v_s, units::hartree_to_ev(s.v_s));
    std::printf("mu = %.6f, nu = %.6f, omega = %.6f, %.6f, %.6f\n", frame.mu, frame.nu,
                frame.omega[0], frame.omega[1], frame.omega[2]);
    std::printf("alpha = %.6f  (zero-field Wannier %.6f)\n", alpha, wannier_exponent(sp.Z));

    ctx.summary = {{"V_s_hartree", s.v_s}, {"V_s_ev", units::hartree_to_ev(s.v_s)},
                   {"alpha", alpha}};
    ctx.finish(o.out);
    return exit_ok;
}

// ----------------------------------------------------------------- table

struct TableOpts {
    std::vector<double> charges = {1.0, 2.0, 3.0, 4.0, 5.0};
    std::string out = "table.csv";
    std::string format = "csv";
    std::string config_path;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add_to(CLI::App& app)
    {
        cmd = app.add_subcommand("table",
                                 "Tabulate the threshold exponent alpha and the "
                                 "zero-field Wannier exponent per charge. CSV columns: "
                                 "Z,alpha,wannier_alpha.");
        cmd->add_option("--Z", charges, "charges, in order (duplicates preserved)")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--out", out, "output path")->capture_default_str();
        cmd->add_option("--format", format, "output format")
            ->check(CLI::IsMember({"csv", "json"}))
            ->capture_default_str();
        cmd->add_option("--config", config_path, "JSON config file; flags override");
        binder.bind("Z", charges);
        binder.bind("out", out);
        binder.bind("format", format);
    }
};

int run_table(TableOpts& o)
{
    RunContext ctx;
    ctx.command = "table";
    if (!o.config_path.empty())
        o.binder.overlay(o.cmd, load_config(o.config_path));
    ctx.config = o.binder.resolved();

    const std::vector<ExponentRecord> table = exponent_table(o.charges);
    if (o.format == "csv") {
        CsvWriter w({"Z", "alpha", "wannier_alpha"});
        for (const ExponentRecord& r : table)
            w.row(r.Z, r.alpha, r.wannier_alpha);
        ctx.add_file(o.out, w.str());
    } else {
        json rows = json::array();
        for (const ExponentRecord& r : table)
            rows.push_back({{"Z", r.Z}, {"alpha", r.alpha}, {"wannier_alpha", r.wannier_alpha}});
        ctx.add_file(o.out, rows.dump(2) + "\n");
    }

    std::printf("%6s  %10s  %14s\n", "Z", "alpha", "wannier_alpha");
    for (const ExponentRecord& r : table)
        std::printf("%6g  %10.6f  %14.6f\n", r.Z, r.alpha, r.wannier_alpha);

    ctx.summary = {{"rows", table.size()}};
    ctx.finish(o.out);
    return exit_ok;
}

// --------------------------------------------------------------- contour

struct ContourOpts {
    SysOpts sys;
    double r_min = 0.0, r_max = 0.0, z_min = 0.0, z_max = 0.0;  // 0 = auto
    std::size_t nr = 121, nz = 121;
    std::string out = "contour.csv";
    std::string config_path;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add_to(CLI::App& app)
    {
        cmd = app.add_subcommand("contour",
                                 "Sample the symmetric-configuration potential V(r, z) on "
                                 "a grid (CSV columns r,z,V) and write the saddle locus "
                                 "ray to <out stem>.locus.csv for overlay.");
        sys.add_to(cmd, binder);
        cmd->add_option("--r-min", r_min, "grid r lower edge, bohr (0 = auto)");
        cmd->add_option("--r-max", r_max, "grid r upper edge, bohr (0 = auto)");
        cmd->add_option("--z-min", z_min, "grid z lower edge, bohr (0 = auto)");
        cmd->add_option("--z-max", z_max, "grid z upper edge, bohr (0 = auto)");
        cmd->add_option("--nr", nr, "grid points along r")->capture_default_str();
        cmd->add_option("--nz", nz, "grid points along z")->capture_default_str();
        cmd->add_option("--out", out, "output CSV path")->capture_default_str();
        cmd->add_option("--config", config_path, "JSON config file; flags override");
        binder.bind("r_min", r_min);
        binder.bind("r_max", r_max);
        binder.bind("z_min", z_min);
        binder.bind("z_max", z_max);
        binder.bind("nr", nr);
        binder.bind("nz", nz);
        binder.bind("out", out);
    }
};

int run_contour(ContourOpts& o)
{
    RunContext ctx;
    ctx.command = "contour";
    if (!o.config_path.empty())
        o.binder.overlay(o.cmd, load_config(o.config_path));
    const SystemParams sp = o.sys.resolve();

    const double scale = saddle_length_scale(sp);
    if (o.r_min <= 0.0)
        o.r_min = 0.05 * scale;
    if (o.r_max <= 0.0)
        o.r_max = 3.0 * scale;
    if (o.z_min <= 0.0)
        o.z_min = 0.05 * scale;
    if (o.z_max <= 0.0)
        o.z_max = 3.0 * scale;
    ctx.config = o.binder.resolved();

    const ContourGrid grid = contour_grid(sp, o.r_min, o.r_max, o.z_min, o.z_max, o.nr, o.nz);
    CsvWriter w({"r", "z", "V"});
    double v_min = std::numeric_limits<double>::infinity();
    double r_at = 0.0, z_at = 0.0;
    for (std::size_t j = 0; j < grid.z.size(); ++j)
        for (std::size_t i = 0; i < grid.r.size(); ++i) {
            const double v = grid.at(j, i);
            w.row(grid.r[i], grid.z[j], v);
            if (v < v_min) {
                v_min = v;
                r_at = grid.r[i];
                z_at = grid.z[j];
            }
        }
    ctx.add_file(o.out, w.str());

    // ray through the saddle: r/z is pinned by the charge alone
    const SaddleInfo s = saddle_analytic(sp);
    CsvWriter lw({"r", "z", "V"});
    const int n_ray = 41;
    for (int k = 0; k < n_ray; ++k) {
        const double z = (0.2 + 2.3 * double(k) / double(n_ray - 1)) * s.z_s;
        const double r = s.locus_ratio * z;
        lw.row(r, z, potential_symmetric(r, z, sp));
    }
    const std::string locus_path = out_stem(o.out) + ".locus.csv";
    ctx.add_file(locus_path, lw.str());

    std::printf("grid %zux%zu over r in [%.3f, %.3f], z in [%.3f, %.3f]\n", o.nr, o.nz,
                o.r_min, o.r_max, o.z_min, o.z_max);
    std::printf("grid minimum V = %.6f at r = %.4f, z = %.4f (saddle V_s = %.6f at r_s = "
                "%.4f, z_s = %.4f)\n",
                v_min, r_at, z_at, s.v_s, s.r_s, s.z_s);

    ctx.summary = {{"grid_min_V", v_min}, {"V_s", s.v_s}, {"locus_ratio", s.locus_ratio},
                   {"locus_file", locus_path}};
    ctx.finish(o.out);
    return exit_ok;
}

// ------------------------------------------------------------ trajectory

struct TrajectoryOpts {
    SysOpts sys;
    std::string preset = "downhill";
    std::vector<double> q, p;
    double eps_rel = 1e-3;
    double x0_frac = 0.1;
    double max_time = 0.0;
    int n_samples = 400;
    std::string out = "trajectory.csv";
    std::string config_path;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add_to(CLI::App& app)
    {
        cmd = app.add_subcommand("trajectory",
                                 "Integrate one two-electron trajectory and dump it as "
                                 "CSV (t, the 12 phase-space components, energy) plus a "
                                 "classified outcome.");
        sys.add_to(cmd, binder);
        cmd->add_option("--preset", preset,
                        "initial state: 'saddle' (at rest on the saddle) or 'downhill' "
                        "(symmetric launch below the saddle at --eps-rel excess energy)")
            ->check(CLI::IsMember({"saddle", "downhill"}))
            ->capture_default_str();
        CLI::Option* oq = cmd->add_option("--q", q, "positions x1,y1,z1,x2,y2,z2 (bohr)")
                              ->delimiter(',')
                              ->expected(6);
        CLI::Option* op = cmd->add_option("--p", p, "momenta p1x,...,p2z (atomic units)")
                              ->delimiter(',')
                              ->expected(6);
        oq->needs(op);
        op->needs(oq);
        cmd->add_option("--eps-rel", eps_rel,
                        "downhill preset: excess energy above V_s, in units of |V_s|")
            ->capture_default_str();
        cmd->add_option("--x0-frac", x0_frac,
                        "downhill preset: launch offset below the saddle, in units of "
                        "the saddle length scale")
            ->capture_default_str();
        cmd->add_option("--max-time", max_time, "integration time cap (0 = auto)");
        cmd->add_option("--samples", n_samples, "number of CSV sample intervals")
            ->capture_default_str();
        cmd->add_option("--out", out, "output CSV path")->capture_default_str();
        cmd->add_option("--config", config_path, "JSON config file; flags override");
        binder.bind("preset", preset);
        binder.bind("q", q);
        binder.bind("p", p);
        binder.bind("eps_rel", eps_rel);
        binder.bind("x0_frac", x0_frac);
        binder.bind("max_time", max_time);
        binder.bind("samples", n_samples);
        binder.bind("out", out);
    }
};

int run_trajectory(TrajectoryOpts& o)
{
    RunContext ctx;
    ctx.command = "trajectory";
    if (!o.config_path.empty())
        o.binder.overlay(o.cmd, load_config(o.config_path));
    const SystemParams sp = o.sys.resolve();
    ctx.config = o.binder.resolved();

    if (o.n_samples < 1)
        throw ConfigError("trajectory: --samples must be >= 1");
    if (!o.q.empty() && (o.q.size() != 6 || o.p.size() != 6))
        throw ConfigError("trajectory: --q and --p each need exactly 6 components");

    PhaseState s0;
    if (!o.q.empty()) {
        for (int i = 0; i < 6; ++i) {
            s0.q[i] = o.q[std::size_t(i)];
            s0.p[i] = o.p[std::size_t(i)];
        }
    } else if (o.preset == "saddle") {
        s0.q = saddle_analytic(sp).q;
        s0.p = Vec6::Zero();
    } else {
        const NormalModeFrame frame = normal_mode_frame(sp);
        const double eps = o.eps_rel * std::abs(frame.saddle.v_s);
        const double x0 = -o.x0_frac * saddle_length_scale(sp);
        s0 = make_flux_sample(frame, eps, x0, 0.0, 0.0, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0},
                              ShellConvention::full)
                 .state;
    }

    IntegratorControls ic;
    ic.max_time = o.max_time;
    const double horizon =
        ic.max_time > 0.0 ? ic.max_time : 200.0 / std::sqrt(mu_squared(sp));
    std::vector<double> times(std::size_t(o.n_samples) + 1);
    for (std::size_t i = 0; i < times.size(); ++i)
        times[i] = horizon * double(i) / double(o.n_samples);

    const Trajectory tr = integrate(s0, sp, ic, times);
    const TrajectoryOutcome outcome = classify(tr);

    CsvWriter w({"t", "q1x", "q1y", "q1z", "q2x", "q2y", "q2z", "p1x", "p1y", "p1z", "p2x",
                 "p2y", "p2z", "energy"});
    for (const TrajectorySample& smp : tr.samples)
        w.row(smp.t, smp.state.q[0], smp.state.q[1], smp.state.q[2], smp.state.q[3],
              smp.state.q[4], smp.state.q[5], smp.state.p[0], smp.state.p[1],
              smp.state.p[2], smp.state.p[3], smp.state.p[4], smp.state.p[5], smp.energy);
    ctx.add_file(o.out, w.str());

    std::printf("outcome: %s at t = %.4f  (escaped electrons: %d)\n",
                to_string(outcome.label), outcome.time, outcome.n_escaped);
    std::printf("energy = %.12f hartree, max relative drift = %.3e, end time = %.4f\n",
                tr.energy0, tr.max_energy_drift, tr.end_time);
    if (outcome.label == OutcomeLabel::Failure)
        std::printf("failure reason: %s\n", to_string(outcome.failure));

    ctx.summary = {{"outcome", to_string(outcome.label)},
                   {"decision_time", outcome.time},
                   {"n_escaped", outcome.n_escaped},
                   {"failure", to_string(outcome.failure)},
                   {"energy0", tr.energy0},
                   {"max_energy_drift", tr.max_energy_drift},
                   {"end_time", tr.end_time},
                   {"rows", tr.samples.size()}};
    ctx.finish(o.out);
    return exit_ok;  // a classified Failure is still a completed run
}

// ---------------------------------------------------------- threshold-scan

struct ScanOpts {
    SysOpts sys;
    std::string method = "bisection";
    ScanControls controls;
    std::string out = "scan.csv";
    std::string config_path;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add_to(CLI::App& app)
    {
        cmd = app.add_subcommand("threshold-scan",
                                 "Measure the double-escape window across an excess-energy "
                                 "grid and fit the threshold exponent. Writes measurements "
                                 "CSV (epsilon,width_or_fraction,stderr) and a JSON fit "
                                 "report to <out stem>.fit.json.");
        sys.add_to(cmd, binder);
        cmd->add_option("--method", method, "bisection | monte_carlo | harmonic")
            ->check(CLI::IsMember({"bisection", "monte_carlo", "harmonic"}))
            ->capture_default_str();
        cmd->add_option("--eps-min", controls.eps_rel_min,
                        "grid lower edge, in units of |V_s|")
            ->capture_default_str();
        cmd->add_option("--eps-max", controls.eps_rel_max,
                        "grid upper edge, in units of |V_s|")
            ->capture_default_str();
        cmd->add_option("--points-per-decade", controls.points_per_decade, "grid density")
            ->capture_default_str();
        cmd->add_option("--samples", controls.mc.samples_per_eps,
                        "Monte Carlo samples per energy")
            ->capture_default_str();
        cmd->add_option("--seed", controls.seed, "random seed (Monte Carlo)")
            ->capture_default_str();
        cmd->add_option("--workers", controls.workers,
                        "worker threads (0 = WSL_WORKERS env, then hardware)")
            ->capture_default_str();
        cmd->add_option("--x0-frac", controls.x0_frac,
                        "launch offset below the saddle, in units of the saddle length "
                        "scale")
            ->capture_default_str();
        cmd->add_option("--x-exit-frac", controls.x_exit_frac,
                        "escape bookkeeping distance, in units of |x0|")
            ->capture_default_str();
        cmd->add_option("--bisect-tol", controls.bisect_rel_tol,
                        "relative bisection tolerance on the window edge")
            ->capture_default_str();
        cmd->add_option("--fit-lo", controls.fit_window_lo,
                        "fit window lower edge, hartree above the saddle (0 = whole grid)");
        cmd->add_option("--fit-hi", controls.fit_window_hi,
                        "fit window upper edge, hartree above the saddle (0 = auto cap)");
        cmd->add_option("--fit-cap", controls.fit_window_cap,
                        "auto fit window: eps <= cap * mu^2 x0^2")
            ->capture_default_str();
        cmd->add_option("--out", out, "measurements CSV path")->capture_default_str();
        cmd->add_option("--config", config_path, "JSON config file; flags override");
        binder.bind("method", method);
        binder.bind("eps_min", controls.eps_rel_min);
        binder.bind("eps_max", controls.eps_rel_max);
        binder.bind("points_per_decade", controls.points_per_decade);
        binder.bind("samples", controls.mc.samples_per_eps);
        binder.bind("seed", controls.seed);
        binder.bind("workers", controls.workers);
        binder.bind("x0_frac", controls.x0_frac);
        binder.bind("x_exit_frac", controls.x_exit_frac);
        binder.bind("bisect_tol", controls.bisect_rel_tol);
        binder.bind("fit_lo", controls.fit_window_lo);
        binder.bind("fit_hi", controls.fit_window_hi);
        binder.bind("fit_cap", controls.fit_window_cap);
        binder.bind("out", out);
    }
};

int run_scan(ScanOpts& o)
{
    RunContext ctx;
    ctx.command = "threshold-scan";
    if (!o.config_path.empty())
        o.binder.overlay(o.cmd, load_config(o.config_path));
    const SystemParams sp = o.sys.resolve();
    ctx.config = o.binder.resolved();

    if (o.method == "bisection")
        o.controls.method = ScanMethod::bisection;
    else if (o.method == "monte_carlo")
        o.controls.method = ScanMethod::monte_carlo;
    else if (o.method == "harmonic")
        o.controls.method = ScanMethod::harmonic;
    else
        throw ConfigError("unknown method: " + o.method);

    const ThresholdScan scan = run_threshold_scan(sp, o.controls);

    CsvWriter w({"epsilon", "width_or_fraction", "stderr"});
    json failed = json::array();
    for (const EpsRecord& r : scan.records) {
        if (r.ok)
            w.row(r.eps, r.value, r.sigma);
        else
            failed.push_back({{"epsilon", r.eps}, {"error", r.error}});
    }
    ctx.add_file(o.out, w.str());

    json rep;
    rep["method"] = o.method;
    rep["seed"] = o.controls.seed;
    rep["Z"] = sp.Z;
    rep["F_au"] = sp.F;
    rep["V_s_hartree"] = scan.v_s;
    rep["nu_over_mu"] = scan.nu_over_mu;
    rep["x0"] = scan.x0;
    rep["x_exit"] = scan.x_exit;
    rep["window"] = {{"lo", scan.fit_lo}, {"hi", scan.fit_hi}};
    rep["n_eps"] = scan.records.size();
    rep["n_failed"] = failed.size();
    if (scan.fit_ok) {
        rep["alpha_fit"] = scan.fit.slope;
        rep["alpha_stderr"] = scan.fit.slope_err;
        rep["intercept"] = scan.fit.intercept;
        rep["n_used"] = scan.fit.n_used;
        rep["chi2"] = scan.fit.chi2;
        rep["dof"] = scan.fit.dof;
    } else {
        rep["error"] = scan.fit_error;
    }
    const std::string fit_path = out_stem(o.out) + ".fit.json";
    ctx.add_file(fit_path, rep.dump(2) + "\n");

    if (scan.fit_ok)
        std::printf("alpha_fit = %.6f +- %.6f  (nu/mu = %.6f), %d points in eps window "
                    "[%.4e, %.4e] hartree\n",
                    scan.fit.slope, scan.fit.slope_err, scan.nu_over_mu, scan.fit.n_used,
                    scan.fit_lo > 0.0 ? scan.fit_lo : scan.epsilon_grid.front(),
                    scan.fit_hi);
    else
        std::printf("fit failed: %s\n", scan.fit_error.c_str());
    if (!failed.empty())
        std::printf("%zu of %zu energies failed; see the manifest for details\n",
                    failed.size(), scan.records.size());

    ctx.summary = {{"n_ok", scan.records.size() - failed.size()},
                   {"failed", failed},
                   {"workers_used", scan.workers_used},
                   {"fit_ok", scan.fit_ok},
                   {"fit_report", fit_path}};
    ctx.finish(o.out);
    return scan.fit_ok ? exit_ok : exit_numeric;
}

}

int main(int argc, char** argv)
{
    CLI::App app{"Classical two-electron escape over the field-induced saddle: saddle "
                 "analysis, exponent tables, potential contours, single trajectories, "
                 "and threshold scans. All commands write a <out stem>.manifest.json "
                 "recording the resolved config and output digests; rerunning a command "
                 "with the same configuration reproduces its outputs byte for byte."};
    app.set_version_flag("--version", std::string(wsl::version_string));
    app.require_subcommand(1);

    SaddleOpts saddle_opts;
    TableOpts table_opts;
    ContourOpts contour_opts;
    TrajectoryOpts trajectory_opts;
    ScanOpts scan_opts;
    saddle_opts.add_to(app);
    table_opts.add_to(app);
    contour_opts.add_to(app);
    trajectory_opts.add_to(app);
    scan_opts.add_to(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (saddle_opts.cmd->parsed())
            return run_saddle(saddle_opts);
        if (table_opts.cmd->parsed())
            return run_table(table_opts);
        if (contour_opts.cmd->parsed())
            return run_contour(contour_opts);
        if (trajectory_opts.cmd->parsed())
            return run_trajectory(trajectory_opts);
        if (scan_opts.cmd->parsed())
            return run_scan(scan_opts);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const NoConvergenceError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return exit_numeric;
    } catch (const ThresholdRegimeError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return exit_numeric;
    } catch (const DegenerateWindowError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return exit_numeric;
    } catch (const InfeasibleSampleError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return exit_numeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return exit_ok;
}
