#pragma once

// Subcommand implementations behind the pelab executable. Each returns an exit
// code: 0 success, 1 usage or config error, 2 domain abort or failed check.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pelab/diagnostics.hpp"
#include "pelab/error.hpp"
#include "pelab/hash.hpp"
#include "pelab/io.hpp"
#include "pelab/potential.hpp"
#include "pelab/solver.hpp"

namespace pelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kDomain = 2 };

struct Options {
    fs::path out = "pelab_out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;  // 0 = hardware concurrency
};

inline json load_json(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("no such file: " + path.string());
    try {
        return json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
        dynamic_cast<const json::exception*>(&e))
        return kUsage;
    return kDomain;
}

inline std::string fmt(double x) {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

inline std::string csv_field(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

/// Same config on a cube of `size` points per axis covering the unit box.
inline RunConfig with_size(RunConfig c, std::size_t size) {
    const double h = c.grid.periodic() ? 1.0 / static_cast<double>(size)
                                       : 1.0 / static_cast<double>(size - 1);
    c.grid = GridSpec(c.grid.dim(), std::vector<std::size_t>(c.grid.dim(), size), h, c.grid.boundary());
    return c;
}

/// Config from an inline object or from a path relative to `base_dir`.
inline RunConfig resolve_config(const json& ref, const fs::path& base_dir) {
    if (ref.is_string()) return run_config_from_json(load_json(base_dir / ref.get<std::string>()));
    if (!ref.is_object()) throw ConfigError("config must be an object or a path");
    return run_config_from_json(ref);
}

inline std::string pelb_name(std::size_t k) {
    std::ostringstream s;
    s << std::setw(5) << std::setfill('0') << k << ".pelb";
    return s.str();
}

// ---------------------------------------------------------------------------
// run

inline int cmd_run(const fs::path& config_path, const Options& opt, std::ostream& out,
                   std::ostream& err) {
    try {
        RunConfig cfg = run_config_from_json(load_json(config_path));
        if (opt.seed) cfg.initial.seed = *opt.seed;
        const Trajectory traj = run(cfg);
        const fs::path dir = opt.out;
        fs::create_directories(dir / "snapshots");
        json files = json::array();
        for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
            const std::string rel = "snapshots/" + pelb_name(k);
            io::write_snapshot(dir / rel, traj.snapshots[k]);
            files.push_back({{"path", rel}, {"t", traj.snapshots[k].t}});
        }
        const json manifest = {{"kind", "run"},
                               {"config", run_config_to_json(cfg)},
                               {"config_hash", traj.meta["config_hash"]},
                               {"meta", traj.meta},
                               {"files", files}};
        io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
        out << "run: " << traj.snapshots.size() << " snapshots, dt = " << fmt(traj.dt)
            << ", written to " << dir.string() << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "run: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// ---------------------------------------------------------------------------
// verify

namespace checks {

inline std::vector<std::size_t> sizes_of(const json& spec, const RunConfig& cfg) {
    if (!spec.contains("sizes")) return {cfg.grid.size(0)};
    auto s = spec.at("sizes").get<std::vector<std::size_t>>();
    if (s.empty()) throw ConfigError("sizes must not be empty");
    return s;
}

inline RunConfig every_step(RunConfig c) {
    c.snapshot_every = 1;
    return c;
}

inline void merge(CheckReport& into, const CheckReport& part, const std::string& prefix) {
    into.measured[prefix] = part.measured;
    for (const auto& [k, v] : part.series) into.series[prefix + "." + k] = v;
    if (!part.passed && into.witness.is_null()) into.witness = {{"stage", prefix}, {"detail", part.witness}};
    into.passed = into.passed && part.passed;
}

/// Snapshot k of a trajectory replaced by one step backwards in time from k-1.
inline void reverse_step(Trajectory& t, const RunConfig& cfg, std::size_t k) {
    if (k == 0 || k >= t.snapshots.size()) throw ConfigError("inject.reverse_step out of range");
    const Model m = make_model(cfg);
    const double t_k = t.snapshots[k].t;
    t.snapshots[k] = m.step(t.snapshots[k - 1], -t.spacing());
    t.snapshots[k].t = t_k;
}

inline CheckReport contraction(const json& spec, const RunConfig& cfg) {
    RunConfig other = cfg;
    other.initial = spec.at("second_initial").get<InitialSpec>();
    auto a = run(cfg);
    auto b = run(other);
    if (spec.contains("inject")) {
        const auto k = spec.at("inject").at("reverse_step").get<std::size_t>();
        reverse_step(a, cfg, k);
        reverse_step(b, other, k);
    }
    const auto window = make_model(cfg).window;
    return contraction_report(a, b, window, spec.value("rel_tol", 1e-10));
}

inline CheckReport boundedness(const json& spec, const RunConfig& cfg) {
    auto t = run(cfg);
    if (spec.contains("inject")) {
        const auto k = spec.at("inject").at("snapshot").get<std::size_t>();
        const double amount = spec.at("inject").at("amount").get<double>();
        if (k >= t.snapshots.size()) throw ConfigError("inject.snapshot out of range");
        auto& s = t.snapshots[k];
        for (std::size_t p = 0; p < s.points(); ++p)
            if (!s.grid.on_boundary(p)) s.at(0, p) += amount;
    }
    return sup_norm_report(t, spec.value("abs_tol", 1e-10));
}

inline RunConfig quadratic_twin(RunConfig c) {
    c.kind = ModelKind::Diffusion;
    c.potential = "quadratic";
    return c;
}

inline CheckReport entropy(const json& spec, const RunConfig& base, bool coupled) {
    CheckReport rep;
    rep.name = coupled ? "entropy_coupled" : "entropy_diffusion";
    rep.passed = true;
    const auto sizes = sizes_of(spec, base);
    const double scale = spec.contains("inject") ? spec.at("inject").value("dissipation_scale", 1.0) : 1.0;
    std::optional<double> K;
    std::vector<double> positives;
    for (std::size_t n : sizes) {
        const RunConfig cfg = every_step(with_size(base, n));
        if (!K) K = calibrate_tau_constant(run(quadratic_twin(cfg)));
        const Model m = make_model(cfg);
        const auto traj = run(cfg);
        CheckReport part;
        if (coupled) {
            auto ep = choose_entropy_params(*m.coupled, cfg.grid.dim(), cfg.components);
            ep.c *= scale;
            part = entropy_residual_coupled(traj, *m.coupled, ep, *K);
            part.measured["params"] = ep;
        } else {
            auto w = m.window;
            w.lambda *= std::sqrt(scale);
            part = entropy_residual_diffusion(traj, m.potential, build_entropy(m.potential), w, *K);
        }
        rep.config_hash = part.config_hash;
        rep.tolerance = part.tolerance;
        positives.push_back(part.measured["max_positive"].get<double>());
        merge(rep, part, "n" + std::to_string(n));
    }
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        const auto ref = refinement_report(rep.name + "_refinement", positives[i - 1], positives[i]);
        merge(rep, ref, "refine_n" + std::to_string(sizes[i - 1]) + "_n" + std::to_string(sizes[i]));
    }
    rep.series["max_positive"] = positives;
    rep.measured["K"] = *K;
    return rep;
}

/// Grid points whose ball of radius R stays clear of the boundary.
inline std::vector<std::size_t> eligible_centres(const GridSpec& g, double R) {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < g.points(); ++p) {
        bool ok = true;
        if (!g.periodic())
            for (int a = 0; a < g.dim(); ++a) {
                const double x = g.position(p, a);
                ok = ok && x - R > g.h() * 0.5 && x + R < g.length(a) - g.h() * 0.5;
            }
        if (ok) out.push_back(p);
    }
    if (out.empty()) throw DomainError("no grid point admits a ball of radius " + std::to_string(R));
    return out;
}

inline CheckReport morrey(const json& spec, const RunConfig& base, std::uint64_t seed) {
    const RunConfig cfg = every_step(base);
    const auto traj = run(cfg);
    const double h = cfg.grid.h();
    std::vector<double> radii;
    for (double c : spec.value("radii_cells", std::vector<double>{16, 8, 4})) radii.push_back(c * h);
    const auto centres = eligible_centres(cfg.grid, *std::max_element(radii.begin(), radii.end()));
    SeededRandom rng(spec.value("seed", seed));
    const int points = spec.value("points", 10);
    const double t0 = traj.snapshots.back().t;
    const SnapshotFunctional g2 = [](const FieldState& s) { return gradient_sq(s); };
    CheckReport rep;
    rep.name = "morrey_decay";
    rep.tolerance = 0.5;
    rep.config_hash = config_hash_of(traj);
    rep.passed = true;
    std::vector<double> ratios;
    for (int i = 0; i < points; ++i) {
        const auto x0 = centres[static_cast<std::size_t>(rng.integer(0, static_cast<long>(centres.size()) - 1))];
        const auto prof = morrey_profile(traj, x0, t0, radii, g2);
        const auto part = morrey_decay_report(prof, x0, t0);
        ratios.push_back(prof.values.front() > 0.0 ? prof.values.back() / prof.values.front() : 0.0);
        merge(rep, part, "point" + std::to_string(i));
    }
    rep.series["small_over_large"] = ratios;
    rep.measured["max_small_over_large"] = *std::max_element(ratios.begin(), ratios.end());
    return rep;
}

/// Seeded physical centres snapped to the coarsest grid so every resolution
/// evaluates the same cylinders.
inline std::vector<std::vector<double>> physical_centres(const RunConfig& coarse, double R, int count,
                                                         std::uint64_t seed) {
    const auto idx = eligible_centres(coarse.grid, R);
    SeededRandom rng(seed);
    std::vector<std::vector<double>> out;
    for (int i = 0; i < count; ++i) {
        const auto p = idx[static_cast<std::size_t>(rng.integer(0, static_cast<long>(idx.size()) - 1))];
        std::vector<double> x;
        for (int a = 0; a < coarse.grid.dim(); ++a) x.push_back(coarse.grid.position(p, a));
        out.push_back(x);
    }
    return out;
}

inline std::size_t nearest_point(const GridSpec& g, const std::vector<double>& x) {
    std::size_t p = 0, stride = 1;
    for (int a = 0; a < g.dim(); ++a) {
        const auto i = static_cast<std::size_t>(std::llround(x[a] / g.h()));
        p += std::min(i, g.size(a) - 1) * stride;
        stride *= g.size(a);
    }
    return p;
}

inline CheckReport reverse_holder(const json& spec, const RunConfig& base, std::uint64_t seed) {
    const auto sizes = sizes_of(spec, base);
    const double R = spec.value("R", 1.0 / 32.0);
    const double p = spec.value("p", 2.5);
    const double rel_tol = spec.value("rel_tol", 0.2);
    const auto centres = physical_centres(with_size(base, sizes.front()), 4.0 * R,
                                          spec.value("cylinders", 20), spec.value("seed", seed));
    CheckReport rep;
    rep.name = "reverse_holder";
    rep.tolerance = rel_tol;
    rep.passed = true;
    std::vector<double> maxima;
    for (std::size_t n : sizes) {
        const RunConfig cfg = every_step(with_size(base, n));
        const auto traj = run(cfg);
        std::vector<Cylinder> cyl;
        for (const auto& x : centres) cyl.push_back({nearest_point(cfg.grid, x), traj.snapshots.back().t, R});
        const auto part = reverse_holder_report(traj, cyl, p);
        maxima.push_back(part.measured["max_ratio"].get<double>());
        rep.config_hash = part.config_hash;
        merge(rep, part, "n" + std::to_string(n));
    }
    for (std::size_t i = 1; i < sizes.size(); ++i)
        merge(rep, stability_report("reverse_holder_stability", maxima[i - 1], maxima[i], rel_tol),
              "stability_n" + std::to_string(sizes[i]));
    rep.series["max_ratio"] = maxima;
    return rep;
}

inline CheckReport estimate_ratios(const json& spec, const RunConfig& base, std::uint64_t seed) {
    const auto sizes = sizes_of(spec, base);
    const double r = spec.value("r", 1.0 / 32.0);
    const double R = spec.value("R", 1.0 / 16.0);
    const double rel_tol = spec.value("rel_tol", 0.3);
    const double t0 = spec.value("t0_fraction", 0.8) * base.t_end;
    const auto centres = physical_centres(with_size(base, sizes.front()), R, spec.value("pairs", 20),
                                          spec.value("seed", seed));
    CheckReport rep;
    rep.name = "estimate_ratios";
    rep.tolerance = rel_tol;
    rep.passed = true;
    const std::vector<std::string> keys = {"max_time_derivative", "max_hessian", "max_l4"};
    std::map<std::string, std::vector<double>> maxima;
    for (std::size_t n : sizes) {
        const RunConfig cfg = every_step(with_size(base, n));
        const auto traj = run(cfg);
        const Model m = make_model(cfg);
        std::vector<NestedCylinders> pairs;
        for (const auto& x : centres) pairs.push_back({nearest_point(cfg.grid, x), t0, r, R});
        const auto part = estimate_ratio_report(traj, m.potential, pairs);
        for (const auto& k : keys) maxima[k].push_back(part.measured[k].get<double>());
        rep.config_hash = part.config_hash;
        merge(rep, part, "n" + std::to_string(n));
    }
    for (std::size_t i = 1; i < sizes.size(); ++i)
        for (const auto& k : keys)
            merge(rep, stability_report(k, maxima[k][i - 1], maxima[k][i], rel_tol),
                  "stability_" + k + "_n" + std::to_string(sizes[i]));
    for (const auto& k : keys) rep.series[k] = maxima[k];
    return rep;
}

} // namespace checks

/// Runs one suite entry. Exceptions become failed reports.
inline CheckReport run_check(const json& spec, const fs::path& base_dir, std::uint64_t seed) {
    const auto name = spec.at("name").get<std::string>();
    const auto kind = spec.at("kind").get<std::string>();
    CheckReport rep;
    try {
        const RunConfig cfg = resolve_config(spec.at("config"), base_dir);
        if (kind == "contraction")
            rep = checks::contraction(spec, cfg);
        else if (kind == "boundedness")
            rep = checks::boundedness(spec, cfg);
        else if (kind == "entropy_diffusion")
            rep = checks::entropy(spec, cfg, false);
        else if (kind == "entropy_coupled")
            rep = checks::entropy(spec, cfg, true);
        else if (kind == "morrey")
            rep = checks::morrey(spec, cfg, seed);
        else if (kind == "reverse_holder")
            rep = checks::reverse_holder(spec, cfg, seed);
        else if (kind == "estimate_ratios")
            rep = checks::estimate_ratios(spec, cfg, seed);
        else
            throw ConfigError("unknown check kind '" + kind + "'");
    } catch (const std::exception& e) {
        rep = CheckReport{};
        rep.passed = false;
        rep.note = e.what();
        rep.witness = {{"error", e.what()}};
    }
    rep.name = name;
    return rep;
}

/// Validates a suite document before anything runs.
inline void validate_suite(const json& suite) {
    if (!suite.is_object()) throw ConfigError("suite must be a JSON object");
    const auto& list = suite.contains("checks") ? suite.at("checks") : json::array();
    if (!list.is_array()) throw ConfigError("suite checks must be an array");
    std::set<std::string> names;
    for (const auto& c : list) {
        if (!c.contains("name") || !c.contains("kind") || !c.contains("config"))
            throw ConfigError("every check needs name, kind and config");
        const auto n = c.at("name").get<std::string>();
        if (n.empty() || n.find_first_of("/\\") != std::string::npos)
            throw ConfigError("invalid check name '" + n + "'");
        if (!names.insert(n).second) throw ConfigError("duplicate check name '" + n + "'");
    }
}

inline int cmd_verify(const fs::path& suite_path, const Options& opt, std::ostream& out,
                      std::ostream& err) {
    json suite;
    try {
        suite = load_json(suite_path);
        validate_suite(suite);
    } catch (const std::exception& e) {
        err << "verify: " << e.what() << "\n";
        return kUsage;
    }
    const auto base_dir = suite_path.parent_path();
    const std::uint64_t seed = opt.seed.value_or(suite.value("seed", std::uint64_t{1}));
    const json list = suite.value("checks", json::array());
    try {
        fs::create_directories(opt.out);
        std::ostringstream summary;
        summary << "name,kind,passed,tolerance,config_hash,note\n";
        json files = json::array();
        bool all = true;
        for (const auto& spec : list) {
            const auto rep = run_check(spec, base_dir, seed);
            all = all && rep.passed;
            const auto name = rep.name;
            io::write_text(opt.out / (name + ".json"), json(rep).dump(2) + "\n");
            io::write_text(opt.out / (name + ".csv"), series_csv(rep));
            files.push_back(name + ".json");
            files.push_back(name + ".csv");
            summary << csv_field(name) << "," << spec.at("kind").get<std::string>() << ","
                    << (rep.passed ? "true" : "false") << "," << fmt(rep.tolerance) << ","
                    << rep.config_hash << "," << csv_field(rep.note) << "\n";
            out << (rep.passed ? "PASS " : "FAIL ") << name;
            if (!rep.passed) out << "  witness: " << rep.witness.dump();
            out << "\n";
        }
        io::write_text(opt.out / "summary.csv", summary.str());
        files.push_back("summary.csv");
        const json manifest = {{"kind", "verify"},
                               {"suite", suite.value("name", suite_path.stem().string())},
                               {"config_hash", content_hash(canonical(suite))},
                               {"seed", seed},
                               {"passed", all},
                               {"files", files}};
        io::write_text(opt.out / "manifest.json", manifest.dump(2) + "\n");
        return all ? kOk : kDomain;
    } catch (const std::exception& e) {
        err << "verify: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
    std::string label;
    std::size_t size = 0;
    json potential;
    std::uint64_t seed = 0;
};

struct CellResult {
    std::string status = "ok";
    double terminal_sup = std::nan("");
    double residual_max_positive = std::nan("");
    double residual_p99_positive = std::nan("");
    double tau = std::nan("");
    std::vector<double> morrey;
};

inline std::string potential_label(const json& p) {
    return p.is_string() ? p.get<std::string>() : p.value("id", std::string("custom"));
}

inline std::vector<SweepCell> sweep_cells(const json& sweep, const RunConfig& base) {
    const json axes = sweep.value("axes", json::object());
    for (const auto& [k, v] : axes.items())
        if (k != "size" && k != "potential" && k != "seed")
            throw ConfigError("unknown sweep axis '" + k + "'");
    const auto sizes = axes.contains("size") ? axes.at("size").get<std::vector<std::size_t>>()
                                             : std::vector<std::size_t>{base.grid.size(0)};
    const auto pots = axes.contains("potential") ? axes.at("potential").get<std::vector<json>>()
                                                 : std::vector<json>{base.potential};
    const auto seeds = axes.contains("seed") ? axes.at("seed").get<std::vector<std::uint64_t>>()
                                             : std::vector<std::uint64_t>{base.initial.seed};
    std::vector<SweepCell> cells;
    std::set<std::string> labels;
    for (auto n : sizes)
        for (const auto& p : pots)
            for (auto s : seeds) {
                SweepCell c{"n" + std::to_string(n) + "_" + potential_label(p) + "_s" + std::to_string(s),
                            n, p, s};
                if (!labels.insert(c.label).second)
                    throw ConfigError("duplicate sweep cell label '" + c.label + "'");
                cells.push_back(c);
            }
    return cells;
}

/// One cell: run, terminal sup, diffusion entropy residual, Morrey profile at
/// the domain centre. Writes the cell manifest and final snapshot.
inline CellResult run_cell(const RunConfig& base, const SweepCell& cell, const fs::path& dir) {
    CellResult res;
    RunConfig cfg = with_size(base, cell.size);
    cfg.potential = cell.potential;
    cfg.initial.seed = cell.seed;
    cfg.snapshot_every = 1;
    const auto traj = run(cfg);
    const auto& last = traj.snapshots.back();
    res.terminal_sup = 0.0;
    for (std::size_t p = 0; p < last.points(); ++p) res.terminal_sup = std::max(res.terminal_sup, last.norm_at(p));
    if (cfg.kind == ModelKind::Diffusion && traj.snapshots.size() > 1) {
        const Model m = make_model(cfg);
        const double K = calibrate_tau_constant(run(checks::quadratic_twin(cfg)));
        const auto r = entropy_residual_diffusion(traj, m.potential, build_entropy(m.potential), m.window, K);
        res.residual_max_positive = r.measured["max_positive"];
        res.residual_p99_positive = r.measured["p99_positive"];
        res.tau = r.tolerance;
    }
    std::size_t centre = 0, stride = 1;
    for (int a = 0; a < cfg.grid.dim(); ++a) {
        centre += cfg.grid.size(a) / 2 * stride;
        stride *= cfg.grid.size(a);
    }
    const SnapshotFunctional g2 = [](const FieldState& s) { return gradient_sq(s); };
    for (double c : {16.0, 8.0, 4.0}) {
        try {
            res.morrey.push_back(morrey_profile(traj, centre, last.t, {c * cfg.grid.h()}, g2).values[0]);
        } catch (const DomainError&) {
            res.morrey.push_back(std::nan(""));
        }
    }
    fs::create_directories(dir);
    io::write_snapshot(dir / "final.pelb", last);
    const json manifest = {{"kind", "sweep_cell"},
                           {"label", cell.label},
                           {"config", run_config_to_json(cfg)},
                           {"config_hash", traj.meta["config_hash"]},
                           {"meta", traj.meta},
                           {"files", json::array({"final.pelb"})}};
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return res;
}

inline unsigned thread_count(unsigned requested, std::size_t jobs) {
    unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(1, jobs)));
}

inline int cmd_sweep(const fs::path& sweep_path, const Options& opt, std::ostream& out,
                     std::ostream& err) {
    json sweep;
    RunConfig base;
    std::vector<SweepCell> cells;
    try {
        sweep = load_json(sweep_path);
        base = resolve_config(sweep.at("base"), sweep_path.parent_path());
        if (opt.seed) base.initial.seed = *opt.seed;
        cells = sweep_cells(sweep, base);
    } catch (const std::exception& e) {
        err << "sweep: " << e.what() << "\n";
        return kUsage;
    }
    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                results[i] = run_cell(base, cells[i], opt.out / cells[i].label);
            } catch (const std::exception& e) {
                results[i] = CellResult{};
                results[i].status = std::string("error: ") + e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned nt = thread_count(opt.threads, cells.size());
    for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    try {
        std::ostringstream csv;
        csv << "label,size,potential,seed,status,terminal_sup,residual_max_positive,"
               "residual_p99_positive,tau,morrey_16h,morrey_8h,morrey_4h\n";
        bool ok = true;
        json files = json::array();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& c = cells[i];
            const auto& r = results[i];
            ok = ok && r.status == "ok";
            if (r.status == "ok") files.push_back(c.label + "/manifest.json");
            csv << c.label << "," << c.size << "," << csv_field(potential_label(c.potential)) << ","
                << c.seed << "," << csv_field(r.status) << "," << fmt(r.terminal_sup) << ","
                << fmt(r.residual_max_positive) << "," << fmt(r.residual_p99_positive) << ","
                << fmt(r.tau);
            for (std::size_t m = 0; m < 3; ++m)
                csv << "," << (m < r.morrey.size() ? fmt(r.morrey[m]) : std::string("nan"));
            csv << "\n";
            out << c.label << ": " << r.status << "\n";
        }
        fs::create_directories(opt.out);
        io::write_text(opt.out / "sweep.csv", csv.str());
        files.push_back("sweep.csv");
        const json manifest = {{"kind", "sweep"},
                               {"config_hash", content_hash(canonical(sweep))},
                               {"cells", cells.size()},
                               {"files", files}};
        io::write_text(opt.out / "manifest.json", manifest.dump(2) + "\n");
        return ok ? kOk : kDomain;
    } catch (const std::exception& e) {
        err << "sweep: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// ---------------------------------------------------------------------------
// entropy

inline RadialPotential resolve_potential(const std::string& spec, double r_max) {
    if (fs::exists(spec)) return potential_from_json(load_json(spec), r_max);
    return make_potential(spec, r_max);
}

inline int cmd_entropy(const std::string& potential, double r_max, const Options& opt,
                       std::ostream& out, std::ostream& err) {
    RadialPotential p;
    try {
        if (!(r_max > 0.0)) throw ConfigError("r_max must be positive");
        p = resolve_potential(potential, r_max);
        check_normalised(p);
    } catch (const std::exception& e) {
        err << "entropy: " << e.what() << "\n";
        return exit_code_for(e);
    }
    try {
        const auto w = certify_window(p);
        const auto e = build_entropy(p);
        const auto prof = coupled_profile(p);
        const auto cc = coupled_decomposition(p);

        std::ostringstream gamma_csv;
        gamma_csv << "r,z,gamma,identity_residual\n";
        const std::size_t rows = 200;
        for (std::size_t k = 0; k <= rows; ++k) {
            const double r = p.r_max * static_cast<double>(k) / static_cast<double>(rows);
            const double z = std::min(p.phi(r), e.z_max());
            const double g = e.gamma(z);
            const double d1 = p.phi1(r);
            gamma_csv << fmt(r) << "," << fmt(z) << "," << fmt(g) << "," << fmt(std::abs(g - 0.5 * d1 * d1)) << "\n";
        }
        std::ostringstream dec_csv;
        dec_csv << "r,a,H,H_second,H_second_sign\n";
        double min_h2 = std::numeric_limits<double>::infinity(), min_h2_r = 0.0;
        for (std::size_t k = 0; k <= rows; ++k) {
            const double r = p.r_max * static_cast<double>(k) / static_cast<double>(rows);
            const double h2 = prof.H_second(r);
            if (h2 < min_h2) {
                min_h2 = h2;
                min_h2_r = r;
            }
            const double tol = 1e-9;
            dec_csv << fmt(r) << "," << fmt(prof.a(r)) << "," << fmt(prof.H(r)) << "," << fmt(h2) << ","
                    << (h2 > tol ? "+" : (h2 < -tol ? "-" : "0")) << "\n";
        }
        std::string convex;
        if (cc.H_trivial)
            convex = "trivially";
        else if (min_h2 >= -1e-9)
            convex = min_h2 > 1e-9 ? "yes" : "yes (degenerate where H'' vanishes)";
        else
            convex = "no (H'' = " + fmt(min_h2) + " at r = " + fmt(min_h2_r) + ")";

        const fs::path dir = opt.out;
        fs::create_directories(dir);
        const json window = {{"potential", p.id}, {"window", w}, {"identity_residual", e.tol},
                             {"H_convex", convex}, {"coupled", cc}};
        io::write_text(dir / "window.json", window.dump(2) + "\n");
        io::write_text(dir / "gamma.csv", gamma_csv.str());
        io::write_text(dir / "decomposition.csv", dec_csv.str());
        const json manifest = {{"kind", "entropy"},
                               {"config_hash", content_hash(canonical({{"potential", potential}, {"r_max", r_max}}))},
                               {"files", json::array({"window.json", "gamma.csv", "decomposition.csv"})}};
        io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
        out << "potential " << p.id << " on [0, " << fmt(p.r_max) << "]\n"
            << "lambda = " << fmt(w.lambda) << "\nLambda = " << fmt(w.Lambda) << "\n"
            << "identity residual = " << fmt(e.tol) << "\n"
            << "H convex: " << convex << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "entropy: " << e.what() << "\n";
        return exit_code_for(e) == kUsage ? kUsage : kDomain;
    }
}

// ---------------------------------------------------------------------------
// report

/// Summary CSV over every manifest found below `dir`, in path order.
inline int cmd_report(const fs::path& dir, const Options& opt, std::ostream& out, std::ostream& err) {
    try {
        if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
        std::vector<fs::path> manifests;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file() && e.path().filename() == "manifest.json") manifests.push_back(e.path());
        std::sort(manifests.begin(), manifests.end());
        std::ostringstream csv;
        csv << "manifest,kind,config_hash,files,passed\n";
        for (const auto& m : manifests) {
            const json j = load_json(m);
            const std::string passed = j.contains("passed") ? (j["passed"].get<bool>() ? "true" : "false") : "";
            csv << csv_field(fs::relative(m, dir).generic_string()) << "," << j.value("kind", std::string())
                << "," << j.value("config_hash", std::string()) << ","
                << (j.contains("files") ? j["files"].size() : 0) << "," << passed << "\n";
        }
        fs::create_directories(opt.out);
        io::write_text(opt.out / "report.csv", csv.str());
        out << csv.str();
        return kOk;
    } catch (const std::exception& e) {
        err << "report: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

} // namespace pelab::cli
