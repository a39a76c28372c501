#include "contact/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "contact/engine.hpp"
#include "contact/oracle.hpp"
#include "contact/stats.hpp"
#include "contact/timeline.hpp"

namespace contact {

using nlohmann::json;

const char* experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Stationary: return "stationary";
        case ExperimentKind::Tails: return "tails";
        case ExperimentKind::Crossings: return "crossings";
        case ExperimentKind::Scan: return "scan";
        case ExperimentKind::DdcpTrajectory: return "ddcp_trajectory";
        case ExperimentKind::DdcpStationary: return "ddcp_stationary";
        case ExperimentKind::CoupleCheck: return "couple_check";
        case ExperimentKind::OracleCheck: return "oracle_check";
    }
    return "?";
}

namespace {

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument(msg); }

const json& need(const json& j, const char* key, const std::string& ctx) {
    const auto it = j.find(key);
    if (it == j.end()) bad(ctx + ": missing key '" + key + "'");
    return *it;
}

double num(const json& v, const std::string& where) {
    if (!v.is_number()) bad(where + " must be a number");
    return v.get<double>();
}

double num_key(const json& j, const char* key, const std::string& ctx) {
    return num(need(j, key, ctx), ctx + "." + key);
}

int integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) bad(where + " must be an integer");
    return v.get<int>();
}

std::string str(const json& v, const std::string& where) {
    if (!v.is_string()) bad(where + " must be a string");
    return v.get<std::string>();
}

std::vector<double> num_vec(const json& v, const std::string& where) {
    if (!v.is_array()) bad(where + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) out.push_back(num(e, where + " entries"));
    return out;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    for (const auto& el : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (el.key() == a) {
                ok = true;
                break;
            }
        if (!ok) bad(ctx + ": unknown key '" + el.key() + "'");
    }
}

RateSet parse_rates(const json& j, Model model, const std::string& ctx) {
    if (!j.is_object()) bad(ctx + " must be an object");
    RateSet r;
    r.model = model;
    if (model == Model::A) {
        check_keys(j, {"kappa", "kappa_tilde", "lambda", "lambda_tilde", "h", "h_tilde"},
                   ctx);
        r.kappa = num_key(j, "kappa", ctx);
        r.kappa_tilde_or_star = num_key(j, "kappa_tilde", ctx);
        r.lambda = num_key(j, "lambda", ctx);
        r.lambda_tilde = num_key(j, "lambda_tilde", ctx);
    } else {
        check_keys(j, {"kappa", "kappa_star", "lambda", "h", "h_tilde"}, ctx);
        r.kappa = num_key(j, "kappa", ctx);
        r.kappa_tilde_or_star = num_key(j, "kappa_star", ctx);
        r.lambda = num_key(j, "lambda", ctx);
    }
    r.h = num_key(j, "h", ctx);
    r.h_tilde = num_key(j, "h_tilde", ctx);
    try {
        r.validate();
    } catch (const std::exception& e) {
        bad(ctx + ": " + e.what());
    }
    return r;
}

Geometry parse_geometry(const json& j) {
    if (!j.is_object()) bad("geometry must be an object");
    check_keys(j, {"kind", "width", "height", "boundary_state"}, "geometry");
    Geometry g;
    const std::string kind = str(need(j, "kind", "geometry"), "geometry.kind");
    if (kind == "torus")
        g.kind = GeomKind::Torus;
    else if (kind == "rectangle")
        g.kind = GeomKind::Rectangle;
    else
        bad("geometry.kind must be \"torus\" or \"rectangle\"");
    g.width = integer(need(j, "width", "geometry"), "geometry.width");
    g.height = integer(need(j, "height", "geometry"), "geometry.height");
    if (j.contains("boundary_state")) {
        if (g.kind == GeomKind::Torus)
            bad("geometry: boundary_state applies to rectangles only");
        const int b = integer(j["boundary_state"], "geometry.boundary_state");
        if (b < -1 || b > 1) bad("geometry.boundary_state must be -1, 0, or 1");
        g.boundary_state = static_cast<SiteState>(b);
    }
    try {
        g.validate();
    } catch (const std::exception& e) {
        bad(std::string("geometry: ") + e.what());
    }
    return g;
}

DensityLaw parse_law(const json& j) {
    if (!j.is_object()) bad("density_law must be an object");
    const std::string kind = str(need(j, "kind", "density_law"), "density_law.kind");
    try {
        if (kind == "kefi") {
            check_keys(j, {"kind", "beta", "delta", "epsilon", "g"}, "density_law");
            return DensityLaw::kefi(
                num_key(j, "beta", "density_law"), num_key(j, "delta", "density_law"),
                num_key(j, "epsilon", "density_law"), num_key(j, "g", "density_law"));
        }
        if (kind == "constant") {
            check_keys(j, {"kind", "lambda", "h"}, "density_law");
            return DensityLaw::constant(num_key(j, "lambda", "density_law"),
                                        num_key(j, "h", "density_law"));
        }
        if (kind == "tabulated") {
            check_keys(j, {"kind", "lambda_rho", "lambda_val", "h_rho", "h_val"},
                       "density_law");
            return DensityLaw::tabulated(
                num_vec(need(j, "lambda_rho", "density_law"), "density_law.lambda_rho"),
                num_vec(need(j, "lambda_val", "density_law"), "density_law.lambda_val"),
                num_vec(need(j, "h_rho", "density_law"), "density_law.h_rho"),
                num_vec(need(j, "h_val", "density_law"), "density_law.h_val"));
        }
    } catch (const std::invalid_argument& e) {
        bad(std::string("density_law: ") + e.what());
    }
    bad("density_law.kind must be \"kefi\", \"constant\", or \"tabulated\"");
}

// Positivity of the spontaneous ladder: every state reachable from every
// state without neighbor help, which is what the unique-stationary-law
// hypotheses need.  Model A: h, h~, kappa, kappa~; Model B: h, h~, kappa*.
bool ladder_positive(const RateSet& r) {
    const bool common = r.h > 0 && r.h_tilde > 0 && r.kappa_tilde_or_star > 0;
    return r.model == Model::A ? (common && r.kappa > 0) : common;
}

void check_window_fits(const Geometry& g, int n, const std::string& ctx) {
    if (n < 1) bad(ctx + ": decision scale n must be >= 1");
    if (3 * n + 1 > g.width || n + 1 > g.height)
        bad(ctx + ": the (3n+1) x (n+1) decision window exceeds the lattice");
}

std::uint64_t seed_of(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const std::int64_t s = v.get<std::int64_t>();
        if (s >= 0) return static_cast<std::uint64_t>(s);
    }
    bad(where + " must be a nonnegative integer");
}

}  // namespace

ExperimentSpec parse_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        bad(std::string("spec is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) bad("spec must be a JSON object");
    check_keys(j,
               {"schema_version", "experiment", "model",      "rates",
                "geometry",       "q_base",     "q_grid",     "density_law",
                "replicas",       "burn_in",    "horizon",    "sample_dt",
                "batches",        "conf",       "samples",    "all_origins",
                "n_grid",         "n_list",     "eps_hat",    "lambda_grid",
                "bisection_tol",  "h_max",      "dt_grid",    "tol",
                "max_sweeps",     "initial_density", "damping", "pairs",
                "master_seed",    "out"},
               "spec");

    ExperimentSpec s;
    if (j.contains("schema_version") &&
        integer(j["schema_version"], "spec.schema_version") != kSchemaVersion)
        bad("spec: unsupported schema_version");

    const std::string exp = str(need(j, "experiment", "spec"), "spec.experiment");
    if (exp == "stationary")
        s.experiment = ExperimentKind::Stationary;
    else if (exp == "tails")
        s.experiment = ExperimentKind::Tails;
    else if (exp == "crossings")
        s.experiment = ExperimentKind::Crossings;
    else if (exp == "scan")
        s.experiment = ExperimentKind::Scan;
    else if (exp == "ddcp_trajectory")
        s.experiment = ExperimentKind::DdcpTrajectory;
    else if (exp == "ddcp_stationary")
        s.experiment = ExperimentKind::DdcpStationary;
    else if (exp == "couple_check")
        s.experiment = ExperimentKind::CoupleCheck;
    else if (exp == "oracle_check")
        s.experiment = ExperimentKind::OracleCheck;
    else
        bad("spec.experiment must be one of stationary, tails, crossings, scan, "
            "ddcp_trajectory, ddcp_stationary, couple_check, oracle_check");

    Model model = Model::A;
    if (j.contains("model")) {
        const std::string m = str(j["model"], "spec.model");
        if (m == "A")
            model = Model::A;
        else if (m == "B")
            model = Model::B;
        else
            bad("spec.model must be \"A\" or \"B\"");
    }

    if (j.contains("geometry"))
        s.geom = parse_geometry(j["geometry"]);
    else if (s.experiment != ExperimentKind::OracleCheck)
        bad("spec: missing key 'geometry'");
    else
        s.geom = Geometry{GeomKind::Torus, 2, 2, kPlus};

    if (j.contains("rates")) {
        s.rates = parse_rates(j["rates"], model, "rates");
        s.has_rates = true;
    }
    if (j.contains("q_base")) {
        const RateSet rb = parse_rates(j["q_base"], model, "q_base");
        if (rb.total() <= 0) bad("q_base: zero total rate");
        s.q_base = rb.rescaled();  // the q-parameterization is scale-free
        s.has_qparam = true;
    }
    if (j.contains("q_grid")) {
        s.q_grid = num_vec(j["q_grid"], "spec.q_grid");
        for (std::size_t i = 0; i < s.q_grid.size(); ++i)
            if (s.q_grid[i] < 0 || s.q_grid[i] > 1 ||
                (i > 0 && s.q_grid[i] <= s.q_grid[i - 1]))
                bad("spec.q_grid must increase strictly within [0, 1]");
    }
    if (j.contains("density_law")) {
        s.law = parse_law(j["density_law"]);
        s.has_law = true;
    }

    if (j.contains("replicas")) s.replicas = integer(j["replicas"], "spec.replicas");
    if (s.replicas < 1) bad("spec.replicas must be >= 1");
    if (j.contains("burn_in")) s.burn_in = num(j["burn_in"], "spec.burn_in");
    if (s.burn_in < 0) bad("spec.burn_in must be >= 0");
    if (j.contains("horizon")) s.horizon = num(j["horizon"], "spec.horizon");
    if (s.horizon <= 0) bad("spec.horizon must be positive");
    if (j.contains("sample_dt")) s.sample_dt = num(j["sample_dt"], "spec.sample_dt");
    if (s.sample_dt <= 0) bad("spec.sample_dt must be positive");
    if (j.contains("batches")) s.batches = integer(j["batches"], "spec.batches");
    if (s.batches < 2) bad("spec.batches must be >= 2");
    if (j.contains("conf")) s.conf = num(j["conf"], "spec.conf");
    if (!(s.conf > 0 && s.conf < 1)) bad("spec.conf must lie in (0, 1)");
    if (j.contains("samples")) s.samples = integer(j["samples"], "spec.samples");
    if (s.samples < 10) bad("spec.samples must be >= 10");
    if (j.contains("all_origins")) {
        if (!j["all_origins"].is_boolean()) bad("spec.all_origins must be a boolean");
        s.all_origins = j["all_origins"].get<bool>();
    }
    if (j.contains("eps_hat")) s.eps_hat = num(j["eps_hat"], "spec.eps_hat");
    if (!(s.eps_hat > 0 && s.eps_hat < 1)) bad("spec.eps_hat must lie in (0, 1)");
    if (j.contains("n_list")) {
        s.n_list.clear();
        if (!j["n_list"].is_array() || j["n_list"].empty())
            bad("spec.n_list must be a nonempty array of integers");
        for (const json& e : j["n_list"]) s.n_list.push_back(integer(e, "spec.n_list"));
        for (int n : s.n_list)
            if (n < 1) bad("spec.n_list entries must be >= 1");
    }
    if (j.contains("n_grid")) {
        if (!j["n_grid"].is_array()) bad("spec.n_grid must be an array of integers");
        s.n_grid.clear();
        for (const json& e : j["n_grid"])
            s.n_grid.push_back(integer(e, "spec.n_grid"));
        for (std::size_t i = 0; i < s.n_grid.size(); ++i)
            if (s.n_grid[i] < 1 || (i > 0 && s.n_grid[i] <= s.n_grid[i - 1]))
                bad("spec.n_grid must be strictly increasing and >= 1");
    }
    if (j.contains("lambda_grid")) {
        s.lambda_grid = num_vec(j["lambda_grid"], "spec.lambda_grid");
        for (std::size_t i = 0; i < s.lambda_grid.size(); ++i)
            if (s.lambda_grid[i] < 0 ||
                (i > 0 && s.lambda_grid[i] <= s.lambda_grid[i - 1]))
                bad("spec.lambda_grid must be strictly increasing and >= 0");
    }
    if (j.contains("bisection_tol"))
        s.bisection_tol = num(j["bisection_tol"], "spec.bisection_tol");
    if (s.bisection_tol <= 0) bad("spec.bisection_tol must be positive");
    if (j.contains("h_max")) s.h_max = num(j["h_max"], "spec.h_max");
    if (s.h_max <= 0) bad("spec.h_max must be positive");
    if (j.contains("dt_grid")) s.dt_grid = num(j["dt_grid"], "spec.dt_grid");
    if (s.dt_grid <= 0) bad("spec.dt_grid must be positive");
    if (j.contains("tol")) s.tol = num(j["tol"], "spec.tol");
    if (s.tol <= 0) bad("spec.tol must be positive");
    if (j.contains("max_sweeps")) s.max_sweeps = integer(j["max_sweeps"], "spec.max_sweeps");
    if (s.max_sweeps < 1) bad("spec.max_sweeps must be >= 1");
    if (j.contains("initial_density"))
        s.initial_density = num(j["initial_density"], "spec.initial_density");
    if (!(s.initial_density >= 0 && s.initial_density <= 1))
        bad("spec.initial_density must lie in [0, 1]");
    if (j.contains("damping")) s.damping = num(j["damping"], "spec.damping");
    if (!(s.damping > 0 && s.damping <= 1)) bad("spec.damping must lie in (0, 1]");
    if (j.contains("pairs")) s.pairs = integer(j["pairs"], "spec.pairs");
    if (s.pairs < 1) bad("spec.pairs must be >= 1");
    if (j.contains("master_seed"))
        s.master_seed = seed_of(j["master_seed"], "spec.master_seed");
    if (j.contains("out")) s.out_dir = str(j["out"], "spec.out");

    switch (s.experiment) {
        case ExperimentKind::Stationary:
            if (!s.has_rates) bad("stationary experiment requires 'rates'");
            if (!ladder_positive(s.rates))
                bad("stationary experiment requires strictly positive spontaneous "
                    "rates (unique stationary law)");
            break;
        case ExperimentKind::Tails:
            if (!s.has_rates) bad("tails experiment requires 'rates'");
            if (s.samples < 100) bad("tails experiment requires samples >= 100");
            if (!ladder_positive(s.rates))
                s.warnings.push_back(
                    "spontaneous rates are not all positive; samples depend on "
                    "the all-1 start rather than a unique stationary law");
            break;
        case ExperimentKind::Crossings:
            if (!s.has_rates) bad("crossings experiment requires 'rates'");
            for (int n : s.n_list) check_window_fits(s.geom, n, "crossings");
            if (!ladder_positive(s.rates))
                s.warnings.push_back(
                    "spontaneous rates are not all positive; samples depend on "
                    "the all-1 start rather than a unique stationary law");
            break;
        case ExperimentKind::Scan:
            if (!s.has_rates) bad("scan experiment requires 'rates'");
            if (s.lambda_grid.empty()) bad("scan experiment requires 'lambda_grid'");
            check_window_fits(s.geom, s.n_list.front(), "scan");
            break;
        case ExperimentKind::DdcpTrajectory:
        case ExperimentKind::DdcpStationary:
            if (!s.has_law)
                bad(std::string(experiment_name(s.experiment)) +
                    " experiment requires 'density_law'");
            if (!s.has_rates)
                bad(std::string(experiment_name(s.experiment)) +
                    " experiment requires 'rates' for the non-driven fields");
            if (s.rates.lambda != 0 || s.rates.h != 0)
                s.warnings.push_back(
                    "rates.lambda and rates.h are driven by the density law; the "
                    "given values are ignored");
            s.rates.lambda = 0;
            s.rates.h = 0;
            if (s.experiment == ExperimentKind::DdcpStationary) {
                if (!(s.rates.kappa > 0 && s.rates.kappa_tilde_or_star > 0 &&
                      s.rates.h_tilde > 0))
                    bad("ddcp_stationary requires kappa, kappa_tilde/kappa_star, "
                        "and h_tilde strictly positive");
                if (s.law.touches_zero())
                    s.warnings.push_back(
                        "the density law reaches zero on [0, 1]; the positivity "
                        "hypothesis fails and the run will flag it");
            }
            break;
        case ExperimentKind::CoupleCheck:
            if (!s.has_qparam) bad("couple_check experiment requires 'q_base'");
            if (!(s.q_base.up_mass() > 0) || !(s.q_base.down_mass() > 0))
                bad("couple_check requires a base with mass in both the up and "
                    "down rate blocks");
            break;
        case ExperimentKind::OracleCheck:
            break;
    }

    s.canonical = j.dump();
    return s;
}

ExperimentSpec load_spec(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) bad("cannot read spec file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_spec(buf.str());
}

std::string spec_hash(const ExperimentSpec& spec) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(stats::fnv1a(spec.canonical)));
    return buf;
}

// ---------------------------------------------------------------------------
// Artifact plumbing.
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

std::string csv_header(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << "# contact-lattice " << kArtifactVersion << "\n"
       << "# schema_version: " << kSchemaVersion << "\n"
       << "# experiment: " << experiment_name(spec.experiment) << "\n"
       << "# spec_hash: " << spec_hash(spec) << "\n"
       << "# master_seed: " << spec.master_seed << "\n";
    return os.str();
}

json json_envelope(const ExperimentSpec& spec) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["artifact_version"] = kArtifactVersion;
    j["experiment"] = experiment_name(spec.experiment);
    j["spec_hash"] = spec_hash(spec);
    j["master_seed"] = spec.master_seed;
    return j;
}

void atomic_write(const ExperimentSpec& spec, const std::string& name,
                  const std::string& content, RunOutcome& out) {
    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    const fs::path final_path = fs::path(spec.out_dir) / name;
    const fs::path tmp = final_path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, final_path);
    out.files.push_back(final_path.string());
}

const char* phase_name(PhaseDecision d) {
    switch (d) {
        case PhaseDecision::Subcritical: return "subcritical";
        case PhaseDecision::Supercritical: return "supercritical";
        case PhaseDecision::Neither: return "neither";
    }
    return "?";
}

const char* tail_name(TailClass c) {
    switch (c) {
        case TailClass::Exponential: return "exponential";
        case TailClass::Subexponential: return "subexponential";
        case TailClass::Inconclusive: return "inconclusive";
    }
    return "?";
}

// Event-driven chain from all-1: burn in, then visit the state every `gap`
// time units, `count` times.
void chain_samples(const RateSet& rates, const Geometry& geom, double burn_in,
                   double gap, int count, RngStream& rng,
                   const std::function<void(const Configuration&)>& visit) {
    Engine eng(Configuration::filled(geom, kPlus), rates);
    double t = 0;
    const auto advance_to = [&](double target) {
        while (t < target) {
            const EventDescriptor ev = eng.step_capped(rng, target - t);
            if (ev.absorbed || ev.censored) {
                t = target;
                return;
            }
            t += ev.dt;
        }
    };
    advance_to(burn_in);
    for (int s = 0; s < count; ++s) {
        advance_to(burn_in + (s + 1) * gap);
        visit(eng.config());
    }
}

void run_stationary(const ExperimentSpec& spec, RunOutcome& out) {
    std::vector<DensityEstimate> est;
    std::vector<std::uint64_t> seeds;
    std::vector<double> means;
    for (int i = 0; i < spec.replicas; ++i) {
        seeds.push_back(derive_seed(spec.master_seed, static_cast<std::uint64_t>(i)));
        RngStream rs(seeds.back());
        est.push_back(stationary_density(spec.rates, spec.geom, spec.burn_in,
                                         spec.horizon, rs, spec.batches, spec.conf));
        means.push_back(est.back().mean);
    }

    std::ostringstream csv;
    csv << csv_header(spec) << "replica,seed,rho,ci_halfwidth,batches,conf\n";
    for (int i = 0; i < spec.replicas; ++i)
        csv << i << ',' << seeds[static_cast<std::size_t>(i)] << ','
            << fmt(est[static_cast<std::size_t>(i)].mean) << ','
            << fmt(est[static_cast<std::size_t>(i)].ci_halfwidth) << ','
            << est[static_cast<std::size_t>(i)].batches << ','
            << fmt(est[static_cast<std::size_t>(i)].conf) << '\n';
    atomic_write(spec, "stationary.csv", csv.str(), out);

    double mean = 0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(means.size());
    double ci;
    if (spec.replicas >= 2) {
        const stats::Interval iv = stats::mean_interval(means, spec.conf);
        ci = (iv.hi - iv.lo) / 2;
    } else {
        ci = est[0].ci_halfwidth;
    }

    json j = json_envelope(spec);
    j["replicas"] = spec.replicas;
    j["rho_mean"] = mean;
    j["rho_ci"] = ci;
    j["conf"] = spec.conf;
    json per = json::array();
    for (int i = 0; i < spec.replicas; ++i)
        per.push_back({{"replica", i},
                       {"seed", seeds[static_cast<std::size_t>(i)]},
                       {"rho", est[static_cast<std::size_t>(i)].mean},
                       {"ci_halfwidth", est[static_cast<std::size_t>(i)].ci_halfwidth}});
    j["per_replica"] = per;
    atomic_write(spec, "stationary.json", j.dump(2) + "\n", out);

    out.message = "stationary: rho = " + fmt(mean) + " +/- " + fmt(ci);
}

void run_tails(const ExperimentSpec& spec, RunOutcome& out) {
    const std::vector<std::int64_t> grid =
        spec.n_grid.empty() ? default_tail_grid(spec.geom.sites()) : spec.n_grid;
    std::vector<ClusterReport> reports;
    reports.reserve(static_cast<std::size_t>(spec.samples));
    for (int i = 0; i < spec.replicas; ++i) {
        const int quota = spec.samples / spec.replicas +
                          (i < spec.samples % spec.replicas ? 1 : 0);
        RngStream rs(derive_seed(spec.master_seed, static_cast<std::uint64_t>(i)));
        chain_samples(spec.rates, spec.geom, spec.burn_in, spec.sample_dt, quota, rs,
                      [&](const Configuration& c) {
                          ClusterReport r = label_clusters(c);
                          r.labels.clear();
                          r.labels.shrink_to_fit();
                          reports.push_back(std::move(r));
                      });
    }
    const TailEstimate est = tail_estimate(reports, grid, spec.all_origins, spec.conf);

    std::ostringstream csv;
    csv << csv_header(spec) << "n,p_hat,ci_lo,ci_hi\n";
    for (std::size_t g = 0; g < est.n_grid.size(); ++g)
        csv << est.n_grid[g] << ',' << fmt(est.p_hat[g]) << ',' << fmt(est.ci_lo[g])
            << ',' << fmt(est.ci_hi[g]) << '\n';
    atomic_write(spec, "tails.csv", csv.str(), out);

    json j = json_envelope(spec);
    j["classification"] = tail_name(est.classification);
    j["rate"] = est.rate;
    j["rate_ci_half"] = est.rate_ci_half;
    j["r_squared"] = est.r_squared;
    j["fit_points"] = est.fit_points;
    j["degenerate"] = est.degenerate;
    j["censored"] = est.censored;
    j["samples"] = est.samples;
    j["all_origins"] = spec.all_origins;
    atomic_write(spec, "tails.json", j.dump(2) + "\n", out);

    out.message = std::string("tails: ") + tail_name(est.classification) +
                  (est.degenerate ? " (degenerate)" : "") +
                  ", rate = " + fmt(est.rate) + ", r2 = " + fmt(est.r_squared);
}

void run_crossings(const ExperimentSpec& spec, RunOutcome& out) {
    std::ostringstream csv;
    csv << csv_header(spec) << "n,count,v_hits,h_hits,v_upper,h_lower,decision\n";
    json rows = json::array();
    std::string summary = "crossings:";
    for (std::size_t k = 0; k < spec.n_list.size(); ++k) {
        const int n = spec.n_list[k];
        RngStream rs(derive_seed(spec.master_seed, static_cast<std::uint64_t>(k)));
        const CrossingSamples cs = sample_crossings(
            spec.rates, spec.geom, n, spec.samples, spec.burn_in, spec.sample_dt, rs);
        const FiniteSizeResult fr = finite_size_check(cs, n, spec.eps_hat, spec.conf);
        csv << n << ',' << cs.count << ',' << cs.v_hits << ',' << cs.h_hits << ','
            << fmt(fr.v_upper) << ',' << fmt(fr.h_lower) << ','
            << phase_name(fr.decision) << '\n';
        rows.push_back({{"n", n},
                        {"count", cs.count},
                        {"v_hits", cs.v_hits},
                        {"h_hits", cs.h_hits},
                        {"v_upper", fr.v_upper},
                        {"h_lower", fr.h_lower},
                        {"eps_hat", fr.eps_hat},
                        {"decision", phase_name(fr.decision)}});
        summary += " n=" + std::to_string(n) + " " + phase_name(fr.decision);
    }
    atomic_write(spec, "crossings.csv", csv.str(), out);
    json j = json_envelope(spec);
    j["rows"] = rows;
    atomic_write(spec, "crossings.json", j.dump(2) + "\n", out);
    out.message = summary;
}

void run_scan(const ExperimentSpec& spec, RunOutcome& out) {
    ScanConfig cfg;
    cfg.rates = spec.rates;
    cfg.lambda_grid = spec.lambda_grid;
    cfg.geom = spec.geom;
    cfg.n = spec.n_list.front();
    cfg.eps_hat = spec.eps_hat;
    cfg.bisection_tol = spec.bisection_tol;
    cfg.h_max = spec.h_max;
    cfg.samples_per_probe = spec.samples;
    cfg.burn_in = spec.burn_in;
    cfg.sample_gap = spec.sample_dt;
    cfg.conf = spec.conf;
    RngStream rs(derive_seed(spec.master_seed, 0));
    const ScanResult res = h_perc_scan(cfg, rs);

    std::ostringstream csv;
    csv << csv_header(spec) << "lambda,h_lo,h_hi,h_perc_hat,bracketed,super_at_zero\n";
    for (const ScanEntry& e : res.entries)
        csv << fmt(e.lambda) << ',' << fmt(e.h_lo) << ',' << fmt(e.h_hi) << ','
            << fmt(e.h_perc_hat) << ',' << (e.bracketed ? 1 : 0) << ','
            << (e.super_at_zero ? 1 : 0) << '\n';
    atomic_write(spec, "scan.csv", csv.str(), out);

    json j = json_envelope(spec);
    j["n"] = res.n;
    j["eps_hat"] = res.eps_hat;
    j["monotone_ok"] = res.monotone_ok;
    j["envelope_ok"] = res.envelope_ok;
    json entries = json::array();
    for (const ScanEntry& e : res.entries) {
        json trace = json::array();
        for (const ScanProbe& p : e.trace)
            trace.push_back({{"h", p.h},
                             {"decision", phase_name(p.decision)},
                             {"v_upper", p.v_upper},
                             {"h_lower", p.h_lower}});
        entries.push_back({{"lambda", e.lambda},
                           {"h_lo", e.h_lo},
                           {"h_hi", e.h_hi},
                           {"h_perc_hat", e.bracketed ? json(e.h_perc_hat) : json()},
                           {"bracketed", e.bracketed},
                           {"super_at_zero", e.super_at_zero},
                           {"trace", trace}});
    }
    j["entries"] = entries;
    atomic_write(spec, "scan.json", j.dump(2) + "\n", out);

    out.message = "scan: " + std::to_string(res.entries.size()) +
                  " lambda points, monotone_ok=" + (res.monotone_ok ? "1" : "0") +
                  ", envelope_ok=" + (res.envelope_ok ? "1" : "0");
}

void run_ddcp_trajectory(const ExperimentSpec& spec, RunOutcome& out) {
    TrajectoryConfig cfg;
    cfg.law = spec.law;
    cfg.fixed = spec.rates;
    cfg.initial_density = spec.initial_density;
    cfg.geom = spec.geom;
    cfg.T = spec.horizon;
    cfg.dt_grid = spec.dt_grid;
    cfg.replicas = spec.replicas;
    cfg.tol = spec.tol;
    cfg.max_sweeps = spec.max_sweeps;
    cfg.conf = spec.conf;
    RngStream rs(derive_seed(spec.master_seed, 0));
    const TrajectorySolution sol = solve_trajectory(cfg, rs);

    std::ostringstream csv;
    csv << csv_header(spec) << "cell,t_end,rho,rho_ci,lambda,h\n";
    for (std::size_t c = 0; c < sol.rho.size(); ++c) {
        const double t_end =
            std::min((static_cast<double>(c) + 1) * sol.dt_grid, spec.horizon);
        csv << c << ',' << fmt(t_end) << ',' << fmt(sol.rho[c]) << ','
            << fmt(sol.rho_ci[c]) << ',' << fmt(sol.lambda[c]) << ','
            << fmt(sol.h[c]) << '\n';
    }
    atomic_write(spec, "ddcp_trajectory.csv", csv.str(), out);

    json j = json_envelope(spec);
    j["converged"] = sol.converged;
    j["sweeps"] = sol.sweeps;
    j["residual"] = sol.residual;
    j["clamped"] = sol.clamped;
    j["dt_grid"] = sol.dt_grid;
    j["window_ends"] = sol.window_ends;
    j["window_sweeps"] = sol.window_sweeps;
    atomic_write(spec, "ddcp_trajectory.json", j.dump(2) + "\n", out);

    out.message = std::string("ddcp_trajectory: ") +
                  (sol.converged ? "converged" : "NOT converged") + " in " +
                  std::to_string(sol.sweeps) + " sweeps, residual = " +
                  fmt(sol.residual);
}

void run_ddcp_stationary(const ExperimentSpec& spec, RunOutcome& out) {
    StationaryConfig cfg;
    cfg.law = spec.law;
    cfg.fixed = spec.rates;
    cfg.geom = spec.geom;
    cfg.damping = spec.damping;
    cfg.tol = spec.tol;
    cfg.max_iters = spec.max_sweeps;
    cfg.burn_in = spec.burn_in;
    cfg.sample_time = spec.horizon;
    cfg.batches = spec.batches;
    cfg.conf = spec.conf;
    RngStream rs(derive_seed(spec.master_seed, 0));
    const StationaryFixedPoint fp = solve_stationary(cfg, rs);

    std::ostringstream csv;
    csv << csv_header(spec) << "iter,lambda,h,rho_hat\n";
    for (std::size_t i = 0; i < fp.trace.size(); ++i)
        csv << i + 1 << ',' << fmt(fp.trace[i][0]) << ',' << fmt(fp.trace[i][1])
            << ',' << fmt(fp.trace[i][2]) << '\n';
    atomic_write(spec, "ddcp_stationary.csv", csv.str(), out);

    json j = json_envelope(spec);
    j["lambda_star"] = fp.lambda_star;
    j["h_star"] = fp.h_star;
    j["rho_star"] = fp.rho_star;
    j["rho_ci"] = fp.rho_ci;
    j["residual"] = fp.residual;
    j["converged"] = fp.converged;
    j["iters"] = fp.iters;
    j["law_touches_zero"] = fp.law_touches_zero;
    j["clamped"] = fp.clamped;
    atomic_write(spec, "ddcp_stationary.json", j.dump(2) + "\n", out);

    out.message = std::string("ddcp_stationary: ") +
                  (fp.converged ? "converged" : "NOT converged") +
                  ", lambda* = " + fmt(fp.lambda_star) + ", h* = " + fmt(fp.h_star) +
                  ", rho* = " + fmt(fp.rho_star);
}

void run_couple_check(const ExperimentSpec& spec, RunOutcome& out) {
    const QParameterization qp = QParameterization::from_base(spec.q_base);
    const Model model = spec.q_base.model;
    json rows = json::array();
    int violations = 0;
    for (int p = 0; p < spec.pairs; ++p) {
        RngStream rs(derive_seed(spec.master_seed, static_cast<std::uint64_t>(p)));
        double ql, qh;
        if (spec.q_grid.size() >= 2) {
            const std::size_t i1 = static_cast<std::size_t>(rs.below(spec.q_grid.size()));
            std::size_t i2 = static_cast<std::size_t>(rs.below(spec.q_grid.size() - 1));
            if (i2 >= i1) ++i2;
            ql = std::min(spec.q_grid[i1], spec.q_grid[i2]);
            qh = std::max(spec.q_grid[i1], spec.q_grid[i2]);
        } else if (spec.q_grid.size() == 1) {
            ql = qh = spec.q_grid[0];
        } else {
            const double u1 = rs.uniform(), u2 = rs.uniform();
            ql = std::min(u1, u2);
            qh = std::max(u1, u2);
        }
        Configuration hi = Configuration::filled(spec.geom, kZero);
        for (SiteState& st : hi.states)
            st = static_cast<SiteState>(static_cast<int>(rs.below(3)) - 1);
        Configuration lo = hi;
        for (SiteState& st : lo.states)
            st = static_cast<SiteState>(
                static_cast<int>(rs.below(static_cast<std::uint64_t>(st + 2))) - 1);

        const GraphicalTimeline tl = build_coupled(spec.geom, 0.0, spec.horizon, qp, rs);
        const CoupleResult cr = couple_monotone(tl, ql, qh, model, lo, hi, spec.horizon);
        violations += cr.ordered ? 0 : 1;
        rows.push_back({{"pair", p},
                        {"q_low", ql},
                        {"q_high", qh},
                        {"ordered", cr.ordered},
                        {"violation_site", cr.violation_site},
                        {"violation_time", cr.violation_time}});
    }
    json j = json_envelope(spec);
    j["pairs"] = spec.pairs;
    j["violations"] = violations;
    j["results"] = rows;
    atomic_write(spec, "couple.json", j.dump(2) + "\n", out);

    out.message = "couple_check: " + std::to_string(violations) + "/" +
                  std::to_string(spec.pairs) + " ordering violations";
    if (violations > 0) out.exit_code = 3;
}

void run_oracle_check(const ExperimentSpec& spec, RunOutcome& out) {
    std::vector<std::string> lines;
    const bool ok = oracle_check_battery(lines);
    json j = json_envelope(spec);
    j["all_pass"] = ok;
    j["rows"] = lines;
    atomic_write(spec, "oracle_check.json", j.dump(2) + "\n", out);
    std::string msg;
    for (const std::string& l : lines) msg += l + "\n";
    msg += ok ? "oracle_check: all checks passed" : "oracle_check: FAILURES above";
    out.message = msg;
    if (!ok) out.exit_code = 3;
}

}  // namespace

RunOutcome run_experiment(const ExperimentSpec& spec) {
    RunOutcome out;
    try {
        switch (spec.experiment) {
            case ExperimentKind::Stationary: run_stationary(spec, out); break;
            case ExperimentKind::Tails: run_tails(spec, out); break;
            case ExperimentKind::Crossings: run_crossings(spec, out); break;
            case ExperimentKind::Scan: run_scan(spec, out); break;
            case ExperimentKind::DdcpTrajectory: run_ddcp_trajectory(spec, out); break;
            case ExperimentKind::DdcpStationary: run_ddcp_stationary(spec, out); break;
            case ExperimentKind::CoupleCheck: run_couple_check(spec, out); break;
            case ExperimentKind::OracleCheck: run_oracle_check(spec, out); break;
        }
    } catch (const std::exception& e) {
        out.exit_code = 2;
        out.message = std::string("runtime failure: ") + e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact-oracle invariant battery.
// ---------------------------------------------------------------------------

namespace {

struct CheckRow {
    std::string name;
    bool pass;
    std::string measured;
};

double max_abs_row_sum(const GeneratorMatrix& gen) {
    const Eigen::VectorXd rs = gen.Q * Eigen::VectorXd::Ones(gen.dim);
    return rs.cwiseAbs().maxCoeff();
}

double min_offdiag(const GeneratorMatrix& gen) {
    double m = 0;
    for (int k = 0; k < gen.Q.outerSize(); ++k)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(gen.Q, k);
             it; ++it)
            if (it.row() != it.col()) m = std::min(m, it.value());
    return m;
}

double tv_full(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return 0.5 * (a - b).lpNorm<1>();
}

// Index permutation of the one-step horizontal torus translation.
double translation_asymmetry(const GeneratorMatrix& gen, const Eigen::VectorXd& pi) {
    double worst = 0;
    for (std::int64_t idx = 0; idx < gen.dim; ++idx) {
        const Configuration c = gen.decode(idx);
        Configuration shifted = c;
        for (int y = 0; y < gen.geom.height; ++y)
            for (int x = 0; x < gen.geom.width; ++x)
                shifted.at(gen.geom.index(x, y)) =
                    c.at(gen.geom.index((x + 1) % gen.geom.width, y));
        worst = std::max(worst, std::abs(pi[gen.encode(shifted)] - pi[idx]));
    }
    return worst;
}

}  // namespace

bool oracle_check_battery(std::vector<std::string>& lines) {
    std::vector<CheckRow> rows;
    const auto add = [&](const std::string& name, bool pass, const std::string& meas) {
        rows.push_back({name, pass, meas});
    };
    const Geometry g2{GeomKind::Torus, 2, 2, kPlus};

    RateSet ra;
    ra.model = Model::A;
    ra.kappa = 1.0;
    ra.kappa_tilde_or_star = 0.7;
    ra.lambda = 0.4;
    ra.lambda_tilde = 0.25;
    ra.h = 0.6;
    ra.h_tilde = 0.9;

    RateSet rb;
    rb.model = Model::B;
    rb.kappa = 1.0;
    rb.kappa_tilde_or_star = 0.5;
    rb.lambda = 0.3;
    rb.h = 0.2;
    rb.h_tilde = 0.4;

    for (const RateSet& r : {ra, rb}) {
        const char suffix = r.model == Model::A ? 'A' : 'B';
        const GeneratorMatrix gen = build_generator(r, g2);
        const double row_sum = max_abs_row_sum(gen);
        add(std::string("generator-row-sums-") + suffix, row_sum <= 1e-12,
            "max |row sum| = " + fmt(row_sum));
        const double od = min_offdiag(gen);
        add(std::string("generator-offdiag-nonneg-") + suffix, od >= 0,
            "min off-diagonal = " + fmt(od));

        const Eigen::VectorXd pi = stationary(gen);
        const double resid = (gen.Q.transpose() * pi).cwiseAbs().maxCoeff();
        add(std::string("stationary-residual-") + suffix, resid <= 1e-10,
            "max |pi Q| = " + fmt(resid));
        const double neg = pi.minCoeff();
        const double mass = std::abs(pi.sum() - 1.0);
        add(std::string("stationary-distribution-") + suffix,
            neg >= -1e-12 && mass <= 1e-12,
            "min = " + fmt(neg) + ", |mass - 1| = " + fmt(mass));
        const double asym = translation_asymmetry(gen, pi);
        add(std::string("stationary-translation-invariance-") + suffix, asym <= 1e-10,
            "max shift gap = " + fmt(asym));

        const Eigen::VectorXd d0 =
            point_mass(gen, Configuration::filled(g2, kMinus));
        const double t0_gap = tv_full(transient(gen, d0, 0.0), d0);
        add(std::string("transient-t0-identity-") + suffix, t0_gap <= 1e-12,
            "TV = " + fmt(t0_gap));
        const double semi = tv_full(transient(gen, d0, 2.0),
                                    transient(gen, transient(gen, d0, 0.7), 1.3));
        add(std::string("transient-semigroup-") + suffix, semi <= 1e-9,
            "TV(0.7 + 1.3 vs 2.0) = " + fmt(semi));
        const double fix = std::max(tv_full(transient(gen, pi, 1.0), pi),
                                    tv_full(transient(gen, pi, 5.0), pi));
        add(std::string("stationary-fixed-point-") + suffix, fix <= 1e-9,
            "max TV over t in {1, 5} = " + fmt(fix));

        double min_rate = 1e300;
        for (double v : {r.kappa, r.kappa_tilde_or_star, r.lambda, r.lambda_tilde,
                         r.h, r.h_tilde})
            if (v > 0) min_rate = std::min(min_rate, v);
        const double big_t = 200.0 / min_rate;
        const double conv = tv_full(transient(gen, d0, big_t), pi);
        add(std::string("transient-converges-") + suffix, conv <= 1e-6,
            "TV at t = " + fmt(big_t) + " is " + fmt(conv));
    }

    {
        // Model A with no neighbor rates and unit spontaneous rates factorizes
        // into independent per-site chains whose stationary law is uniform on
        // {-1, 0, 1}, so pi is uniform over all 3^N states.
        RateSet flat;
        flat.model = Model::A;
        flat.kappa = flat.kappa_tilde_or_star = flat.h = flat.h_tilde = 1.0;
        const GeneratorMatrix gen = build_generator(flat, g2);
        const Eigen::VectorXd pi = stationary(gen);
        const double gap =
            (pi - Eigen::VectorXd::Constant(gen.dim, 1.0 / gen.dim)).cwiseAbs().maxCoeff();
        add("product-measure-uniform", gap <= 1e-12, "max |pi - 3^-N| = " + fmt(gap));
    }

    {
        const GeneratorMatrix gen = build_generator(rb, g2);
        const Eigen::VectorXd pi = stationary(gen);
        const Eigen::VectorXd all1 = point_mass(gen, Configuration::filled(g2, kPlus));
        const Eigen::VectorXd allm = point_mass(gen, Configuration::filled(g2, kMinus));
        const double self_d = tv_restricted(pi, pi, 4, {0, 1});
        const double mass_d = tv_restricted(all1, allm, 4, {0});
        const double empty_d = tv_restricted(all1, allm, 4, {});
        add("tv-restricted-basics",
            self_d == 0 && std::abs(mass_d - 1.0) <= 1e-12 && empty_d == 0,
            "self = " + fmt(self_d) + ", disjoint points = " + fmt(mass_d) +
                ", empty = " + fmt(empty_d));

        // One-site marginal distance from the all-(-1) start decays at least
        // as fast as e^{-h t}.
        double worst_margin = -1e300;
        for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            const double d = tv_restricted(transient(gen, allm, t), pi, 4, {0});
            worst_margin = std::max(worst_margin, d - std::exp(-rb.h * t));
        }
        add("marginal-decay-bound-B", worst_margin <= 1e-10,
            "max (TV - e^{-ht}) = " + fmt(worst_margin));
    }

    bool all = true;
    lines.clear();
    for (const CheckRow& r : rows) {
        all = all && r.pass;
        lines.push_back(std::string(r.pass ? "[PASS] " : "[FAIL] ") + r.name + " (" +
                        r.measured + ")");
    }
    return all;
}

// ---------------------------------------------------------------------------
// Coupled sharpness scan.
// ---------------------------------------------------------------------------

std::vector<std::int64_t> default_tail_grid(int sites) {
    std::vector<std::int64_t> g;
    const std::int64_t cap = std::max<std::int64_t>(1, sites / 2);
    double v = 1;
    while (static_cast<std::int64_t>(v) <= cap) {
        const std::int64_t n = static_cast<std::int64_t>(v);
        if (g.empty() || n > g.back()) g.push_back(n);
        v *= 1.41421356237;
    }
    return g;
}

SharpnessReport sharpness_scan(const QParameterization& base,
                               const std::vector<double>& q_grid,
                               const Geometry& geom, const std::vector<int>& n_list,
                               int samples, const SharpnessOptions& opts,
                               RngStream& rng) {
    base.base.validate();
    if (!base.base.is_rescaled())
        throw std::invalid_argument("sharpness_scan: base must be rescaled");
    geom.validate();
    if (q_grid.empty()) throw std::invalid_argument("sharpness_scan: empty q grid");
    for (std::size_t i = 0; i < q_grid.size(); ++i)
        if (q_grid[i] < 0 || q_grid[i] > 1 || (i > 0 && q_grid[i] <= q_grid[i - 1]))
            throw std::invalid_argument(
                "sharpness_scan: q grid must increase strictly within [0, 1]");
    if (samples < 100)
        throw std::invalid_argument("sharpness_scan: need >= 100 samples");
    if (opts.gap <= 0 || opts.burn_in < 0)
        throw std::invalid_argument("sharpness_scan: bad sampling schedule");
    for (int n : n_list) {
        if (n < 1 || 3 * n + 1 > geom.width || n + 1 > geom.height)
            throw std::invalid_argument(
                "sharpness_scan: decision window exceeds the lattice");
    }

    const int NQ = static_cast<int>(q_grid.size());
    const int NN = static_cast<int>(n_list.size());
    const Model model = base.base.model;

    std::vector<Configuration> states(static_cast<std::size_t>(NQ),
                                      Configuration::filled(geom, kPlus));
    GraphicalTimeline tl = build_coupled(geom, 0.0, opts.gap, base, rng);
    bool first = true;
    const auto advance_all = [&]() {
        if (!first) rebuild_coupled(tl, rng);
        first = false;
        for (int qi = 0; qi < NQ; ++qi)
            states[static_cast<std::size_t>(qi)] = replay(
                tl, q_grid[static_cast<std::size_t>(qi)], model,
                states[static_cast<std::size_t>(qi)]);
    };
    const int burn_segments =
        static_cast<int>(std::ceil(opts.burn_in / opts.gap - 1e-12));
    for (int s = 0; s < burn_segments; ++s) advance_all();

    std::vector<std::vector<ClusterReport>> reports(static_cast<std::size_t>(NQ));
    for (auto& r : reports) r.reserve(static_cast<std::size_t>(samples));
    std::vector<std::vector<CrossingSamples>> tallies(
        static_cast<std::size_t>(NQ),
        std::vector<CrossingSamples>(static_cast<std::size_t>(NN)));
    std::vector<double> rho_sum(static_cast<std::size_t>(NQ), 0.0);

    for (int s = 0; s < samples; ++s) {
        advance_all();
        // One anchor per scale, shared across q so the coupling carries over
        // to the window indicators.
        std::vector<std::pair<int, int>> anchor(static_cast<std::size_t>(NN));
        for (int k = 0; k < NN; ++k) {
            const int n = n_list[static_cast<std::size_t>(k)];
            if (geom.kind == GeomKind::Torus)
                anchor[static_cast<std::size_t>(k)] = {
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(geom.width))),
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(geom.height)))};
            else
                anchor[static_cast<std::size_t>(k)] = {
                    static_cast<int>(
                        rng.below(static_cast<std::uint64_t>(geom.width - 3 * n))),
                    static_cast<int>(
                        rng.below(static_cast<std::uint64_t>(geom.height - n)))};
        }
        for (int qi = 0; qi < NQ; ++qi) {
            const Configuration& c = states[static_cast<std::size_t>(qi)];
            rho_sum[static_cast<std::size_t>(qi)] += c.density_of_ones();
            ClusterReport r = label_clusters(c);
            r.labels.clear();
            r.labels.shrink_to_fit();
            reports[static_cast<std::size_t>(qi)].push_back(std::move(r));
            for (int k = 0; k < NN; ++k) {
                const int n = n_list[static_cast<std::size_t>(k)];
                const CrossWindow w{anchor[static_cast<std::size_t>(k)].first,
                                    anchor[static_cast<std::size_t>(k)].second, 3 * n,
                                    n};
                CrossingSamples& tally =
                    tallies[static_cast<std::size_t>(qi)][static_cast<std::size_t>(k)];
                tally.count += 1;
                tally.v_hits += crossing(c, w, CrossDir::Vertical) ? 1 : 0;
                tally.h_hits += crossing(c, w, CrossDir::Horizontal) ? 1 : 0;
            }
        }
    }

    const std::vector<std::int64_t> grid =
        opts.n_grid.empty() ? default_tail_grid(geom.sites()) : opts.n_grid;
    SharpnessReport rep;
    rep.n_list = n_list;
    for (int qi = 0; qi < NQ; ++qi) {
        SharpnessEntry e;
        e.q = q_grid[static_cast<std::size_t>(qi)];
        e.rho = rho_sum[static_cast<std::size_t>(qi)] / samples;
        e.tail = tail_estimate(reports[static_cast<std::size_t>(qi)], grid,
                               opts.all_origins, opts.conf);
        for (int k = 0; k < NN; ++k)
            e.decisions.push_back(finite_size_check(
                tallies[static_cast<std::size_t>(qi)][static_cast<std::size_t>(k)],
                n_list[static_cast<std::size_t>(k)], opts.eps_hat, opts.conf));
        rep.entries.push_back(std::move(e));
    }
    for (int k = 0; k < NN; ++k)
        for (int i1 = 0; i1 < NQ; ++i1)
            for (int i2 = i1 + 1; i2 < NQ; ++i2)
                if (rep.entries[static_cast<std::size_t>(i1)]
                            .decisions[static_cast<std::size_t>(k)]
                            .decision == PhaseDecision::Supercritical &&
                    rep.entries[static_cast<std::size_t>(i2)]
                            .decisions[static_cast<std::size_t>(k)]
                            .decision == PhaseDecision::Subcritical)
                    rep.ordered = false;
    return rep;
}

}  // namespace contact
