#include "khs/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "khs/classical.hpp"
#include "khs/effective_hamiltonian.hpp"
#include "khs/evolution.hpp"
#include "khs/qe_spectrum.hpp"

namespace khs {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

// %.6g, for plot titles only.
std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
    return true;
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + s + "' is not a number");
    }
}

long long parse_ll(const std::string& key, const std::string& s) {
    try {
        size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + s + "' is not an integer");
    }
}

bool is_integer_literal(const std::string& s) {
    size_t i = (s.size() > 0 && (s[0] == '+' || s[0] == '-')) ? 1 : 0;
    if (i >= s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

}  // namespace

Config Config::from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!valid_key(key))
            throw ConfigError("line " + std::to_string(lineno) + ": bad key '" + key + "'");
        if (cfg.values_.count(key))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        cfg.values_[key] = val;
    }
    return cfg;
}

Config Config::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return from_string(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void Config::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw ConfigError("bad key '" + key + "'");
    values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::raw(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    used_.insert(key);
    return it->second;
}

std::string Config::get_string(const std::string& key) { return raw(key); }
std::string Config::get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? raw(key) : fallback;
}

double Config::get_double(const std::string& key) { return parse_double(key, raw(key)); }
double Config::get_double(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
}

double Config::get_angle(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    std::string s = raw(key);
    double scale = 1.0;
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
        scale = kPi;
        s = trim(s.substr(0, s.size() - 2));
        if (s.empty() || s == "+") s = "1";
        if (s == "-") s = "-1";
    }
    return scale * parse_double(key, s);
}

long long Config::get_int(const std::string& key) { return parse_ll(key, raw(key)); }
long long Config::get_int(const std::string& key, long long fallback) {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    std::string s = raw(key);
    try {
        size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + s + "' is not an unsigned integer");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    std::string s = raw(key);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + key + "': '" + s + "' is not a boolean");
}

Fraction Config::get_fraction(const std::string& key) {
    std::string s = raw(key);
    try {
        size_t slash = s.find('/');
        if (slash == std::string::npos) return Fraction(parse_ll(key, s), 1);
        return Fraction(parse_ll(key, s.substr(0, slash)), parse_ll(key, s.substr(slash + 1)));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("key '" + key + "': bad fraction '" + s + "': " + e.what());
    }
}

void Config::reject_unknown() const {
    std::string unknown;
    for (const auto& [k, v] : values_)
        if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty()) throw ConfigError("unknown config key(s): " + unknown);
}

std::string Config::canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) {
        s += k;
        s += '=';
        s += v;
        s += '\n';
    }
    return s;
}

Potential potential_from_config(Config& cfg) {
    std::array<std::optional<cdouble>, 9> given;
    int top = 0;
    for (int g = 1; g <= 8; ++g) {
        std::string key = "v" + std::to_string(g);
        if (!cfg.has(key)) continue;
        std::string s = cfg.get_string(key);
        size_t comma = s.find(',');
        double re, im = 0.0;
        if (comma == std::string::npos) {
            re = parse_double(key, trim(s));
        } else {
            re = parse_double(key, trim(s.substr(0, comma)));
            im = parse_double(key, trim(s.substr(comma + 1)));
        }
        given[static_cast<size_t>(g)] = cdouble(re, im);
        top = g;
    }
    std::string kind = cfg.get_string("potential", top ? "series" : "-cos");
    if (kind == "-cos") {
        if (top) throw ConfigError("potential=-cos conflicts with explicit harmonics v1..v8");
        return Potential::minus_cos();
    }
    if (kind != "series") throw ConfigError("potential must be '-cos' or 'series'");
    if (!top) throw ConfigError("potential=series needs at least one of v1..v8");
    std::vector<cdouble> coeffs(static_cast<size_t>(top), cdouble(0.0, 0.0));
    for (int g = 1; g <= top; ++g)
        if (given[static_cast<size_t>(g)]) coeffs[static_cast<size_t>(g - 1)] = *given[static_cast<size_t>(g)];
    return Potential(std::move(coeffs));
}

HbarS hbars_from_config(Config& cfg, const std::string& key, std::optional<HbarS> fallback) {
    if (!cfg.has(key)) {
        if (fallback) return *fallback;
        throw ConfigError("missing required key '" + key + "'");
    }
    std::string s = cfg.get_string(key);
    try {
        size_t slash = s.find('/');
        if (slash != std::string::npos)
            return HbarS::exact(
                Fraction(parse_ll(key, s.substr(0, slash)), parse_ll(key, s.substr(slash + 1))));
        if (is_integer_literal(s)) return HbarS::exact(parse_ll(key, s), 1);
        double v = parse_double(key, s);
        if (v <= 0.0) throw ConfigError("key '" + key + "': hbar_s must be positive");
        return HbarS::real(v);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("key '" + key + "': bad value '" + s + "': " + e.what());
    }
}

SystemParams params_from_config(Config& cfg, std::optional<HbarS> hbar_fallback) {
    Potential pot = potential_from_config(cfg);
    Fraction eta = cfg.get_fraction("eta");
    double xc = cfg.get_angle("xc", 0.0);
    bool has_mu = cfg.has("mu"), has_kappa = cfg.has("kappa");
    if (has_mu && has_kappa) throw ConfigError("give either mu or kappa, not both");
    if (!has_mu && !has_kappa) throw ConfigError("missing kick strength: set mu or kappa");
    HbarS hs = HbarS::real(1.0);
    if (cfg.has("hbar_s"))
        hs = hbars_from_config(cfg, "hbar_s");
    else if (hbar_fallback)
        hs = *hbar_fallback;
    else if (has_mu)
        throw ConfigError("mu needs hbar_s (use kappa for a classical-only run)");
    double mu = has_mu ? cfg.get_double("mu") : cfg.get_double("kappa") / (kTwoPi * hs.value());
    try {
        return make_params(std::move(pot), eta, xc, hs, mu);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------------------
// Persistence helpers.

namespace {

void write_text(const fs::path& p, const std::string& text) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << text;
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, p);
}

void write_csv(const fs::path& p, const std::string& header,
               const std::vector<std::string>& rows) {
    std::string text = header;
    text += '\n';
    for (const std::string& r : rows) {
        text += r;
        text += '\n';
    }
    write_text(p, text);
}

json convention_flags() {
    return json{
        {"csv_float_format", "%.17g"},
        {"cycle_order", "M_r = M_0 M_1 ... M_{r/2-1}, factor 0 leftmost"},
        {"eigenphase", "E = -arg(lambda) in (-pi, pi]"},
        {"rotation", "z -> [z + kappa f(x_c + s eta - v)] e^{-i pi/2} per kick"},
        {"scaled_energy", "E_scaled = 8 cos(eta) E / (r mu eps)"},
        {"scaled_time", "tau = s / (8 |cos eta|)"},
    };
}

std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// One sidecar per run, named <data>.meta.json, listing every file written.
void write_sidecar(const fs::path& data_path, const std::string& subcommand,
                   const Config& cfg, const RunContext& ctx, json results,
                   std::vector<std::string> files) {
    json j{
        {"config", cfg.canonical()},
        {"config_hash", hash_hex(cfg.hash())},
        {"conventions", convention_flags()},
        {"files", std::move(files)},
        {"results", std::move(results)},
        {"seed", ctx.seed},
        {"subcommand", subcommand},
        {"tool", "khs"},
        {"version", kVersion},
        {"workers", ctx.workers},
    };
    fs::path side = data_path;
    side.replace_extension();
    side += ".meta.json";
    write_text(side, j.dump(2) + "\n");
}

std::string py_preamble() {
    return "#!/usr/bin/env python3\n"
           "import csv\n"
           "from pathlib import Path\n\n"
           "import matplotlib\n\n"
           "matplotlib.use(\"Agg\")\n"
           "import matplotlib.pyplot as plt\n\n"
           "here = Path(__file__).resolve().parent\n\n\n"
           "def read_csv(name):\n"
           "    cols = {}\n"
           "    with open(here / name) as fh:\n"
           "        for row in csv.DictReader(fh):\n"
           "            for k, v in row.items():\n"
           "                cols.setdefault(k, []).append(float(v))\n"
           "    return cols\n\n\n";
}

std::string param_title(const SystemParams& p, bool classical_only) {
    std::string t = "eta/(2pi)=" + p.eta.to_string() + ", x_c=" + fmt_short(p.x_c);
    if (classical_only)
        t += ", kappa=" + fmt_short(p.kappa());
    else
        t += ", mu=" + fmt_short(p.mu) + ", hbar_s=" + fmt_short(p.hbar_s.value());
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Subcommand runners.

void run_web(Config& cfg, const RunContext& ctx) {
    SystemParams par = params_from_config(cfg);
    if (!cfg.has("start_u") || !cfg.has("start_v"))
        throw ConfigError("web needs start_u and start_v");
    PhasePoint start{cfg.get_angle("start_u", 0.0), cfg.get_angle("start_v", 0.0)};
    long long n_steps = cfg.get_int("n_steps");
    long long n_orbits = cfg.get_int("n_orbits", 1);
    double jitter = cfg.get_double("jitter", 0.0);
    bool fold = cfg.get_bool("fold", true);
    std::string prefix = cfg.get_string("prefix", "web");
    cfg.reject_unknown();
    if (n_steps < 0) throw ConfigError("n_steps must be >= 0");
    if (n_orbits < 1) throw ConfigError("n_orbits must be >= 1");

    fs::create_directories(ctx.out_dir);
    Rng rng(ctx.seed);
    std::vector<std::string> rows;
    rows.reserve(static_cast<size_t>(n_orbits * n_steps));
    for (long long i = 0; i < n_orbits; ++i) {
        PhasePoint z = start;
        z.u += jitter * rng.uniform(-1.0, 1.0);
        z.v += jitter * rng.uniform(-1.0, 1.0);
        std::vector<PhasePoint> orbit =
            fold ? sample_web(par, z, n_steps) : sample_web_unfolded(par, z, n_steps);
        for (const PhasePoint& q : orbit) rows.push_back(fmt_g17(q.u) + "," + fmt_g17(q.v));
    }

    fs::path csv = ctx.out_dir / (prefix + ".csv");
    write_csv(csv, "u,v", rows);
    std::string script = py_preamble() +
        "d = read_csv(\"" + prefix + ".csv\")\n"
        "fig, ax = plt.subplots(figsize=(5, 5))\n"
        "ax.plot(d.get(\"u\", []), d.get(\"v\", []), \",\", markersize=0.4, color=\"k\")\n"
        "ax.set_xlabel(\"u\")\n"
        "ax.set_ylabel(\"v\")\n"
        "ax.set_title(\"" + param_title(par, true) + "\")\n"
        "fig.tight_layout()\n"
        "fig.savefig(here / \"" + prefix + ".png\", dpi=200)\n"
        "print(\"wrote\", here / \"" + prefix + ".png\")\n";
    fs::path plot = ctx.out_dir / (prefix + "_plot.py");
    write_text(plot, script);
    write_sidecar(csv, "web", cfg, ctx,
                  json{{"rows", rows.size()},
                       {"kappa", par.kappa()},
                       {"l_prime", par.resonance.l_prime},
                       {"r", par.resonance.r}},
                  {csv.filename().string(), plot.filename().string()});
    std::cout << "wrote " << csv.string() << " (" << rows.size() << " rows)\n";
}

void run_butterfly(Config& cfg, const RunContext& ctx) {
    Potential pot = potential_from_config(cfg);
    Fraction eta = cfg.get_fraction("eta");
    double xc = cfg.get_angle("xc", 0.0);
    double mu = cfg.get_double("mu");
    int p_max = static_cast<int>(cfg.get_int("p_max"));
    ButterflyOptions opts;
    opts.grid_n1 = static_cast<int>(cfg.get_int("grid_n1", 16));
    opts.grid_n2 = static_cast<int>(cfg.get_int("grid_n2", 16));
    opts.workers = ctx.workers;
    bool use_cache = cfg.get_bool("cache", true);
    std::string cache_dir = cfg.get_string("cache_dir", (ctx.out_dir / "cache").string());
    opts.cache_dir = use_cache ? cache_dir : "";
    std::string prefix = cfg.get_string("prefix", "butterfly");
    cfg.reject_unknown();
    if (p_max < 2) throw ConfigError("p_max must be >= 2");
    if (opts.grid_n1 < 1 || opts.grid_n2 < 1) throw ConfigError("grid sizes must be >= 1");

    fs::create_directories(ctx.out_dir);
    ButterflyDataset ds = butterfly(pot, eta, xc, mu, p_max, opts);

    std::vector<std::string> rows;
    rows.reserve(ds.points.size());
    double emin = 0.0, emax = 0.0;
    for (const ButterflyPoint& pt : ds.points) {
        emin = std::min(emin, pt.e_scaled);
        emax = std::max(emax, pt.e_scaled);
        rows.push_back(std::to_string(pt.q) + "," + std::to_string(pt.p) + "," +
                       std::to_string(pt.band) + "," + fmt_g17(pt.w1) + "," + fmt_g17(pt.w2) +
                       "," + fmt_g17(pt.e) + "," + fmt_g17(pt.e_scaled));
    }
    fs::path csv = ctx.out_dir / (prefix + ".csv");
    write_csv(csv, "hbar_q,hbar_p,band,w1,w2,E,E_scaled", rows);
    std::string script = py_preamble() +
        "d = read_csv(\"" + prefix + ".csv\")\n"
        "hs = [q / p for q, p in zip(d[\"hbar_q\"], d[\"hbar_p\"])]\n"
        "fig, ax = plt.subplots(figsize=(6, 6))\n"
        "ax.plot(hs, d[\"E_scaled\"], \",\", markersize=0.3, color=\"k\")\n"
        "ax.set_xlabel(\"hbar_s\")\n"
        "ax.set_ylabel(\"scaled quasienergy\")\n"
        "ax.set_title(\"mu=" + fmt_short(mu) + ", eta/(2pi)=" + eta.to_string() +
        ", x_c=" + fmt_short(xc) + "\")\n"
        "fig.tight_layout()\n"
        "fig.savefig(here / \"" + prefix + ".png\", dpi=200)\n"
        "print(\"wrote\", here / \"" + prefix + ".png\")\n";
    fs::path plot = ctx.out_dir / (prefix + "_plot.py");
    write_text(plot, script);
    write_sidecar(csv, "butterfly", cfg, ctx,
                  json{{"points", ds.points.size()},
                       {"p_max", p_max},
                       {"e_scaled_min", emin},
                       {"e_scaled_max", emax},
                       {"cache_dir", use_cache ? cache_dir : ""}},
                  {csv.filename().string(), plot.filename().string()});
    std::cout << "wrote " << csv.string() << " (" << rows.size() << " rows)\n";
}

void run_evolve(Config& cfg, const RunContext& ctx) {
    SystemParams par = params_from_config(cfg);
    if (!cfg.has("center_u") || !cfg.has("center_v"))
        throw ConfigError("evolve needs center_u and center_v");
    FixedPoint center;
    center.point = PhasePoint{cfg.get_angle("center_u", 0.0), cfg.get_angle("center_v", 0.0)};
    bool refine = cfg.get_bool("refine_center", false);
    int n_beta = static_cast<int>(cfg.get_int("n_beta", 64));
    int window_half = static_cast<int>(cfg.get_int("window_half", 192));
    long long s_max = cfg.get_int("s_max");
    EvolveOptions opts;
    opts.l_trunc = static_cast<int>(cfg.get_int("l_trunc", 0));
    opts.record_every_cycles = static_cast<int>(cfg.get_int("record_every", 1));
    opts.workers = ctx.workers;
    opts.window_cap = cfg.get_int("window_cap", 1LL << 16);
    long long n_classical = cfg.get_int("classical", 0);
    std::string prefix = cfg.get_string("prefix", "evolve");
    cfg.reject_unknown();
    if (s_max <= 0 || s_max % par.resonance.r != 0)
        throw ConfigError("s_max must be a positive multiple of r = " +
                          std::to_string(par.resonance.r));

    if (refine) {
        FixedPointSearch search = find_fixed_points(par, {center.point});
        if (search.points.empty())
            throw ConditionViolated("no basic-map fixed point found near the requested center");
        center = search.points.front();
    }

    fs::create_directories(ctx.out_dir);
    FiberSet fibers = init_coherent_fibers(center, par, n_beta, window_half);
    EvolutionResult res = evolve(std::move(fibers), par, s_max, opts);

    std::vector<std::string> rows;
    rows.reserve(res.times.size());
    for (size_t i = 0; i < res.times.size(); ++i)
        rows.push_back(std::to_string(res.times[i]) + "," + fmt_g17(res.tau[i]) + "," +
                       fmt_g17(res.spread[i]) + "," + fmt_g17(res.fidelity[i]));
    fs::path csv = ctx.out_dir / (prefix + ".csv");
    write_csv(csv, "s,tau,spread,fidelity", rows);

    std::vector<std::string> files{csv.filename().string()};
    if (n_classical > 0) {
        SpreadSeries cs = classical_spread(par, center.point, static_cast<int>(n_classical),
                                           s_max, ctx.seed, ctx.workers);
        std::vector<std::string> crow;
        crow.reserve(cs.times.size());
        for (size_t i = 0; i < cs.times.size(); ++i)
            crow.push_back(std::to_string(cs.times[i]) + "," + fmt_g17(cs.values[i]));
        fs::path ccsv = ctx.out_dir / (prefix + "_classical.csv");
        write_csv(ccsv, "s,value", crow);
        files.push_back(ccsv.filename().string());
    }

    std::string script = py_preamble() +
        "d = read_csv(\"" + prefix + ".csv\")\n"
        "fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))\n"
        "ax1.loglog(d[\"s\"][1:], d[\"spread\"][1:], label=\"quantum\")\n";
    if (n_classical > 0)
        script +=
            "c = read_csv(\"" + prefix + "_classical.csv\")\n"
            "ax1.loglog(c[\"s\"][1:], c[\"value\"][1:], \"--\", label=\"classical\")\n";
    script +=
        "ax1.set_xlabel(\"s\")\n"
        "ax1.set_ylabel(\"spread\")\n"
        "ax1.legend()\n"
        "ax2.plot(d[\"s\"], d[\"fidelity\"])\n"
        "ax2.set_xlabel(\"s\")\n"
        "ax2.set_ylabel(\"fidelity\")\n"
        "fig.suptitle(\"" + param_title(par, false) + "\")\n"
        "fig.tight_layout()\n"
        "fig.savefig(here / \"" + prefix + ".png\", dpi=200)\n"
        "print(\"wrote\", here / \"" + prefix + ".png\")\n";
    fs::path plot = ctx.out_dir / (prefix + "_plot.py");
    write_text(plot, script);
    files.push_back(plot.filename().string());

    write_sidecar(csv, "evolve", cfg, ctx,
                  json{{"center_u", res.meta.u_center},
                       {"center_v", res.meta.v_center},
                       {"center_refined", refine},
                       {"residue_trace", center.residue_trace},
                       {"n_beta", res.meta.n_beta},
                       {"l_trunc", res.meta.l_trunc},
                       {"window_initial", res.meta.window_initial},
                       {"window_final", res.meta.window_final},
                       {"norm_initial", res.meta.norm_initial},
                       {"norm_final", res.meta.norm_final},
                       {"spread_final", res.spread.back()},
                       {"fidelity_final", res.fidelity.back()},
                       {"records", res.times.size()}},
                  std::move(files));
    std::cout << "wrote " << csv.string() << " (" << rows.size() << " rows)\n";
}

void run_widthgap(Config& cfg, const RunContext& ctx) {
    SystemParams par = params_from_config(cfg, HbarS::exact(1, 2));
    int grid_n = static_cast<int>(cfg.get_int("grid_n", 64));
    std::string prefix = cfg.get_string("prefix", "widthgap");
    cfg.reject_unknown();
    if (!par.hbar_s.is_exact() || par.hbar_s.fraction() != Fraction(1, 2))
        throw ConfigError("widthgap is defined at hbar_s = 1/2");

    WidthGap wg = width_gap_half(par, grid_n);
    json report{
        {"eta", par.eta.to_string()},
        {"mu", par.mu},
        {"xc", par.x_c},
        {"width", wg.width},
        {"gap", wg.gap},
        {"width_scaled", wg.width_scaled},
        {"gap_scaled", wg.gap_scaled},
        {"extrema",
         json{{"width", json{{"w1", kPi / 2}, {"w2", kPi / 2}, {"split", wg.width}}},
              {"gap", json{{"w1", 0.0}, {"w2", 0.0}, {"split", wg.gap}}},
              {"grid_min", wg.grid_min},
              {"grid_max", wg.grid_max},
              {"grid_n", grid_n}}},
    };
    fs::create_directories(ctx.out_dir);
    fs::path out = ctx.out_dir / (prefix + ".json");
    write_text(out, report.dump(2) + "\n");
    write_sidecar(out, "widthgap", cfg, ctx, report, {out.filename().string()});
    std::cout << report.dump(2) << "\n";
}

int run_qar_check(Config& cfg, const RunContext& ctx) {
    SystemParams par = params_from_config(cfg, HbarS::exact(1, 1));
    int n_w = static_cast<int>(cfg.get_int("n_random_w", 25));
    long long cycles = cfg.get_int("cycles", 100);
    int n_beta = static_cast<int>(cfg.get_int("n_beta", 16));
    int window_half = static_cast<int>(cfg.get_int("window_half", 96));
    double tol = cfg.get_double("tolerance", 1e-10);
    double cu = cfg.get_angle("center_u", kPi / 2);
    double cv = cfg.get_angle("center_v", kPi / 2);
    std::string prefix = cfg.get_string("prefix", "qar_check");
    cfg.reject_unknown();
    if (!par.hbar_s.is_exact() || par.hbar_s.fraction().den != 1)
        throw ConfigError("qar-check needs an integer hbar_s");

    bool predicate = qar_predicate(par);

    // Flat-band probe: all eigenphases across random Bloch points agree.
    double band_spread = 0.0;
    {
        Rng rng(ctx.seed);
        std::vector<double> ref;
        double zone1 = kTwoPi * par.hbar_s.value();
        double zone2 = kTwoPi / static_cast<double>(par.hbar_s.fraction().den);
        for (int i = 0; i < n_w; ++i) {
            BlochPoint w{rng.uniform(0.0, zone1), rng.uniform(0.0, zone2)};
            std::vector<double> phases = band_eigenphases(mr_matrix(w, par));
            if (ref.empty()) ref = phases;
            for (size_t b = 0; b < phases.size(); ++b)
                band_spread = std::max(band_spread, std::abs(fold_pi(phases[b] - ref[b])));
        }
    }

    // Freezing probe: cycle-boundary fidelity of a coherent packet. (Between
    // cycle boundaries the state does change; antiresonance freezes the
    // stroboscopic dynamics at multiples of r.)
    FixedPoint center;
    center.point = PhasePoint{cu, cv};
    FiberSet fibers = init_coherent_fibers(center, par, n_beta, window_half);
    EvolveOptions opts;
    opts.workers = ctx.workers;
    EvolutionResult res = evolve(std::move(fibers), par, cycles * par.resonance.r, opts);
    double fid_min = 1.0;
    for (double f : res.fidelity) fid_min = std::min(fid_min, f);

    bool flat_band = band_spread <= tol;
    bool fidelity_one = std::abs(1.0 - fid_min) <= tol;
    json report{{"flat_band", flat_band},
                {"fidelity_one", fidelity_one},
                {"qar_predicate", predicate},
                {"band_spread_max", band_spread},
                {"fidelity_min", fid_min},
                {"cycles", cycles},
                {"n_random_w", n_w},
                {"tolerance", tol}};
    fs::create_directories(ctx.out_dir);
    fs::path out = ctx.out_dir / (prefix + ".json");
    write_text(out, report.dump(2) + "\n");
    write_sidecar(out, "qar-check", cfg, ctx, report, {out.filename().string()});
    std::cout << report.dump(2) << "\n";
    return (predicate && flat_band && fidelity_one) ? 0 : 3;
}

void run_scaling(Config& cfg, const RunContext& ctx) {
    Potential pot = potential_from_config(cfg);
    Fraction eta = cfg.get_fraction("eta");
    double xc = cfg.get_angle("xc", 0.0);
    double kmin = cfg.get_double("kappa_min", 1e-4);
    double kmax = cfg.get_double("kappa_max", 1e-2);
    int nk = static_cast<int>(cfg.get_int("n_kappa", 9));
    int grid_n = static_cast<int>(cfg.get_int("grid_n", 8));
    std::string prefix = cfg.get_string("prefix", "scaling");
    cfg.reject_unknown();
    if (!(kmin > 0.0) || !(kmax > kmin)) throw ConfigError("need 0 < kappa_min < kappa_max");
    if (nk < 2) throw ConfigError("n_kappa must be >= 2");

    SystemParams base = make_params(pot, eta, xc, HbarS::real(1.0), 0.0);
    std::vector<double> kappas(static_cast<size_t>(nk));
    for (int i = 0; i < nk; ++i)
        kappas[static_cast<size_t>(i)] =
            kmin * std::pow(kmax / kmin, static_cast<double>(i) / (nk - 1));
    std::vector<PhasePoint> pts = default_seed_grid(grid_n);
    double slope = displacement_scaling(base, kappas, pts);

    std::vector<std::string> rows;
    for (double k : kappas) {
        SystemParams pk = base.with_kappa(k);
        double dmax = 0.0;
        for (const PhasePoint& z : pts) {
            PhasePoint w = basic_map(z, pk);
            dmax = std::max(dmax, std::hypot(w.u - z.u, w.v - z.v));
        }
        rows.push_back(fmt_g17(k) + "," + fmt_g17(dmax));
    }
    fs::create_directories(ctx.out_dir);
    fs::path csv = ctx.out_dir / (prefix + ".csv");
    write_csv(csv, "kappa,displacement", rows);
    json report{{"slope", slope},
                {"eta", eta.to_string()},
                {"xc", xc},
                {"kappa_min", kmin},
                {"kappa_max", kmax},
                {"n_kappa", nk},
                {"sample_points", pts.size()}};
    std::string script = py_preamble() +
        "d = read_csv(\"" + prefix + ".csv\")\n"
        "fig, ax = plt.subplots(figsize=(5, 4))\n"
        "ax.loglog(d[\"kappa\"], d[\"displacement\"], \"o-\")\n"
        "ax.set_xlabel(\"kappa\")\n"
        "ax.set_ylabel(\"max cycle displacement\")\n"
        "ax.set_title(\"slope=" + fmt_short(slope) + ", eta/(2pi)=" + eta.to_string() + "\")\n"
        "fig.tight_layout()\n"
        "fig.savefig(here / \"" + prefix + ".png\", dpi=200)\n"
        "print(\"wrote\", here / \"" + prefix + ".png\")\n";
    fs::path plot = ctx.out_dir / (prefix + "_plot.py");
    write_text(plot, script);
    write_sidecar(csv, "scaling", cfg, ctx, report,
                  {csv.filename().string(), plot.filename().string()});
    std::cout << report.dump(2) << "\n";
}

int run_cache(Config& cfg, const RunContext& ctx) {
    std::string action = cfg.get_string("action", "stats");
    std::string cache_dir = cfg.get_string("cache_dir", (ctx.out_dir / "cache").string());
    cfg.reject_unknown();
    if (action != "stats" && action != "clear")
        throw ConfigError("cache action must be 'stats' or 'clear'");

    std::uintmax_t files = 0, bytes = 0, removed = 0;
    if (fs::exists(cache_dir)) {
        for (const auto& e : fs::directory_iterator(cache_dir)) {
            if (!e.is_regular_file()) continue;
            std::string name = e.path().filename().string();
            if (name.rfind("khs-", 0) != 0 || name.size() < 5 ||
                name.compare(name.size() - 5, 5, ".json") != 0)
                continue;
            ++files;
            bytes += e.file_size();
            if (action == "clear") {
                fs::remove(e.path());
                ++removed;
            }
        }
    }
    json report{{"action", action}, {"cache_dir", cache_dir}, {"files", files}, {"bytes", bytes}};
    if (action == "clear") report["removed"] = removed;
    std::cout << report.dump(2) << "\n";
    return 0;
}

int run_subcommand(const std::string& name, Config& cfg, const RunContext& ctx) {
    if (name == "web") {
        run_web(cfg, ctx);
        return 0;
    }
    if (name == "butterfly") {
        run_butterfly(cfg, ctx);
        return 0;
    }
    if (name == "evolve") {
        run_evolve(cfg, ctx);
        return 0;
    }
    if (name == "widthgap") {
        run_widthgap(cfg, ctx);
        return 0;
    }
    if (name == "qar-check") return run_qar_check(cfg, ctx);
    if (name == "scaling") {
        run_scaling(cfg, ctx);
        return 0;
    }
    if (name == "cache") return run_cache(cfg, ctx);
    throw ConfigError("unknown subcommand '" + name + "'");
}

}  // namespace khs
