// Config documents, model assembly from keys, subcommand runners with their
// CSV/JSON artifacts and provenance sidecars, and the installed binary's exit
// codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"
#include "khs/io.hpp"

using namespace khs;
namespace fs = std::filesystem;
using nlohmann::json;

#ifndef KHS_CLI_PATH
#define KHS_CLI_PATH ""
#endif

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / "khs_cli_io_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

size_t count_lines(const std::string& text) {
    size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string("\"") + KHS_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config documents: comments, duplicates, and strict typed accessors") {
    Config cfg = Config::from_string(
        "# comment line\n"
        "\n"
        "a = 1\n"
        "  b =  2.5\n"
        "name = two words\n"
        "ang1 = 0.5pi\n"
        "ang2 = pi\n"
        "ang3 = -pi\n"
        "ang4 = 2pi\n"
        "ang5 = 0.3\n"
        "yes1 = on\n"
        "no1 = FALSE\n"
        "big = 18446744073709551615\n"
        "fr1 = 2/3\n"
        "fr2 = 2\n");
    CHECK(cfg.has("a"));
    CHECK(!cfg.has("missing"));
    CHECK(cfg.get_int("a") == 1);
    CHECK(cfg.get_double("b") == 2.5);
    CHECK(cfg.get_string("name") == "two words");
    CHECK(cfg.get_angle("ang1", 0.0) == 0.5 * kPi);
    CHECK(cfg.get_angle("ang2", 0.0) == kPi);
    CHECK(cfg.get_angle("ang3", 0.0) == -kPi);
    CHECK(cfg.get_angle("ang4", 0.0) == 2.0 * kPi);
    CHECK(cfg.get_angle("ang5", 0.0) == 0.3);
    CHECK(cfg.get_angle("absent", 1.25) == 1.25);
    CHECK(cfg.get_bool("yes1", false));
    CHECK(!cfg.get_bool("no1", true));
    CHECK(cfg.get_u64("big", 0) == 18446744073709551615ULL);
    CHECK(cfg.get_fraction("fr1") == Fraction(2, 3));
    CHECK(cfg.get_fraction("fr2") == Fraction(2, 1));
    cfg.reject_unknown();

    CHECK_THROWS_AS((void)Config::from_string("a=1\na=2\n"), ConfigError);
    CHECK_THROWS_AS((void)Config::from_string("just a bare line\n"), ConfigError);

    Config bad = Config::from_string("d = 1.5x\ni = 2.5\nb = maybe\nu = nope\nf = 2/4\ng = x/3\n");
    CHECK_THROWS_AS((void)bad.get_double("d"), ConfigError);
    CHECK_THROWS_AS((void)bad.get_int("i"), ConfigError);
    CHECK_THROWS_AS((void)bad.get_bool("b", true), ConfigError);
    CHECK_THROWS_AS((void)bad.get_u64("u", 0), ConfigError);
    CHECK_THROWS_AS((void)bad.get_fraction("f"), ConfigError);
    CHECK_THROWS_AS((void)bad.get_fraction("g"), ConfigError);
    CHECK_THROWS_AS((void)bad.get_double("not_there"), ConfigError);
}

TEST_CASE("unknown keys are rejected and the canonical form is order-independent") {
    Config cfg = Config::from_string("beta = 2\nalpha = 1\n");
    CHECK(cfg.canonical() == "alpha=1\nbeta=2\n");
    (void)cfg.get_int("alpha");
    bool threw = false;
    try {
        cfg.reject_unknown();
    } catch (const ConfigError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
    CHECK(threw);
    (void)cfg.get_int("beta");
    cfg.reject_unknown();

    Config perm = Config::from_string("alpha = 1\nbeta = 2\n");
    CHECK(perm.hash() == cfg.hash());
    Config other = Config::from_string("alpha = 1\nbeta = 3\n");
    CHECK(other.hash() != cfg.hash());
}

TEST_CASE("potential and system-parameter assembly from config keys") {
    Config c1 = Config::from_string("");
    Potential p1 = potential_from_config(c1);
    CHECK(p1.max_harmonic() == 1);
    CHECK(p1.coeff(1) == cdouble(-0.5, 0.0));

    Config c2 = Config::from_string("v2 = 0.15, 0.1\n");
    Potential p2 = potential_from_config(c2);
    CHECK(p2.max_harmonic() == 2);
    CHECK(p2.coeff(1) == cdouble(0.0, 0.0));
    CHECK(p2.coeff(2) == cdouble(0.15, 0.1));

    Config c3 = Config::from_string("potential = -cos\nv1 = -0.5\n");
    CHECK_THROWS_AS((void)potential_from_config(c3), ConfigError);
    Config c4 = Config::from_string("potential = series\n");
    CHECK_THROWS_AS((void)potential_from_config(c4), ConfigError);
    Config c5 = Config::from_string("potential = lattice\n");
    CHECK_THROWS_AS((void)potential_from_config(c5), ConfigError);

    Config pc = Config::from_string("eta = 2/3\nxc = 0.5pi\nmu = 0.1\nhbar_s = 1/2\n");
    SystemParams par = params_from_config(pc);
    CHECK(par.resonance.l_prime == 3);
    CHECK(par.resonance.r == 12);
    CHECK(par.x_c == 0.5 * kPi);
    CHECK(par.mu == 0.1);
    REQUIRE(par.hbar_s.is_exact());
    CHECK(par.hbar_s.fraction() == Fraction(1, 2));

    Config pi = Config::from_string("eta = 0\nmu = 0.1\nhbar_s = 3\n");
    SystemParams pint = params_from_config(pi);
    REQUIRE(pint.hbar_s.is_exact());
    CHECK(pint.hbar_s.fraction() == Fraction(3, 1));
    Config pr = Config::from_string("eta = 0\nmu = 0.1\nhbar_s = 0.25\n");
    CHECK(!params_from_config(pr).hbar_s.is_exact());

    Config pk = Config::from_string("eta = 0\nkappa = 0.6\n");
    SystemParams pkap = params_from_config(pk);
    CHECK(pkap.hbar_s.value() == 1.0);
    CHECK(pkap.kappa() == doctest::Approx(0.6).epsilon(1e-15));

    for (const char* text : {
             "eta = 2/3\nmu = 0.1\nkappa = 0.5\nhbar_s = 1\n",  // both strengths
             "eta = 2/3\nhbar_s = 1\n",                         // no strength
             "eta = 2/3\nmu = 0.1\n",                           // mu without hbar_s
             "eta = 2/4\nmu = 0.1\nhbar_s = 1\n",               // unreduced eta
             "eta = 2/3\nmu = 0.1\nhbar_s = -1\n",              // nonpositive constant
             "mu = 0.1\nhbar_s = 1\n",                          // missing eta
         }) {
        Config bad = Config::from_string(text);
        CHECK_THROWS_AS((void)params_from_config(bad), ConfigError);
    }
}

TEST_CASE("web runner writes orbit files, a plot script, and a faithful sidecar") {
    fs::path out = fresh_dir("web");
    RunContext ctx{out, 1, 42};
    const std::string text =
        "eta = 0\nkappa = 0.6\nstart_u = 1.0\nstart_v = 0.5\n"
        "n_steps = 200\nn_orbits = 2\njitter = 0.1\n";
    Config cfg = Config::from_string(text);
    run_web(cfg, ctx);

    std::string csv = slurp(out / "web.csv");
    CHECK(first_line(csv) == "u,v");
    CHECK(count_lines(csv) == 401);  // header + 2 orbits x 200 points

    // Folded samples live on the standard torus.
    std::istringstream rows(csv);
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        size_t comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        double u = std::stod(line.substr(0, comma));
        double v = std::stod(line.substr(comma + 1));
        CHECK(u >= -kPi);
        CHECK(u < kPi);
        CHECK(v >= -kPi);
        CHECK(v < kPi);
    }

    CHECK(fs::exists(out / "web_plot.py"));
    json side = read_json(out / "web.meta.json");
    CHECK(side["subcommand"] == "web");
    CHECK(side["tool"] == "khs");
    CHECK(side["seed"] == 42);
    CHECK(side["workers"] == 1);
    CHECK(side["results"]["rows"] == 400);
    CHECK(side["results"]["l_prime"] == 1);
    CHECK(side["config_hash"].get<std::string>().size() == 16);
    CHECK(side["conventions"].contains("rotation"));
    std::vector<std::string> files = side["files"].get<std::vector<std::string>>();
    CHECK(files == std::vector<std::string>{"web.csv", "web_plot.py"});

    // Same config and seed: byte-identical artifacts.
    fs::path out2 = fresh_dir("web_rerun");
    Config cfg2 = Config::from_string(text);
    run_web(cfg2, RunContext{out2, 1, 42});
    CHECK(slurp(out2 / "web.csv") == csv);
    CHECK(slurp(out2 / "web.meta.json") == slurp(out / "web.meta.json"));

    // Different seed moves the jittered orbits.
    fs::path out3 = fresh_dir("web_seed");
    Config cfg3 = Config::from_string(text);
    run_web(cfg3, RunContext{out3, 1, 43});
    CHECK(slurp(out3 / "web.csv") != csv);

    Config bad1 = Config::from_string(text + "n_step = 7\n");
    CHECK_THROWS_AS(run_web(bad1, ctx), ConfigError);
    Config bad2 = Config::from_string("eta = 0\nkappa = 0.6\nn_steps = 10\n");
    CHECK_THROWS_AS(run_web(bad2, ctx), ConfigError);
    Config bad3 = Config::from_string(
        "eta = 0\nkappa = 0.6\nstart_u = 0\nstart_v = 0\nn_steps = -1\n");
    CHECK_THROWS_AS(run_web(bad3, ctx), ConfigError);
}

TEST_CASE("width and gap runner reproduces the two-band splitting") {
    fs::path out = fresh_dir("widthgap");
    RunContext ctx{out, 1, 1};
    Config cfg = Config::from_string("eta = 0\nxc = 0.5pi\nmu = 0.1\ngrid_n = 32\n");
    run_widthgap(cfg, ctx);

    json rep = read_json(out / "widthgap.json");
    const double width = rep["width"].get<double>();
    const double expect = 4.0 * std::asin(std::sin(0.1) * std::sin(0.1));
    CHECK(std::abs(width - expect) < 1e-12);
    CHECK(rep["gap"].get<double>() < 1e-12);
    CHECK(rep["width_scaled"].get<double>() ==
          doctest::Approx(width * 200.0).epsilon(1e-12));
    CHECK(rep["extrema"]["grid_n"] == 32);
    CHECK(rep["extrema"]["width"]["w1"].get<double>() == kPi / 2);
    CHECK(fs::exists(out / "widthgap.meta.json"));

    Config bad1 = Config::from_string("eta = 0\nxc = 0.5pi\nmu = 0.1\nhbar_s = 1/3\n");
    CHECK_THROWS_AS(run_widthgap(bad1, ctx), ConfigError);
    Config bad2 = Config::from_string("eta = 0\nxc = 0.5pi\nmu = 0.1\nhbar_s = 0.5\n");
    CHECK_THROWS_AS(run_widthgap(bad2, ctx), ConfigError);
}

TEST_CASE("evolve runner records quantum and classical spreading series") {
    fs::path out = fresh_dir("evolve");
    RunContext ctx{out, 1, 7};
    const std::string text =
        "eta = 2/3\nmu = 0.1\nhbar_s = 0.0861\ncenter_u = 0.5pi\ncenter_v = 0.5pi\n"
        "n_beta = 8\nwindow_half = 64\ns_max = 120\nrecord_every = 3\nclassical = 64\n"
        "prefix = ev\n";
    Config cfg = Config::from_string(text);
    run_evolve(cfg, ctx);

    std::string csv = slurp(out / "ev.csv");
    CHECK(first_line(csv) == "s,tau,spread,fidelity");
    CHECK(count_lines(csv) == 6);  // header + records at 0,36,72,108,120

    std::string ccsv = slurp(out / "ev_classical.csv");
    CHECK(first_line(ccsv) == "s,value");
    CHECK(count_lines(ccsv) == 12);  // header + cycle boundaries 0,12,...,120

    json side = read_json(out / "ev.meta.json");
    CHECK(side["results"]["records"] == 5);
    CHECK(side["results"]["l_trunc"] == 8);
    CHECK(side["results"]["n_beta"] == 8);
    CHECK(std::abs(side["results"]["center_u"].get<double>() - kPi / 2) < 1e-15);
    std::vector<std::string> files = side["files"].get<std::vector<std::string>>();
    CHECK(files == std::vector<std::string>{"ev.csv", "ev_classical.csv", "ev_plot.py"});
    CHECK(fs::exists(out / "ev_plot.py"));
    CHECK(slurp(out / "ev_plot.py").find("loglog") != std::string::npos);

    fs::path out2 = fresh_dir("evolve_rerun");
    Config cfg2 = Config::from_string(text);
    run_evolve(cfg2, RunContext{out2, 1, 7});
    CHECK(slurp(out2 / "ev.csv") == csv);
    CHECK(slurp(out2 / "ev_classical.csv") == ccsv);

    Config bad1 = Config::from_string(
        "eta = 2/3\nmu = 0.1\nhbar_s = 0.0861\ncenter_u = 0\ncenter_v = 0\ns_max = 10\n");
    CHECK_THROWS_AS(run_evolve(bad1, ctx), ConfigError);
    Config bad2 =
        Config::from_string("eta = 2/3\nmu = 0.1\nhbar_s = 0.0861\ns_max = 12\n");
    CHECK_THROWS_AS(run_evolve(bad2, ctx), ConfigError);
}

TEST_CASE("scaling runner certifies quadratic and linear kick-displacement growth") {
    fs::path out = fresh_dir("scaling");
    RunContext ctx{out, 1, 1};
    Config quad = Config::from_string("eta = 2/3\nn_kappa = 7\nprefix = sq\n");
    run_scaling(quad, ctx);
    json rq = read_json(out / "sq.meta.json")["results"];
    CHECK(rq["slope"].get<double>() == doctest::Approx(2.0).epsilon(0.05));
    std::string csv = slurp(out / "sq.csv");
    CHECK(first_line(csv) == "kappa,displacement");
    CHECK(count_lines(csv) == 8);

    Config lin = Config::from_string("eta = 0\nxc = 0.3\nn_kappa = 7\nprefix = sl\n");
    run_scaling(lin, ctx);
    json rl = read_json(out / "sl.meta.json")["results"];
    CHECK(rl["slope"].get<double>() == doctest::Approx(1.0).epsilon(0.05));

    Config bad1 = Config::from_string("eta = 0\nn_kappa = 1\n");
    CHECK_THROWS_AS(run_scaling(bad1, ctx), ConfigError);
    Config bad2 = Config::from_string("eta = 0\nkappa_min = 0.1\nkappa_max = 0.01\n");
    CHECK_THROWS_AS(run_scaling(bad2, ctx), ConfigError);
}

TEST_CASE("butterfly runner with memoization produces byte-identical rows") {
    fs::path out = fresh_dir("butterfly");
    fs::path cache = out / "cache";
    RunContext ctx{out, 1, 1};
    const std::string text = "eta = 2/3\nxc = 0\nmu = 0.1\np_max = 3\n"
                             "grid_n1 = 4\ngrid_n2 = 4\nprefix = bf\n";
    Config cfg = Config::from_string(text);
    run_butterfly(cfg, ctx);

    std::string csv = slurp(out / "bf.csv");
    CHECK(first_line(csv) == "hbar_q,hbar_p,band,w1,w2,E,E_scaled");
    // Constants 1/2, 1/3, 2/3 on a 4x4 Bloch grid contribute 16*(2+3+3) rows.
    CHECK(count_lines(csv) == 129);
    json side = read_json(out / "bf.meta.json");
    CHECK(side["results"]["points"] == 128);

    size_t memo_files = 0;
    for (const auto& e : fs::directory_iterator(cache))
        if (e.path().filename().string().rfind("khs-", 0) == 0) ++memo_files;
    CHECK(memo_files == 3);

    // Warm-cache rerun and cache-free rerun agree byte for byte.
    fs::path out2 = fresh_dir("butterfly_warm");
    Config warm = Config::from_string(text + "cache_dir = " + cache.string() + "\n");
    run_butterfly(warm, RunContext{out2, 1, 1});
    CHECK(slurp(out2 / "bf.csv") == csv);
    fs::path out3 = fresh_dir("butterfly_nocache");
    Config cold = Config::from_string(text + "cache = false\n");
    run_butterfly(cold, RunContext{out3, 1, 1});
    CHECK(slurp(out3 / "bf.csv") == csv);

    // The cache subcommand counts and clears only the memo files.
    Config stats = Config::from_string("cache_dir = " + cache.string() + "\n");
    CHECK(run_cache(stats, ctx) == 0);
    Config clear = Config::from_string("action = clear\ncache_dir = " + cache.string() + "\n");
    CHECK(run_cache(clear, ctx) == 0);
    size_t left = 0;
    for (const auto& e : fs::directory_iterator(cache)) {
        (void)e;
        ++left;
    }
    CHECK(left == 0);
    Config badact = Config::from_string("action = evict\n");
    CHECK_THROWS_AS((void)run_cache(badact, ctx), ConfigError);

    Config badp = Config::from_string("eta = 2/3\nmu = 0.1\np_max = 1\n");
    CHECK_THROWS_AS(run_butterfly(badp, ctx), ConfigError);
}

TEST_CASE("antiresonance check runner passes at the exact point and fails off it") {
    fs::path out = fresh_dir("qar");
    RunContext ctx{out, 1, 5};
    Config good = Config::from_string(
        "eta = 2/3\nmu = 0.1\nhbar_s = 1\nn_random_w = 5\ncycles = 5\n"
        "n_beta = 8\nwindow_half = 64\n");
    CHECK(run_qar_check(good, ctx) == 0);
    json rep = read_json(out / "qar_check.json");
    CHECK(rep["qar_predicate"] == true);
    CHECK(rep["flat_band"] == true);
    CHECK(rep["fidelity_one"] == true);
    CHECK(rep["band_spread_max"].get<double>() <= 1e-10);

    Config off = Config::from_string(
        "eta = 1/4\nmu = 0.1\nhbar_s = 1\nn_random_w = 5\ncycles = 5\n"
        "n_beta = 8\nwindow_half = 64\nprefix = qoff\n");
    CHECK(run_qar_check(off, ctx) == 3);
    json roff = read_json(out / "qoff.json");
    CHECK(roff["qar_predicate"] == false);

    Config bad = Config::from_string("eta = 2/3\nmu = 0.1\nhbar_s = 1/2\n");
    CHECK_THROWS_AS((void)run_qar_check(bad, ctx), ConfigError);

    CHECK_THROWS_AS((void)run_subcommand("nope", bad, ctx), ConfigError);
}

TEST_CASE("command-line binary maps outcomes to exit codes") {
    const std::string cli = KHS_CLI_PATH;
    REQUIRE(!cli.empty());
    REQUIRE(fs::exists(cli));

    fs::path dir = fresh_dir("cli");
    write_file(dir / "wg.cfg", "eta = 0\nxc = 0.5pi\nmu = 0.1\nprefix = wg\n");
    write_file(dir / "typo.cfg", "eta = 0\nxc = 0.5pi\nmu = 0.1\ngrid = 8\n");
    write_file(dir / "qoff.cfg", "eta = 1/4\nmu = 0.1\nhbar_s = 1\nn_random_w = 3\ncycles = 2\n"
                                 "n_beta = 8\nwindow_half = 64\n");

    CHECK(run_cli("") == 2);                 // a subcommand is required
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("frobnicate") == 2);       // unknown subcommand
    CHECK(run_cli("widthgap --config " + (dir / "wg.cfg").string() + " --out " +
                  (dir / "out").string() + " --seed 7") == 0);
    CHECK(fs::exists(dir / "out" / "wg.json"));
    json side = read_json(dir / "out" / "wg.meta.json");
    CHECK(side["seed"] == 7);
    CHECK(run_cli("widthgap --config " + (dir / "typo.cfg").string() + " --out " +
                  (dir / "out2").string()) == 2);
    CHECK(run_cli("widthgap --config " + (dir / "missing.cfg").string()) == 2);
    CHECK(run_cli("qar-check --config " + (dir / "qoff.cfg").string() + " --out " +
                  (dir / "outq").string()) == 3);
    CHECK(run_cli("cache stats --out " + (dir / "outc").string()) == 0);
}
