#pragma once
// Run orchestration: key=value config documents, typed accessors with
// unknown-key rejection, CSV/JSON persistence with provenance sidecars, and
// plot-script emission for the figure recipes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "khs/params.hpp"

namespace khs {

// Shortest decimal that round-trips a double ("%.17g" trimmed by printf).
std::string fmt_g17(double v);

// One run's configuration: `key = value` lines, '#' comments, duplicate keys
// rejected. Accessors mark keys as consumed; reject_unknown() then fails on
// anything a runner never asked about, so typos cannot silently change a run.
class Config {
  public:
    Config() = default;
    static Config from_file(const std::filesystem::path& path);
    static Config from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    // Like get_double but a trailing "pi" scales by pi: "0.5pi" -> pi/2.
    double get_angle(const std::string& key, double fallback);
    long long get_int(const std::string& key);
    long long get_int(const std::string& key, long long fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);
    Fraction get_fraction(const std::string& key);  // "k/l" or a bare integer

    void reject_unknown() const;  // ConfigError listing unconsumed keys
    std::string canonical() const;  // sorted "key=value" lines
    std::uint64_t hash() const { return fnv1a64(canonical()); }

  private:
    std::string raw(const std::string& key);  // marks consumed; throws if absent
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

struct RunContext {
    std::filesystem::path out_dir = "out";
    int workers = 1;
    std::uint64_t seed = 1;
};

// Model assembly from config keys shared by the runners (exposed for tests).
// potential: "-cos" (default) or per-harmonic keys v1..v8, each "re" or "re,im".
Potential potential_from_config(Config& cfg);
// hbar_s: "q/p" (exact) or a real literal.
HbarS hbars_from_config(Config& cfg, const std::string& key,
                        std::optional<HbarS> fallback = {});
// eta (required), xc (default 0), potential, and exactly one of mu (needs an
// hbar_s) or kappa (hbar_s defaults to 1 so that kappa = 2 pi mu).
SystemParams params_from_config(Config& cfg, std::optional<HbarS> hbar_fallback = {});

// Subcommand runners; each consumes its whole config before computing, then
// writes <prefix>.* under ctx.out_dir. The int-returning checks yield the
// process exit code (0 pass, 3 certification failure).
void run_web(Config& cfg, const RunContext& ctx);
void run_butterfly(Config& cfg, const RunContext& ctx);
void run_evolve(Config& cfg, const RunContext& ctx);
void run_widthgap(Config& cfg, const RunContext& ctx);
int run_qar_check(Config& cfg, const RunContext& ctx);
void run_scaling(Config& cfg, const RunContext& ctx);
int run_cache(Config& cfg, const RunContext& ctx);

// Dispatch by subcommand name; returns the process exit code.
int run_subcommand(const std::string& name, Config& cfg, const RunContext& ctx);

}  // namespace khs
