#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "keybuf/channels.hpp"
#include "keybuf/errors.hpp"
#include "keybuf/leakage_audit.hpp"
#include "keybuf/power_control.hpp"
#include "keybuf/scheme.hpp"
#include "keybuf/serialize.hpp"

namespace fs = std::filesystem;
using namespace keybuf;

namespace {

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("KEYBUF_LOG");
        if (!env) return 1;
        const std::string s = env;
        if (s == "off") return 0;
        if (s == "error") return 1;
        if (s == "warn") return 2;
        if (s == "info") return 3;
        if (s == "debug") return 4;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 3) std::cerr << "[keybuf] " << msg << "\n";
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("malformed JSON in ") + path + ": " + e.what());
    }
    return j;
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << contents;
    log_info("wrote " + path.string());
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

struct CommonOpts {
    std::string config;
    std::string out;
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string seeds; // comma list for sweeps
    std::int64_t slots = 0;
    int jobs = 1;
};

std::vector<std::uint64_t> seed_list(const CommonOpts& opts) {
    std::vector<std::uint64_t> seeds;
    if (!opts.seeds.empty()) {
        std::stringstream ss(opts.seeds);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) seeds.push_back(std::stoull(tok));
        }
    }
    if (seeds.empty()) {
        if (!opts.seed_set) throw ConfigError("a --seed is required for stochastic commands");
        seeds.push_back(opts.seed);
    }
    return seeds;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_slots) {
    cmd->add_option("--config", opts.config, "JSON config file")->required();
    cmd->add_option("--out", opts.out, "output directory");
    cmd->add_option("--format", opts.format, "trace format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", opts.seed, "RNG seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--seeds", opts.seeds, "comma-separated seed sweep");
    cmd->add_option("--jobs", opts.jobs, "parallel sessions for seed sweeps")
        ->check(CLI::Range(1, 256));
    if (with_slots) cmd->add_option("--slots", opts.slots, "number of slots")->required();
}

template <typename RunFn>
void run_sweep(const CommonOpts& opts, RunFn&& run_one) {
    const std::vector<std::uint64_t> seeds = seed_list(opts);
    const bool multi = seeds.size() > 1;
    if (!multi || opts.jobs <= 1) {
        for (const std::uint64_t s : seeds) run_one(s, multi);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    for (int t = 0; t < opts.jobs; ++t) {
        pool.emplace_back([&] {
            while (true) {
                std::uint64_t s;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= seeds.size()) return;
                    s = seeds[next++];
                }
                run_one(s, true);
            }
        });
    }
    for (auto& t : pool) t.join();
}

int cmd_capacity(const std::string& config, const std::string& kind, double eps1, double eps2,
                 double p1, double p2) {
    WiretapChannel ch = [&] {
        if (!config.empty()) return channel_from_json(load_json(config));
        if (kind == "erasure") return WiretapChannel::erasure_pair(eps1, eps2);
        if (kind == "flip") return WiretapChannel::flip_pair(p1, p2);
        throw ConfigError("capacity: --channel must be erasure or flip (or use --config)");
    }();
    JsonWriter w;
    w.field("C", main_capacity(ch)).field("Cs", secrecy_capacity(ch));
    std::cout << w.str() << "\n";
    return 0;
}

int cmd_simulate(const CommonOpts& opts) {
    const nlohmann::json j = load_json(opts.config);
    const SchemeConfig cfg = scheme_config_from_json(j);
    std::optional<WiretapChannel> channel;
    if (j.contains("channel")) channel = channel_from_json(j["channel"]);
    if (cfg.channel_code.kind != ChannelCodeSpec::Kind::IdealBitPipe && !channel) {
        throw ConfigError("simulate: a channel is required for non-ideal transports");
    }

    run_sweep(opts, [&](std::uint64_t seed, bool multi) {
        const SessionReport report = channel ? run_session(cfg, *channel, opts.slots, seed)
                                             : run_session(cfg, opts.slots, seed);
        std::ostringstream trace;
        if (opts.format == "csv") {
            write_session_csv(trace, report);
        } else {
            write_session_json(trace, report);
        }
        const std::string summary = session_summary_json(report) + "\n";
        if (opts.out.empty()) {
            std::cout << summary;
            return;
        }
        const fs::path dir = prepare_out_dir(opts.out);
        const std::string stem = multi ? "session_" + std::to_string(seed) : "session";
        write_file(dir / (stem + (opts.format == "csv" ? ".csv" : ".json")), trace.str());
        write_file(dir / (stem + "_summary.json"), summary);
    });
    return 0;
}

int cmd_fading(const CommonOpts& opts) {
    const FadingConfig cfg = fading_config_from_json(load_json(opts.config));
    run_sweep(opts, [&](std::uint64_t seed, bool multi) {
        const FadingSessionReport report = simulate_fading_session(cfg, opts.slots, seed);
        std::ostringstream trace;
        if (opts.format == "csv") {
            write_fading_csv(trace, report);
        } else {
            write_fading_json(trace, report);
        }
        const std::string summary = fading_summary_json(report) + "\n";
        if (opts.out.empty()) {
            std::cout << summary;
            return;
        }
        const fs::path dir = prepare_out_dir(opts.out);
        const std::string stem = multi ? "fading_" + std::to_string(seed) : "fading";
        write_file(dir / (stem + (opts.format == "csv" ? ".csv" : ".json")), trace.str());
        write_file(dir / (stem + "_summary.json"), summary);
    });
    return 0;
}

int cmd_audit(const std::string& scenario_path, bool negative_control, const std::string& out) {
    AuditScenario scn = audit_scenario_from_json(load_json(scenario_path));
    if (negative_control) scn = make_negative_control(scn);
    const JointLeakageReport report = joint_leakage_exhaustive(scn);
    const BoundCheck check = leakage_bound_check(report);
    const double otp = otp_component_leakage(scn);
    const std::string text = audit_report_json(report, check, otp) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        const fs::path dir = prepare_out_dir(out);
        write_file(dir / "audit.json", text);
    }
    return 0;
}

int cmd_waterfill(const std::string& config) {
    const nlohmann::json j = load_json(config);
    const FadingDistribution dist = fading_distribution_from_json(j.at("dist"));
    const double pbar = j.at("pbar").get<double>();
    const double s1 = j.value("sigma1_sq", 1.0);
    const double s2 = j.value("sigma2_sq", 1.0);
    const PowerPolicy policy = water_fill(dist, pbar, s1);
    JsonWriter w;
    w.field("lambda", 1.0 / policy.water_level)
        .field("avg_power", policy.avg_power)
        .field("ergodic_rate", ergodic_main_rate(policy, dist))
        .field("no_csi_rate", no_csi_secrecy_rate(policy, dist, s2));
    std::cout << w.str() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"key-buffer wiretap coding simulator"};
    app.require_subcommand(1);

    // capacity
    auto* cap = app.add_subcommand("capacity", "single-letter capacities of a channel pair");
    std::string cap_config, cap_kind;
    double eps1 = 0, eps2 = 0, p1 = 0, p2 = 0;
    cap->add_option("--config", cap_config, "channel JSON file");
    cap->add_option("--channel", cap_kind, "erasure or flip");
    cap->add_option("--eps1", eps1, "Bob erasure probability");
    cap->add_option("--eps2", eps2, "Eve erasure probability");
    cap->add_option("--p1", p1, "Bob flip probability");
    cap->add_option("--p2", p2, "Eve flip probability");

    // simulate
    auto* sim = app.add_subcommand("simulate", "slotted key-buffer session on a static channel");
    CommonOpts sim_opts;
    add_common(sim, sim_opts, true);

    // fading
    auto* fad = app.add_subcommand("fading", "key-buffer session under block fading");
    CommonOpts fad_opts;
    add_common(fad, fad_opts, true);

    // audit
    auto* aud = app.add_subcommand("audit", "exact joint-leakage audit of a small scenario");
    std::string scenario_path, audit_out;
    bool negative = false;
    aud->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    aud->add_flag("--negative-control", negative, "rewrite the key schedule to a violating one");
    aud->add_option("--out", audit_out, "output directory");

    // waterfill
    auto* wf = app.add_subcommand("waterfill", "water-filling policy and ergodic rates");
    std::string wf_config;
    wf->add_option("--config", wf_config, "fading JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cap->parsed()) return cmd_capacity(cap_config, cap_kind, eps1, eps2, p1, p2);
        if (sim->parsed()) return cmd_simulate(sim_opts);
        if (fad->parsed()) return cmd_fading(fad_opts);
        if (aud->parsed()) return cmd_audit(scenario_path, negative, audit_out);
        if (wf->parsed()) return cmd_waterfill(wf_config);
    } catch (const BudgetError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
