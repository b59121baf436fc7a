#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "mdlsim/channel.hpp"
#include "mdlsim/dsp.hpp"
#include "mdlsim/io.hpp"
#include "mdlsim/mdl_core.hpp"
#include "mdlsim/rng.hpp"
#include "mdlsim/sweep.hpp"
#include "mdlsim/version.hpp"

namespace {

using namespace mdlsim;

SweepConfig load_config(const std::string& path) {
    return path.empty() ? default_config() : config_from_json_file(path);
}

void apply_overrides(SweepConfig& cfg, const std::string& out_dir, bool seed_set,
                     std::uint64_t seed) {
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_set) cfg.seed = seed;
    cfg.validate();
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, bool seed_set,
              std::uint64_t seed, int jobs) {
    SweepConfig cfg = load_config(config_path);
    apply_overrides(cfg, out_dir, seed_set, seed);

    const SweepResult result = run_sweep(cfg, jobs);
    std::vector<std::string> outputs = emit_csv(result, cfg.output_dir);
    for (const std::string& f : emit_heatmaps(result, cfg.output_dir)) outputs.push_back(f);
    write_run_info(cfg, outputs, cfg.output_dir);

    std::printf("sweep %s: %zu links, %zu cells -> %s\n", config_hash_hex(cfg).c_str(),
                result.references.size(), result.cells.size(), cfg.output_dir.c_str());
    for (const SweepSummaryRow& row : summarize(result))
        std::printf("  %-7s ratio %4.3g dB  snr %4.3g dB  true %6.2f dB  "
                    "err unc %+6.2f dB  err cor %+6.2f dB\n",
                    to_string(row.placement), row.ratio_db, row.snr_db,
                    row.true_mdl_median_db, row.error_uncorrected_median_db,
                    row.error_corrected_median_db);
    return 0;
}

int cmd_mdl_vs_ratio(const std::string& config_path, const std::string& out_dir,
                     bool seed_set, std::uint64_t seed, int replicates, int jobs) {
    SweepConfig cfg = load_config(config_path);
    apply_overrides(cfg, out_dir, seed_set, seed);

    const MdlVsRatioResult result = run_mdl_vs_ratio(cfg, replicates, jobs);
    const std::vector<std::string> outputs = emit_mdl_vs_ratio(result, cfg.output_dir);
    write_run_info(cfg, outputs, cfg.output_dir);
    std::printf("mdl-vs-ratio %s: %d links per placement -> %s\n",
                config_hash_hex(cfg).c_str(), result.replicates, cfg.output_dir.c_str());
    return 0;
}

int cmd_synth(const std::string& config_path, bool seed_set, std::uint64_t seed,
              const std::string& placement, double ratio_db, const std::string& out_file) {
    SweepConfig cfg = load_config(config_path);
    apply_overrides(cfg, "", seed_set, seed);

    const LinkRealization link = synthesize_link(cfg.link_spec(cfg.seed));
    ChannelSpectrum channel;
    if (placement == "none") {
        channel = link.spectrum();
    } else {
        const std::vector<double> att = constant_power_profile(
            ratio_db, cfg.attenuation_base_db, cfg.layout.mode_count());
        const Placement p =
            placement == "tx-side" ? Placement::TxSide : Placement::InSpan;
        channel = link.spectrum(EmulatorProfile{p, cfg.in_span_section, att});
    }
    channel = normalize_gain(channel);
    save_channel(channel, out_file);
    std::printf("synthesized %s: %d bins, %d channels, true MDL %.4f dB -> %s\n",
                placement.c_str(), channel.bin_count(), channel.dimension(),
                true_mdl(channel).db, out_file.c_str());
    return 0;
}

int cmd_analyze(const std::string& file, double snr_db, const std::string& aggregation,
                const std::string& clamp, bool as_json, const std::string& save_eq) {
    const ChannelSpectrum channel = load_channel(file);
    const SnrValue snr = SnrValue::from_db(snr_db);
    const AggregationRule rule = aggregation_from_string(aggregation);
    const ClampPolicy policy = clamp_policy_from_string(clamp);

    const double truth = true_mdl(channel, rule).db;
    const EqualizerSolution eq = wiener_equalizer(channel, snr);
    const MdlEstimate est = estimate_mdl(eq, snr, rule, policy);
    if (!save_eq.empty()) save_equalizer(eq, save_eq);

    if (as_json) {
        nlohmann::json j{{"file", file},
                         {"snr_db", snr_db},
                         {"aggregation", aggregation},
                         {"clamp_policy", clamp},
                         {"true_mdl_db", truth},
                         {"mdl_uncorrected_db", est.uncorrected.db},
                         {"mdl_corrected_db", est.corrected.db},
                         {"error_uncorrected_db", truth - est.uncorrected.db},
                         {"error_corrected_db", truth - est.corrected.db},
                         {"failed_bins", est.failed_bins},
                         {"clamped_values", est.clamped_values}};
        std::printf("%s\n", j.dump(2).c_str());
    } else {
        std::printf("channel: %d bins, %d channels\n", channel.bin_count(),
                    channel.dimension());
        std::printf("true MDL        %8.4f dB\n", truth);
        std::printf("at %.6g dB SNR (%s, %s):\n", snr_db, aggregation.c_str(), clamp.c_str());
        std::printf("  uncorrected   %8.4f dB (error %+.4f dB)\n", est.uncorrected.db,
                    truth - est.uncorrected.db);
        std::printf("  corrected     %8.4f dB (error %+.4f dB)\n", est.corrected.db,
                    truth - est.corrected.db);
        std::printf("  failed bins %d, clamped values %d\n", est.failed_bins,
                    est.clamped_values);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-resolved MDL estimation sweeps over emulated SDM links"};
    app.set_version_flag("--version", mdlsim::kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, placement = "none", analyze_file, save_eq;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0, replicates = 0;
    double ratio_db = 0.0, snr_db = 20.0;
    std::string aggregation = "rank-average", clamp = "clamp-to-floor", out_file;
    bool as_json = false;

    auto add_common = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--config", config_path, "JSON config file (defaults when omitted)");
        if (with_out) cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--seed", seed, "base seed override")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--jobs", jobs, "worker threads (0 = all cores)");
    };

    CLI::App* sweep = app.add_subcommand("sweep", "run the full estimation-error sweep");
    add_common(sweep, true);

    CLI::App* ratio_cmd =
        app.add_subcommand("mdl-vs-ratio", "true-MDL-vs-ratio study of the link population");
    add_common(ratio_cmd, true);
    ratio_cmd->add_option("--replicates", replicates, "links per placement (raises config)");

    CLI::App* synth = app.add_subcommand("synth", "synthesize one link and save its spectrum");
    add_common(synth, false);
    synth->add_option("--placement", placement, "none | tx-side | in-span")
        ->check(CLI::IsMember({"none", "tx-side", "in-span"}));
    synth->add_option("--ratio", ratio_db, "attenuation ratio in dB");
    synth->add_option("out_file", out_file, "destination container")->required();

    CLI::App* analyze =
        app.add_subcommand("analyze", "estimate MDL of a saved channel spectrum");
    analyze->add_option("file", analyze_file, "channel container")->required();
    analyze->add_option("--snr", snr_db, "measurement SNR in dB");
    analyze->add_option("--aggregation", aggregation, "rank-average | per-bin-mean-mdl | worst-bin");
    analyze->add_option("--clamp", clamp, "strict | clamp-to-floor | skip-bin");
    analyze->add_flag("--json", as_json, "machine-readable output");
    analyze->add_option("--save-equalizer", save_eq, "save the equalizer container");

    CLI::App* print_config =
        app.add_subcommand("print-config", "print the resolved configuration");
    print_config->add_option("--config", config_path, "JSON config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir, seed_set, seed, jobs);
        if (ratio_cmd->parsed())
            return cmd_mdl_vs_ratio(config_path, out_dir, seed_set, seed, replicates, jobs);
        if (synth->parsed())
            return cmd_synth(config_path, seed_set, seed, placement, ratio_db, out_file);
        if (analyze->parsed())
            return cmd_analyze(analyze_file, snr_db, aggregation, clamp, as_json, save_eq);
        if (print_config->parsed()) {
            std::printf("%s", config_to_json_text(load_config(config_path)).c_str());
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
