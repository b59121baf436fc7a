#include "mdlsim/sweep.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

#include "mdlsim/mdl_core.hpp"
#include "mdlsim/rng.hpp"
#include "mdlsim/version.hpp"

namespace mdlsim {

namespace {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown config key: " + where + item.key());
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& value) {
    if (j.contains(key)) {
        try {
            value = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

Placement placement_from_string(const std::string& s) {
    if (s == "tx-side") return Placement::TxSide;
    if (s == "in-span") return Placement::InSpan;
    throw ConfigError("unknown placement: " + s);
}

/// Runs fn(0..n-1) on `jobs` threads; any exception cancels the remaining
/// work and is rethrown on the calling thread.
template <typename Fn>
void parallel_for_index(std::size_t n, int jobs, Fn&& fn) {
    int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto work = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                stop.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct Measurement {
    double uncorrected_db = 0.0;
    double corrected_db = 0.0;
    int failed_bins = 0;
    int clamped_values = 0;
};

struct RowResult {
    SweepReference reference;
    std::vector<SweepCell> cells;
};

/// One (placement, ratio, replicate) link: synthesize, emulate, then measure
/// at the reference SNR and at every grid SNR. The channel seed depends only
/// on (placement, replicate), so one drawn link is swept across ratios the
/// way a physical testbed reuses its fiber plant.
RowResult run_row(const SweepConfig& cfg, Placement placement, double ratio_db,
                  int replicate) {
    const std::uint64_t ptag = tag64(to_string(placement));
    const std::uint64_t rep = static_cast<std::uint64_t>(replicate);
    const std::uint64_t channel_seed = mix_seed({cfg.seed, tag64("channel"), ptag, rep});
    const std::uint64_t frames_seed = mix_seed({cfg.seed, tag64("frames"), ptag, rep});
    auto noise_seed = [&](double snr_db) {
        return mix_seed({cfg.seed, tag64("noise"), ptag, rep, bits64(ratio_db), bits64(snr_db)});
    };

    RowResult out;
    out.reference.placement = placement;
    out.reference.ratio_db = ratio_db;
    out.reference.replicate = replicate;
    out.reference.channel_seed = channel_seed;
    out.reference.noise_seed = noise_seed(cfg.reference_snr_db);

    auto make_cell = [&](double snr_db) {
        SweepCell c;
        c.placement = placement;
        c.ratio_db = ratio_db;
        c.snr_db = snr_db;
        c.replicate = replicate;
        c.channel_seed = channel_seed;
        c.noise_seed = noise_seed(snr_db);
        return c;
    };

    std::vector<double> attenuation;
    try {
        attenuation = constant_power_profile(ratio_db, cfg.attenuation_base_db,
                                             cfg.layout.mode_count());
    } catch (const InfeasibleProfileError&) {
        out.reference.status = CellStatus::Infeasible;
        for (double snr_db : cfg.snr_grid_db) {
            SweepCell c = make_cell(snr_db);
            c.status = CellStatus::Infeasible;
            out.cells.push_back(c);
        }
        return out;
    }

    EmulatorProfile emulator{placement, cfg.in_span_section, attenuation};
    const LinkRealization link = synthesize_link(cfg.link_spec(channel_seed));
    const ChannelSpectrum channel = normalize_gain(link.spectrum(emulator));

    const AggregationRule rule = aggregation_from_string(cfg.aggregation);
    const ClampPolicy policy = clamp_policy_from_string(cfg.clamp_policy);
    const double true_db = true_mdl(channel, rule).db;

    const FrameSet frames =
        generate_frames(cfg.layout, cfg.training_symbols, frames_seed);

    // A cell whose estimation throws (all bins rejected) is recorded as
    // failed, never fatal: long sweeps with skip-bin at low SNR lose cells,
    // not the run.
    auto measure = [&](double snr_db, std::uint64_t seed) -> std::optional<Measurement> {
        const SnrValue snr = SnrValue::from_db(snr_db);
        const ReceivedFrameSet rx = transmit(frames, channel, snr, seed);
        const EqualizerSolution eq = fit_equalizer(frames, rx, snr);
        try {
            const MdlEstimate est = estimate_mdl(eq, snr, rule, policy);
            return Measurement{est.uncorrected.db, est.corrected.db, est.failed_bins,
                               est.clamped_values};
        } catch (const EstimationError&) {
            return std::nullopt;
        } catch (const NoiseDominatedBin&) {
            return std::nullopt;  // strict policy with a noise-dominated bin
        }
    };

    const std::optional<Measurement> ref =
        measure(cfg.reference_snr_db, out.reference.noise_seed);
    out.reference.true_mdl_db = true_db;
    if (ref) {
        out.reference.mdl_uncorrected_db = ref->uncorrected_db;
        out.reference.mdl_corrected_db = ref->corrected_db;
        out.reference.failed_bins = ref->failed_bins;
        out.reference.clamped_values = ref->clamped_values;
    } else {
        out.reference.status = CellStatus::Failed;
    }

    for (double snr_db : cfg.snr_grid_db) {
        SweepCell c = make_cell(snr_db);
        c.true_mdl_db = true_db;
        const std::optional<Measurement> m =
            ref ? measure(snr_db, c.noise_seed) : std::nullopt;
        if (m) {
            c.reference_mdl_db = ref->uncorrected_db;
            c.mdl_uncorrected_db = m->uncorrected_db;
            c.mdl_corrected_db = m->corrected_db;
            c.error_uncorrected_db =
                estimation_error(MdlValue{ref->uncorrected_db}, MdlValue{m->uncorrected_db});
            c.error_corrected_db =
                estimation_error(MdlValue{ref->uncorrected_db}, MdlValue{m->corrected_db});
            c.failed_bins = m->failed_bins;
            c.clamped_values = m->clamped_values;
        } else {
            c.status = CellStatus::Failed;
        }
        out.cells.push_back(c);
    }
    return out;
}

}  // namespace

LinkSpec SweepConfig::link_spec(std::uint64_t channel_seed) const {
    LinkSpec spec;
    spec.sections = sections;
    spec.delay_spread_s = delay_spread_ps * 1e-12;
    spec.lantern_mdl_spread_db = lantern_mdl_spread_db;
    spec.seed = channel_seed;
    spec.layout = layout;
    spec.bins = frequency_bins;
    spec.symbol_rate_hz = symbol_rate_ghz * 1e9;
    return spec;
}

const char* to_string(CellStatus s) {
    switch (s) {
        case CellStatus::Ok: return "ok";
        case CellStatus::Infeasible: return "infeasible";
        case CellStatus::Failed: return "failed";
    }
    return "?";
}

std::vector<Placement> SweepConfig::placement_list() const {
    std::vector<Placement> out;
    out.reserve(placements.size());
    for (const std::string& p : placements) out.push_back(placement_from_string(p));
    return out;
}

void SweepConfig::validate() const {
    link_spec(seed).validate();
    if (placements.empty()) throw ConfigError("placements must be non-empty");
    const std::vector<Placement> list = placement_list();
    for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = i + 1; j < list.size(); ++j)
            if (list[i] == list[j]) throw ConfigError("duplicate placement");
    if (std::find(list.begin(), list.end(), Placement::InSpan) != list.end() &&
        (in_span_section < 1 || in_span_section >= sections))
        throw ConfigError("in_span_section must lie strictly inside the link");
    if (!(attenuation_base_db >= 0.0) || !std::isfinite(attenuation_base_db))
        throw ConfigError("attenuation_base_db must be finite and non-negative");
    if (ratio_grid_db.empty()) throw ConfigError("ratio_grid_db must be non-empty");
    for (double r : ratio_grid_db)
        if (!(r >= 0.0) || !std::isfinite(r))
            throw ConfigError("ratio grid entries must be finite and non-negative");
    if (snr_grid_db.empty()) throw ConfigError("snr_grid_db must be non-empty");
    double max_snr = snr_grid_db.front();
    for (double s : snr_grid_db) {
        if (!std::isfinite(s)) throw ConfigError("snr grid entries must be finite");
        max_snr = std::max(max_snr, s);
    }
    if (!(reference_snr_db > max_snr))
        throw ConfigError("reference_snr_db must exceed every grid SNR");
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    const int min_training =
        std::max(1024, 4 * layout.dimension() * frequency_bins);
    if (training_symbols < min_training)
        throw ConfigError("training_symbols must be at least " + std::to_string(min_training));
    aggregation_from_string(aggregation);
    clamp_policy_from_string(clamp_policy);
    if (output_dir.empty()) throw ConfigError("output_dir must be non-empty");
}

SweepConfig default_config() { return SweepConfig{}; }

SweepConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    require_keys(j,
                 {"schema_version", "seed", "link", "layout", "symbol_rate_ghz",
                  "frequency_bins", "placements", "in_span_section", "attenuation_base_db",
                  "ratio_grid_db", "snr_grid_db", "reference_snr_db", "replicates",
                  "training_symbols", "aggregation", "clamp_policy", "output_dir"},
                 "");
    int schema_version = 1;
    maybe(j, "schema_version", schema_version);
    if (schema_version != 1) throw ConfigError("unsupported schema_version");

    SweepConfig c;
    maybe(j, "seed", c.seed);
    if (j.contains("link")) {
        const json& l = j.at("link");
        require_keys(l, {"sections", "delay_spread_ps", "lantern_mdl_spread_db"}, "link.");
        maybe(l, "sections", c.sections);
        maybe(l, "delay_spread_ps", c.delay_spread_ps);
        maybe(l, "lantern_mdl_spread_db", c.lantern_mdl_spread_db);
    }
    if (j.contains("layout")) {
        const json& l = j.at("layout");
        require_keys(l, {"spatial_modes", "polarizations_per_mode"}, "layout.");
        maybe(l, "spatial_modes", c.layout.spatial_modes);
        maybe(l, "polarizations_per_mode", c.layout.polarizations_per_mode);
    }
    maybe(j, "symbol_rate_ghz", c.symbol_rate_ghz);
    maybe(j, "frequency_bins", c.frequency_bins);
    maybe(j, "placements", c.placements);
    maybe(j, "in_span_section", c.in_span_section);
    maybe(j, "attenuation_base_db", c.attenuation_base_db);
    maybe(j, "ratio_grid_db", c.ratio_grid_db);
    maybe(j, "snr_grid_db", c.snr_grid_db);
    maybe(j, "reference_snr_db", c.reference_snr_db);
    maybe(j, "replicates", c.replicates);
    maybe(j, "training_symbols", c.training_symbols);
    maybe(j, "aggregation", c.aggregation);
    maybe(j, "clamp_policy", c.clamp_policy);
    maybe(j, "output_dir", c.output_dir);
    c.validate();
    return c;
}

SweepConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

std::string config_to_json_text(const SweepConfig& c) {
    json j{{"schema_version", 1},
           {"seed", c.seed},
           {"link",
            {{"sections", c.sections},
             {"delay_spread_ps", c.delay_spread_ps},
             {"lantern_mdl_spread_db", c.lantern_mdl_spread_db}}},
           {"layout",
            {{"spatial_modes", c.layout.spatial_modes},
             {"polarizations_per_mode", c.layout.polarizations_per_mode}}},
           {"symbol_rate_ghz", c.symbol_rate_ghz},
           {"frequency_bins", c.frequency_bins},
           {"placements", c.placements},
           {"in_span_section", c.in_span_section},
           {"attenuation_base_db", c.attenuation_base_db},
           {"ratio_grid_db", c.ratio_grid_db},
           {"snr_grid_db", c.snr_grid_db},
           {"reference_snr_db", c.reference_snr_db},
           {"replicates", c.replicates},
           {"training_symbols", c.training_symbols},
           {"aggregation", c.aggregation},
           {"clamp_policy", c.clamp_policy},
           {"output_dir", c.output_dir}};
    return j.dump(2) + "\n";
}

std::string config_hash_hex(const SweepConfig& config) {
    const std::uint64_t h = tag64(config_to_json_text(config));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SweepResult run_sweep(const SweepConfig& config, int jobs) {
    config.validate();
    const std::vector<Placement> placements = config.placement_list();

    struct Task {
        Placement placement;
        double ratio_db;
        int replicate;
    };
    std::vector<Task> tasks;
    for (Placement p : placements)
        for (double r : config.ratio_grid_db)
            for (int rep = 0; rep < config.replicates; ++rep) tasks.push_back({p, r, rep});

    std::vector<RowResult> rows(tasks.size());
    parallel_for_index(tasks.size(), jobs, [&](std::size_t i) {
        rows[i] = run_row(config, tasks[i].placement, tasks[i].ratio_db, tasks[i].replicate);
    });

    SweepResult out;
    out.config = config;
    out.config_hash = config_hash_hex(config);
    out.references.reserve(rows.size());
    out.cells.reserve(rows.size() * config.snr_grid_db.size());
    for (const RowResult& row : rows) {
        out.references.push_back(row.reference);
        out.cells.insert(out.cells.end(), row.cells.begin(), row.cells.end());
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of nothing");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<SweepSummaryRow> summarize(const SweepResult& result) {
    const SweepConfig& cfg = result.config;
    std::vector<SweepSummaryRow> out;
    for (Placement p : cfg.placement_list())
        for (double ratio : cfg.ratio_grid_db)
            for (double snr : cfg.snr_grid_db) {
                std::vector<double> true_mdl, ref_mdl, err_unc, err_cor;
                for (const SweepCell& c : result.cells) {
                    if (c.placement != p || c.ratio_db != ratio || c.snr_db != snr ||
                        c.status != CellStatus::Ok)
                        continue;
                    true_mdl.push_back(c.true_mdl_db);
                    ref_mdl.push_back(c.reference_mdl_db);
                    err_unc.push_back(c.error_uncorrected_db);
                    err_cor.push_back(c.error_corrected_db);
                }
                if (true_mdl.empty()) continue;
                SweepSummaryRow row;
                row.placement = p;
                row.ratio_db = ratio;
                row.snr_db = snr;
                row.n = static_cast<int>(true_mdl.size());
                row.true_mdl_median_db = median(true_mdl);
                row.reference_mdl_median_db = median(ref_mdl);
                row.error_uncorrected_median_db = median(err_unc);
                row.error_corrected_median_db = median(err_cor);
                out.push_back(row);
            }
    return out;
}

MdlVsRatioResult run_mdl_vs_ratio(const SweepConfig& config, int replicates_override,
                                  int jobs) {
    config.validate();
    const int replicates = std::max(config.replicates, replicates_override);
    const std::vector<Placement> placements = config.placement_list();
    const AggregationRule rule = aggregation_from_string(config.aggregation);

    struct Task {
        Placement placement;
        int replicate;
    };
    std::vector<Task> tasks;
    for (Placement p : placements)
        for (int rep = 0; rep < replicates; ++rep) tasks.push_back({p, rep});

    // One link per (placement, replicate), swept across the ratio grid.
    std::vector<std::vector<MdlVsRatioPoint>> per_task(tasks.size());
    parallel_for_index(tasks.size(), jobs, [&](std::size_t i) {
        const Placement placement = tasks[i].placement;
        const int rep = tasks[i].replicate;
        const std::uint64_t channel_seed = mix_seed(
            {config.seed, tag64("channel"), tag64(to_string(placement)),
             static_cast<std::uint64_t>(rep)});
        const LinkRealization link = synthesize_link(config.link_spec(channel_seed));
        for (double ratio : config.ratio_grid_db) {
            MdlVsRatioPoint point;
            point.placement = placement;
            point.ratio_db = ratio;
            point.replicate = rep;
            try {
                const std::vector<double> att = constant_power_profile(
                    ratio, config.attenuation_base_db, config.layout.mode_count());
                const EmulatorProfile emulator{placement, config.in_span_section, att};
                point.true_mdl_db = true_mdl(link.spectrum(emulator), rule).db;
            } catch (const InfeasibleProfileError&) {
                point.feasible = false;
            }
            per_task[i].push_back(point);
        }
    });

    MdlVsRatioResult out;
    out.config = config;
    out.config_hash = config_hash_hex(config);
    out.replicates = replicates;
    // Reassemble placement-major, then ratio, then replicate.
    for (std::size_t p = 0; p < placements.size(); ++p)
        for (std::size_t r = 0; r < config.ratio_grid_db.size(); ++r)
            for (int rep = 0; rep < replicates; ++rep)
                out.points.push_back(per_task[p * replicates + rep][r]);
    return out;
}

}  // namespace mdlsim
