#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdlsim/channel.hpp"
#include "mdlsim/dsp.hpp"
#include "mdlsim/types.hpp"

namespace mdlsim {

/// Full description of a sweep experiment. Everything that influences the
/// numbers lives here; outputs are a pure function of this struct.
struct SweepConfig {
    std::uint64_t seed = 1;

    // link synthesis
    int sections = 16;
    double delay_spread_ps = 10.0;
    double lantern_mdl_spread_db = 4.0;
    ModeLayout layout{};
    int frequency_bins = 64;
    double symbol_rate_ghz = 25.0;

    // emulation
    std::vector<std::string> placements{"tx-side", "in-span"};
    int in_span_section = 8;
    double attenuation_base_db = 5.0;
    std::vector<double> ratio_grid_db{0, 2, 4, 6, 8, 10};

    // measurement
    std::vector<double> snr_grid_db{6, 8, 10, 12, 14, 16, 18, 20};
    double reference_snr_db = 37.0;
    int replicates = 10;
    int training_symbols = 16384;
    std::string aggregation = "rank-average";
    std::string clamp_policy = "clamp-to-floor";

    std::string output_dir = "mdlsim-out";

    LinkSpec link_spec(std::uint64_t channel_seed) const;
    std::vector<Placement> placement_list() const;
    void validate() const;
};

SweepConfig default_config();
SweepConfig config_from_json_text(const std::string& text);
SweepConfig config_from_json_file(const std::string& path);
std::string config_to_json_text(const SweepConfig& config);

/// FNV-1a hex digest of the canonical JSON form; stamped into outputs so a
/// result can be traced back to its exact configuration.
std::string config_hash_hex(const SweepConfig& config);

/// Lifecycle of one sweep measurement: infeasible rows never synthesize a
/// channel; failed rows synthesized one but the estimator threw (all bins
/// noise-dominated under skip-bin, or every bin ill-conditioned).
enum class CellStatus { Ok, Infeasible, Failed };

const char* to_string(CellStatus s);

/// One (placement, ratio, replicate) link measured at the reference SNR.
struct SweepReference {
    Placement placement{};
    double ratio_db = 0.0;
    int replicate = 0;
    std::uint64_t channel_seed = 0;
    std::uint64_t noise_seed = 0;
    CellStatus status = CellStatus::Ok;
    double true_mdl_db = 0.0;
    double mdl_uncorrected_db = 0.0;
    double mdl_corrected_db = 0.0;
    int failed_bins = 0;
    int clamped_values = 0;
};

/// One (placement, ratio, snr, replicate) measurement. Errors are
/// reference-estimate minus this estimate; positive = underestimation.
struct SweepCell {
    Placement placement{};
    double ratio_db = 0.0;
    double snr_db = 0.0;
    int replicate = 0;
    std::uint64_t channel_seed = 0;
    std::uint64_t noise_seed = 0;
    CellStatus status = CellStatus::Ok;
    double true_mdl_db = 0.0;
    double reference_mdl_db = 0.0;
    double mdl_uncorrected_db = 0.0;
    double mdl_corrected_db = 0.0;
    double error_uncorrected_db = 0.0;
    double error_corrected_db = 0.0;
    int failed_bins = 0;
    int clamped_values = 0;
};

struct SweepResult {
    SweepConfig config;
    std::string config_hash;
    std::vector<SweepReference> references;
    std::vector<SweepCell> cells;
};

/// Median-aggregated view of one (placement, ratio, snr) group.
struct SweepSummaryRow {
    Placement placement{};
    double ratio_db = 0.0;
    double snr_db = 0.0;
    int n = 0;
    double true_mdl_median_db = 0.0;
    double reference_mdl_median_db = 0.0;
    double error_uncorrected_median_db = 0.0;
    double error_corrected_median_db = 0.0;
};

/// Runs the sweep. `jobs` <= 0 picks the hardware thread count. Results are
/// identical for any job count; rows are computed from per-row seeds and
/// written back in deterministic order.
SweepResult run_sweep(const SweepConfig& config, int jobs = 0);

std::vector<SweepSummaryRow> summarize(const SweepResult& result);

/// True-MDL-versus-ratio study on the same channel population as the sweep
/// (no DSP chain). `replicates_override` > 0 raises the seed count.
struct MdlVsRatioPoint {
    Placement placement{};
    double ratio_db = 0.0;
    int replicate = 0;
    bool feasible = true;
    double true_mdl_db = 0.0;
};

struct MdlVsRatioResult {
    SweepConfig config;
    std::string config_hash;
    int replicates = 0;
    std::vector<MdlVsRatioPoint> points;
};

MdlVsRatioResult run_mdl_vs_ratio(const SweepConfig& config, int replicates_override = 0,
                                  int jobs = 0);

double median(std::vector<double> values);

// Emitters. All writes are deterministic: fixed column order, %.6g floats,
// no timestamps. Files land in `dir`, created if needed; each emitter
// returns the file names it wrote (relative to `dir`).
std::vector<std::string> emit_csv(const SweepResult& result, const std::string& dir);
std::vector<std::string> emit_heatmaps(const SweepResult& result, const std::string& dir);
std::vector<std::string> emit_mdl_vs_ratio(const MdlVsRatioResult& result,
                                           const std::string& dir);

/// Writes run_info.json: resolved config, config hash, tool version and the
/// list of produced files. Deterministic; no timestamps.
void write_run_info(const SweepConfig& config, const std::vector<std::string>& outputs,
                    const std::string& dir);

}  // namespace mdlsim
