#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "mdlsim/sweep.hpp"
#include "mdlsim/version.hpp"
#include "svg.hpp"

namespace mdlsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write: " + path.string());
}

std::string sweep_csv(const SweepResult& result) {
    std::string out =
        "kind,placement,ratio_db,snr_db,replicate,channel_seed,noise_seed,status,"
        "true_mdl_db,reference_mdl_db,mdl_uncorrected_db,mdl_corrected_db,"
        "error_uncorrected_db,error_corrected_db,failed_bins,clamped_values\n";
    for (const SweepReference& r : result.references) {
        out += "reference,";
        out += to_string(r.placement);
        out += ',' + fmt(r.ratio_db) + ',' + fmt(result.config.reference_snr_db) + ',' +
               std::to_string(r.replicate) + ',' + std::to_string(r.channel_seed) + ',' +
               std::to_string(r.noise_seed) + ',';
        if (r.status == CellStatus::Infeasible) {
            out += "infeasible,,,,,,,,\n";
            continue;
        }
        if (r.status == CellStatus::Failed) {
            out += "failed," + fmt(r.true_mdl_db) + ",,,,,,,\n";
            continue;
        }
        out += "ok," + fmt(r.true_mdl_db) + ",," + fmt(r.mdl_uncorrected_db) + ',' +
               fmt(r.mdl_corrected_db) + ",,," + std::to_string(r.failed_bins) + ',' +
               std::to_string(r.clamped_values) + '\n';
    }
    for (const SweepCell& c : result.cells) {
        out += "cell,";
        out += to_string(c.placement);
        out += ',' + fmt(c.ratio_db) + ',' + fmt(c.snr_db) + ',' +
               std::to_string(c.replicate) + ',' + std::to_string(c.channel_seed) + ',' +
               std::to_string(c.noise_seed) + ',';
        if (c.status == CellStatus::Infeasible) {
            out += "infeasible,,,,,,,,\n";
            continue;
        }
        if (c.status == CellStatus::Failed) {
            out += "failed," + fmt(c.true_mdl_db) + ",,,,,,,\n";
            continue;
        }
        out += "ok," + fmt(c.true_mdl_db) + ',' + fmt(c.reference_mdl_db) + ',' +
               fmt(c.mdl_uncorrected_db) + ',' + fmt(c.mdl_corrected_db) + ',' +
               fmt(c.error_uncorrected_db) + ',' + fmt(c.error_corrected_db) + ',' +
               std::to_string(c.failed_bins) + ',' + std::to_string(c.clamped_values) + '\n';
    }
    return out;
}

std::string summary_csv(const std::vector<SweepSummaryRow>& rows) {
    std::string out =
        "placement,ratio_db,snr_db,n,true_mdl_median_db,reference_mdl_median_db,"
        "error_uncorrected_median_db,error_corrected_median_db\n";
    for (const SweepSummaryRow& r : rows) {
        out += to_string(r.placement);
        out += ',' + fmt(r.ratio_db) + ',' + fmt(r.snr_db) + ',' + std::to_string(r.n) + ',' +
               fmt(r.true_mdl_median_db) + ',' + fmt(r.reference_mdl_median_db) + ',' +
               fmt(r.error_uncorrected_median_db) + ',' + fmt(r.error_corrected_median_db) +
               '\n';
    }
    return out;
}

std::string heatmap_svg(const SweepResult& result, Placement placement, bool corrected,
                        const std::vector<SweepSummaryRow>& summary, double vmax) {
    const SweepConfig& cfg = result.config;
    const int cols = static_cast<int>(cfg.snr_grid_db.size());
    const int rows = static_cast<int>(cfg.ratio_grid_db.size());

    const double cell_w = 64, cell_h = 34;
    const double left = 150, top = 64, bottom = 52, right = 104;
    const double width = left + cols * cell_w + right;
    const double height = top + rows * cell_h + bottom;
    SvgCanvas svg(width, height);

    const std::string variant = corrected ? "corrected" : "uncorrected";
    svg.text(left, 26, std::string(to_string(placement)) + " emulation: median " + variant +
                           " MDL estimation error (dB)",
             14, "start", "#222222", true);
    svg.text(left, 44,
             "reference SNR " + fmt(cfg.reference_snr_db) + " dB, " +
                 std::to_string(cfg.replicates) + " replicates, positive = underestimated",
             11, "start", "#666666");

    svg.text(14, top - 10, "ratio dB", 11, "start", "#444444", true);
    svg.text(78, top - 10, "true dB", 11, "start", "#444444", true);

    // Rows run bottom-up: the largest ratio (largest MDL) sits on top.
    for (int ri = 0; ri < rows; ++ri) {
        const double ratio = cfg.ratio_grid_db[ri];
        const double y = top + (rows - 1 - ri) * cell_h;
        svg.text(14, y + cell_h / 2 + 4, fmt(ratio), 11, "start", "#444444");

        bool have_true = false;
        double true_med = 0.0;
        for (int ci = 0; ci < cols; ++ci) {
            const double snr = cfg.snr_grid_db[ci];
            const SweepSummaryRow* row = nullptr;
            for (const SweepSummaryRow& s : summary)
                if (s.placement == placement && s.ratio_db == ratio && s.snr_db == snr) {
                    row = &s;
                    break;
                }
            const double x = left + ci * cell_w;
            if (!row) {
                svg.rect(x, y, cell_w, cell_h, "#dddddd", "#ffffff");
                svg.text(x + cell_w / 2, y + cell_h / 2 + 4, "n/a", 11, "middle", "#777777");
                continue;
            }
            if (!have_true) {
                true_med = row->true_mdl_median_db;
                have_true = true;
            }
            const double v = corrected ? row->error_corrected_median_db
                                       : row->error_uncorrected_median_db;
            svg.rect(x, y, cell_w, cell_h, diverging_color(v, vmax), "#ffffff");
            const bool hot = std::abs(v) > 0.55 * vmax;
            char label[16];
            std::snprintf(label, sizeof(label), "%.2f", v);
            svg.text(x + cell_w / 2, y + cell_h / 2 + 4, label, 11, "middle",
                     hot ? "#ffffff" : "#222222");
        }
        if (have_true) {
            char label[16];
            std::snprintf(label, sizeof(label), "%.2f", true_med);
            svg.text(78, y + cell_h / 2 + 4, label, 11, "start", "#444444");
        } else {
            svg.text(78, y + cell_h / 2 + 4, "n/a", 11, "start", "#777777");
        }
    }

    for (int ci = 0; ci < cols; ++ci)
        svg.text(left + ci * cell_w + cell_w / 2, top + rows * cell_h + 18,
                 fmt(cfg.snr_grid_db[ci]), 11, "middle", "#444444");
    svg.text(left + cols * cell_w / 2, top + rows * cell_h + 38, "SNR (dB)", 12, "middle",
             "#222222");

    // Colour bar, +vmax on top.
    const double bar_x = left + cols * cell_w + 28, bar_w = 16, bar_h = rows * cell_h;
    const int steps = 24;
    for (int i = 0; i < steps; ++i) {
        const double v = vmax - (2.0 * vmax) * (i + 0.5) / steps;
        svg.rect(bar_x, top + bar_h * i / steps, bar_w, bar_h / steps + 0.5,
                 diverging_color(v, vmax));
    }
    svg.text(bar_x + bar_w / 2, top - 10, "ref-est", 10, "middle", "#444444");
    char tick[16];
    std::snprintf(tick, sizeof(tick), "%+.2g", vmax);
    svg.text(bar_x + bar_w + 6, top + 5, tick, 10, "start", "#444444");
    svg.text(bar_x + bar_w + 6, top + bar_h / 2 + 4, "0", 10, "start", "#444444");
    std::snprintf(tick, sizeof(tick), "%+.2g", -vmax);
    svg.text(bar_x + bar_w + 6, top + bar_h + 2, tick, 10, "start", "#444444");

    return svg.finish();
}

std::string mdl_vs_ratio_csv(const MdlVsRatioResult& result) {
    std::string out = "kind,placement,ratio_db,replicate,status,true_mdl_db\n";
    for (const MdlVsRatioPoint& p : result.points) {
        out += "point,";
        out += to_string(p.placement);
        out += ',' + fmt(p.ratio_db) + ',' + std::to_string(p.replicate) + ',';
        out += p.feasible ? "ok," + fmt(p.true_mdl_db) : std::string("infeasible,");
        out += '\n';
    }
    for (Placement placement : result.config.placement_list())
        for (double ratio : result.config.ratio_grid_db) {
            std::vector<double> values;
            for (const MdlVsRatioPoint& p : result.points)
                if (p.placement == placement && p.ratio_db == ratio && p.feasible)
                    values.push_back(p.true_mdl_db);
            if (values.empty()) continue;
            out += "median,";
            out += to_string(placement);
            out += ',' + fmt(ratio) + ",,ok," + fmt(median(values)) + '\n';
        }
    return out;
}

std::string mdl_vs_ratio_svg(const MdlVsRatioResult& result) {
    const SweepConfig& cfg = result.config;
    const double width = 640, height = 420;
    const double left = 62, right = 24, top = 46, bottom = 50;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    double ratio_min = cfg.ratio_grid_db.front(), ratio_max = cfg.ratio_grid_db.front();
    for (double r : cfg.ratio_grid_db) {
        ratio_min = std::min(ratio_min, r);
        ratio_max = std::max(ratio_max, r);
    }
    const double ratio_pad = std::max(0.5, 0.04 * (ratio_max - ratio_min));
    double mdl_max = 1.0;
    for (const MdlVsRatioPoint& p : result.points)
        if (p.feasible) mdl_max = std::max(mdl_max, p.true_mdl_db);
    const double y_max = std::ceil(mdl_max) + 1.0;

    auto x_of = [&](double ratio) {
        return left + plot_w * (ratio - ratio_min + ratio_pad) /
                          (ratio_max - ratio_min + 2 * ratio_pad);
    };
    auto y_of = [&](double mdl) { return top + plot_h * (1.0 - mdl / y_max); };

    SvgCanvas svg(width, height);
    svg.text(left, 24, "Peak-to-peak MDL vs attenuation ratio", 14, "start", "#222222", true);
    svg.text(left, 40,
             std::to_string(result.replicates) + " links per placement, markers = links, " +
                 "lines = medians",
             11, "start", "#666666");

    const double y_step = y_max > 16 ? 4.0 : 2.0;
    for (double yv = 0.0; yv <= y_max + 1e-9; yv += y_step) {
        svg.line(left, y_of(yv), left + plot_w, y_of(yv), "#eeeeee");
        svg.text(left - 8, y_of(yv) + 4, fmt(yv), 10, "end", "#444444");
    }
    for (double ratio : cfg.ratio_grid_db) {
        svg.line(x_of(ratio), top, x_of(ratio), top + plot_h, "#f4f4f4");
        svg.text(x_of(ratio), top + plot_h + 16, fmt(ratio), 10, "middle", "#444444");
    }
    svg.line(left, top, left, top + plot_h, "#999999");
    svg.line(left, top + plot_h, left + plot_w, top + plot_h, "#999999");
    svg.text(left + plot_w / 2, height - 12, "attenuation ratio (dB)", 12, "middle", "#222222");
    svg.text(14, top - 10, "MDL (dB)", 11, "start", "#444444");

    const std::vector<Placement> placements = cfg.placement_list();
    for (std::size_t pi = 0; pi < placements.size(); ++pi) {
        const Placement placement = placements[pi];
        const std::string color = placement == Placement::TxSide ? "#2166ac" : "#b2182c";
        for (const MdlVsRatioPoint& p : result.points)
            if (p.placement == placement && p.feasible)
                svg.circle(x_of(p.ratio_db), y_of(p.true_mdl_db), 2.5, color, 0.35);
        std::vector<std::pair<double, double>> line;
        for (double ratio : cfg.ratio_grid_db) {
            std::vector<double> values;
            for (const MdlVsRatioPoint& p : result.points)
                if (p.placement == placement && p.ratio_db == ratio && p.feasible)
                    values.push_back(p.true_mdl_db);
            if (!values.empty()) line.emplace_back(x_of(ratio), y_of(median(values)));
        }
        svg.polyline(line, color, 2.0);
        for (const auto& pt : line) svg.circle(pt.first, pt.second, 3.0, color);

        const double ly = top + 14 + 16 * static_cast<double>(pi);
        svg.line(left + 12, ly - 4, left + 36, ly - 4, color, 2.0);
        svg.text(left + 42, ly, to_string(placement), 11, "start", "#222222");
    }
    return svg.finish();
}

}  // namespace

std::vector<std::string> emit_csv(const SweepResult& result, const std::string& dir) {
    write_file(dir, "sweep.csv", sweep_csv(result));
    write_file(dir, "summary.csv", summary_csv(summarize(result)));
    return {"sweep.csv", "summary.csv"};
}

std::vector<std::string> emit_heatmaps(const SweepResult& result, const std::string& dir) {
    const std::vector<SweepSummaryRow> summary = summarize(result);
    double vmax = 0.5;
    for (const SweepSummaryRow& s : summary) {
        vmax = std::max(vmax, std::abs(s.error_uncorrected_median_db));
        vmax = std::max(vmax, std::abs(s.error_corrected_median_db));
    }
    vmax = std::ceil(vmax * 2.0) / 2.0;  // shared scale, rounded to 0.5 dB

    std::vector<std::string> names;
    for (Placement placement : result.config.placement_list())
        for (bool corrected : {false, true}) {
            const std::string name = std::string("heatmap_") + to_string(placement) + "_" +
                                     (corrected ? "corrected" : "uncorrected") + ".svg";
            write_file(dir, name, heatmap_svg(result, placement, corrected, summary, vmax));
            names.push_back(name);
        }
    return names;
}

std::vector<std::string> emit_mdl_vs_ratio(const MdlVsRatioResult& result,
                                           const std::string& dir) {
    write_file(dir, "mdl_vs_ratio.csv", mdl_vs_ratio_csv(result));
    write_file(dir, "mdl_vs_ratio.svg", mdl_vs_ratio_svg(result));
    return {"mdl_vs_ratio.csv", "mdl_vs_ratio.svg"};
}

void write_run_info(const SweepConfig& config, const std::vector<std::string>& outputs,
                    const std::string& dir) {
    json info{{"schema_version", 1},
              {"tool", "mdlsim"},
              {"tool_version", kVersion},
              {"config_hash", config_hash_hex(config)},
              {"config", json::parse(config_to_json_text(config))},
              {"outputs", outputs}};
    write_file(dir, "run_info.json", info.dump(2) + "\n");
}

}  // namespace mdlsim
