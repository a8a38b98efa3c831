#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "beliefsim/belief_metrics.hpp"
#include "beliefsim/types.hpp"

namespace beliefsim::report {

// "***" p < 0.001, "**" p < 0.01, "*" p < 0.05, "" otherwise. Strict
// inequalities; throws on p outside (0, 1].
std::string significance_stars(double p);

// Locale-independent fixed 4-decimal rendering (the tables' precision).
std::string fixed4(double v);
// Shortest round-trip rendering (the machine-readable precision).
std::string full_precision(double v);

std::string p_with_stars(double p);              // "0.0000***"
std::string rho_with_stars(double rho, double p); // "0.3215***"
std::string mean_sd_cell(double mean, double sd); // "1.6004 (sd: 1.1442)"

// Row cells for the three tables; pinned formats.
std::string stage1_row(const std::string& model, double kl, double wasserstein,
                       double mwu_p);
std::string stage2_row(const std::string& model, double reference_rho,
                       double reference_p, double subject_rho, double subject_p,
                       double fisher_p);
std::string stage3_row(const std::string& model, const std::string& subject_cell,
                       const std::string& reference_cell,
                       const std::string& mwu_cell);

// Pretty tables (one comma-separated row per comparison, group averages
// appended per consecutive metadata.group block) and the parallel CSVs
// carrying full-precision columns.
std::string emit_stage1_table(std::span<const metrics::MetricReport> reports);
std::string emit_stage2_table(std::span<const metrics::MetricReport> reports);
std::string emit_stage3_table(std::span<const metrics::MetricReport> reports);
std::string emit_stage1_csv(std::span<const metrics::MetricReport> reports);
std::string emit_stage2_csv(std::span<const metrics::MetricReport> reports);
std::string emit_stage3_csv(std::span<const metrics::MetricReport> reports);

enum class HistogramKind { stage1, follow_signal, bnd };

std::string_view to_string(HistogramKind kind);

/// Writes hist_<label>_<kind>.csv (bin, count, proportion) and
/// raw_<label>_<kind>.csv (full-precision values) into out_dir. Ratings use
/// the five Likert bins; the continuous metrics use 20 bins over [0, 4].
/// Throws on an empty selection.
void export_histograms(const Cohort& cohort, HistogramKind kind,
                       const std::filesystem::path& out_dir);

struct ReportBundle {
  std::vector<metrics::MetricReport> comparisons;
  std::vector<std::string> formats = {"tables_text", "tables_csv", "histograms",
                                      "meta"};
  std::filesystem::path out_dir;
};

struct BundleOutcome {
  // (format, error) for each requested format that could not be produced
  std::vector<std::pair<std::string, std::string>> format_errors;
};

/// Writes stage1/2/3 tables (csv + text), per-cohort histograms, and
/// report_meta.json. A format that cannot be produced is recorded in the
/// outcome (and in report_meta.json) instead of aborting the bundle.
BundleOutcome write_bundle(const ReportBundle& bundle,
                           const std::vector<const Cohort*>& cohorts,
                           const std::map<std::string, std::string>& extra_meta = {});

}  // namespace beliefsim::report
