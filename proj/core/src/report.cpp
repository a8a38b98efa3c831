#include "beliefsim/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace beliefsim::report {

using metrics::MetricReport;
using nlohmann::json;

std::string significance_stars(double p) {
  if (!(p > 0.0) || p > 1.0)
    throw std::invalid_argument("significance_stars: p must be in (0, 1]");
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::string fixed4(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v,
                                 std::chars_format::fixed, 4);
  if (ec != std::errc{}) throw std::runtime_error("fixed4: format failed");
  std::string out(buf, end);
  if (out == "-0.0000") out = "0.0000";
  return out;
}

std::string full_precision(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("full_precision: format failed");
  return std::string(buf, end);
}

std::string p_with_stars(double p) { return fixed4(p) + significance_stars(p); }

std::string rho_with_stars(double rho, double p) {
  return fixed4(rho) + significance_stars(p);
}

std::string mean_sd_cell(double mean, double sd) {
  return fixed4(mean) + " (sd: " + fixed4(sd) + ")";
}

std::string stage1_row(const std::string& model, double kl, double wasserstein,
                       double mwu_p) {
  return model + ", " + fixed4(kl) + ", " + fixed4(wasserstein) + ", " +
         p_with_stars(mwu_p);
}

std::string stage2_row(const std::string& model, double reference_rho,
                       double reference_p, double subject_rho, double subject_p,
                       double fisher_p) {
  return model + ", " + rho_with_stars(reference_rho, reference_p) + " | " +
         rho_with_stars(subject_rho, subject_p) + " | " + p_with_stars(fisher_p);
}

std::string stage3_row(const std::string& model, const std::string& subject_cell,
                       const std::string& reference_cell,
                       const std::string& mwu_cell) {
  return model + ", " + subject_cell + ", " + reference_cell + ", " + mwu_cell;
}

namespace {

constexpr const char* kNa = "N/A";

// Consecutive reports sharing metadata.group form one block; each block with
// at least one row gets an average row appended.
std::vector<std::pair<std::size_t, std::size_t>> group_blocks(
    std::span<const MetricReport> reports) {
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= reports.size(); ++i) {
    if (i == reports.size() ||
        reports[i].metadata.group != reports[start].metadata.group) {
      blocks.emplace_back(start, i);
      start = i;
    }
  }
  return blocks;
}

struct Averager {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  std::string cell() const {
    return n == 0 ? std::string(kNa) : fixed4(sum / static_cast<double>(n));
  }
};

std::string average_label(const std::string& group) {
  return group.empty() ? "Average" : group + " Average";
}

void require_reports(std::span<const MetricReport> reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to emit");
}

}  // namespace

std::string emit_stage1_table(std::span<const MetricReport> reports) {
  require_reports(reports);
  std::string out = "Model, KL Divergence, Wasserstein Dist, Mann-Whitney U p-value\n";
  for (const auto& [begin, end] : group_blocks(reports)) {
    Averager kl_avg, w_avg;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& r = reports[i];
      const auto& s1 = r.stage1;
      std::string row = r.labels.first;
      row += ", ";
      row += s1.kl.ok() ? fixed4(*s1.kl) : kNa;
      row += ", ";
      row += s1.wasserstein.ok() ? fixed4(*s1.wasserstein) : kNa;
      row += ", ";
      row += s1.mwu.ok() ? p_with_stars(s1.mwu->p_value) : kNa;
      out += row + "\n";
      if (s1.kl.ok() && std::isfinite(*s1.kl)) kl_avg.add(*s1.kl);
      if (s1.wasserstein.ok()) w_avg.add(*s1.wasserstein);
    }
    out += average_label(reports[begin].metadata.group) + ", " + kl_avg.cell() +
           ", " + w_avg.cell() + ",\n";
  }
  return out;
}

std::string emit_stage2_table(std::span<const MetricReport> reports) {
  require_reports(reports);
  std::string out =
      "Model, Actual Social Influence (Spearman), "
      "LLM Social Influence (Spearman), Fisher p-value\n";
  for (const auto& [begin, end] : group_blocks(reports)) {
    Averager ref_avg, subj_avg, fisher_avg;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s2 = reports[i].stage2;
      std::string row = reports[i].labels.first;
      row += ", ";
      if (s2.reference_social_influence.ok()) {
        const auto& c = *s2.reference_social_influence;
        row += rho_with_stars(c.rho, c.test.p_value);
        ref_avg.add(c.rho);
      } else {
        row += kNa;
      }
      row += " | ";
      if (s2.subject_social_influence.ok()) {
        const auto& c = *s2.subject_social_influence;
        row += rho_with_stars(c.rho, c.test.p_value);
        subj_avg.add(c.rho);
      } else {
        row += kNa;
      }
      row += " | ";
      if (s2.fisher.ok()) {
        row += p_with_stars(s2.fisher->p_value);
        fisher_avg.add(s2.fisher->p_value);
      } else {
        row += kNa;
      }
      out += row + "\n";
    }
    out += average_label(reports[begin].metadata.group) + ", " + ref_avg.cell() +
           " | " + subj_avg.cell() + " | " + fisher_avg.cell() + "\n";
  }
  return out;
}

std::string emit_stage3_table(std::span<const MetricReport> reports) {
  require_reports(reports);
  std::string out =
      "Model, Mean LLM Belief Network Distance, "
      "Mean Human Belief Network Distance, MWU p-value\n";
  for (const auto& [begin, end] : group_blocks(reports)) {
    Averager subj_avg, ref_avg;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s3 = reports[i].stage3;
      std::string subj_cell(kNa), ref_cell(kNa), mwu_cell(kNa);
      if (s3.subject_bnd.ok()) {
        subj_cell = mean_sd_cell(s3.subject_bnd->mean, s3.subject_bnd->stddev);
        subj_avg.add(s3.subject_bnd->mean);
      }
      if (s3.reference_bnd.ok()) {
        ref_cell = mean_sd_cell(s3.reference_bnd->mean, s3.reference_bnd->stddev);
        ref_avg.add(s3.reference_bnd->mean);
      }
      if (s3.bnd_mwu.ok()) mwu_cell = p_with_stars(s3.bnd_mwu->p_value);
      out += stage3_row(reports[i].labels.first, subj_cell, ref_cell, mwu_cell) + "\n";
    }
    out += average_label(reports[begin].metadata.group) + ", " + subj_avg.cell() +
           ", " + ref_avg.cell() + ",\n";
  }
  return out;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string emit_stage1_csv(std::span<const MetricReport> reports) {
  require_reports(reports);
  std::string out =
      "model,group,n_aligned,kl,wasserstein,mwu_p,mwu_stars,"
      "spearman_rho,spearman_p,subject_mean,subject_sd,reference_mean,"
      "reference_sd,kl_full,wasserstein_full,mwu_p_full\n";
  for (const auto& r : reports) {
    const auto& s1 = r.stage1;
    std::vector<std::string> cells;
    cells.push_back(csv_escape(r.labels.first));
    cells.push_back(csv_escape(r.metadata.group));
    cells.push_back(std::to_string(s1.n_aligned));
    cells.push_back(s1.kl.ok() ? fixed4(*s1.kl) : kNa);
    cells.push_back(s1.wasserstein.ok() ? fixed4(*s1.wasserstein) : kNa);
    cells.push_back(s1.mwu.ok() ? fixed4(s1.mwu->p_value) : kNa);
    cells.push_back(s1.mwu.ok() ? significance_stars(s1.mwu->p_value) : kNa);
    cells.push_back(s1.spearman.ok() ? fixed4(s1.spearman->rho) : kNa);
    cells.push_back(s1.spearman.ok() ? fixed4(s1.spearman->test.p_value) : kNa);
    cells.push_back(s1.subject_mean_std.ok() ? fixed4(s1.subject_mean_std->mean)
                                             : kNa);
    cells.push_back(s1.subject_mean_std.ok()
                        ? fixed4(s1.subject_mean_std->stddev)
                        : kNa);
    cells.push_back(s1.reference_mean_std.ok()
                        ? fixed4(s1.reference_mean_std->mean)
                        : kNa);
    cells.push_back(s1.reference_mean_std.ok()
                        ? fixed4(s1.reference_mean_std->stddev)
                        : kNa);
    cells.push_back(s1.kl.ok() ? full_precision(*s1.kl) : kNa);
    cells.push_back(s1.wasserstein.ok() ? full_precision(*s1.wasserstein) : kNa);
    cells.push_back(s1.mwu.ok() ? full_precision(s1.mwu->p_value) : kNa);
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) row += ',';
      row += cells[i];
    }
    out += row + "\n";
  }
  return out;
}

std::string emit_stage2_csv(std::span<const MetricReport> reports) {
  require_reports(reports);
  std::string out =
      "model,group,n_aligned,reference_influence_rho,reference_influence_p,"
      "subject_influence_rho,subject_influence_p,fisher_z,fisher_p,"
      "subject_belief_change_mean,subject_belief_change_sd,"
      "reference_belief_change_mean,reference_belief_change_sd,"
      "belief_change_spearman_rho,belief_change_spearman_p,"
      "reference_influence_rho_full,subject_influence_rho_full,fisher_p_full\n";
  for (const auto& r : reports) {
    const auto& s2 = r.stage2;
    auto corr_rho = [](const metrics::Metric<stats::Correlation>& m) {
      return m.ok() ? fixed4(m->rho) : std::string(kNa);
    };
    auto corr_p = [](const metrics::Metric<stats::Correlation>& m) {
      return m.ok() ? fixed4(m->test.p_value) : std::string(kNa);
    };
    std::vector<std::string> cells;
    cells.push_back(csv_escape(r.labels.first));
    cells.push_back(csv_escape(r.metadata.group));
    cells.push_back(std::to_string(s2.n_aligned));
    cells.push_back(corr_rho(s2.reference_social_influence));
    cells.push_back(corr_p(s2.reference_social_influence));
    cells.push_back(corr_rho(s2.subject_social_influence));
    cells.push_back(corr_p(s2.subject_social_influence));
    cells.push_back(s2.fisher.ok() ? fixed4(s2.fisher->statistic) : kNa);
    cells.push_back(s2.fisher.ok() ? fixed4(s2.fisher->p_value) : kNa);
    cells.push_back(s2.subject_belief_change.ok()
                        ? fixed4(s2.subject_belief_change->mean)
                        : kNa);
    cells.push_back(s2.subject_belief_change.ok()
                        ? fixed4(s2.subject_belief_change->stddev)
                        : kNa);
    cells.push_back(s2.reference_belief_change.ok()
                        ? fixed4(s2.reference_belief_change->mean)
                        : kNa);
    cells.push_back(s2.reference_belief_change.ok()
                        ? fixed4(s2.reference_belief_change->stddev)
                        : kNa);
    cells.push_back(corr_rho(s2.belief_change_spearman));
    cells.push_back(corr_p(s2.belief_change_spearman));
    cells.push_back(s2.reference_social_influence.ok()
                        ? full_precision(s2.reference_social_influence->rho)
                        : kNa);
    cells.push_back(s2.subject_social_influence.ok()
                        ? full_precision(s2.subject_social_influence->rho)
                        : kNa);
    cells.push_back(s2.fisher.ok() ? full_precision(s2.fisher->p_value) : kNa);
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) row += ',';
      row += cells[i];
    }
    out += row + "\n";
  }
  return out;
}

std::string emit_stage3_csv(std::span<const MetricReport> reports) {
  require_reports(reports);
  std::string out =
      "model,group,n_aligned,subject_bnd_mean,subject_bnd_sd,"
      "reference_bnd_mean,reference_bnd_sd,bnd_mwu_p,"
      "follow_signal_spearman_rho,follow_signal_spearman_p,"
      "subject_bnd_mean_full,reference_bnd_mean_full,bnd_mwu_p_full\n";
  for (const auto& r : reports) {
    const auto& s3 = r.stage3;
    std::vector<std::string> cells;
    cells.push_back(csv_escape(r.labels.first));
    cells.push_back(csv_escape(r.metadata.group));
    cells.push_back(std::to_string(s3.n_aligned));
    cells.push_back(s3.subject_bnd.ok() ? fixed4(s3.subject_bnd->mean) : kNa);
    cells.push_back(s3.subject_bnd.ok() ? fixed4(s3.subject_bnd->stddev) : kNa);
    cells.push_back(s3.reference_bnd.ok() ? fixed4(s3.reference_bnd->mean) : kNa);
    cells.push_back(s3.reference_bnd.ok() ? fixed4(s3.reference_bnd->stddev)
                                          : kNa);
    cells.push_back(s3.bnd_mwu.ok() ? fixed4(s3.bnd_mwu->p_value) : kNa);
    cells.push_back(s3.follow_signal_spearman.ok()
                        ? fixed4(s3.follow_signal_spearman->rho)
                        : kNa);
    cells.push_back(s3.follow_signal_spearman.ok()
                        ? fixed4(s3.follow_signal_spearman->test.p_value)
                        : kNa);
    cells.push_back(s3.subject_bnd.ok() ? full_precision(s3.subject_bnd->mean)
                                        : kNa);
    cells.push_back(s3.reference_bnd.ok()
                        ? full_precision(s3.reference_bnd->mean)
                        : kNa);
    cells.push_back(s3.bnd_mwu.ok() ? full_precision(s3.bnd_mwu->p_value) : kNa);
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) row += ',';
      row += cells[i];
    }
    out += row + "\n";
  }
  return out;
}

// ---- histograms ------------------------------------------------------------------

std::string_view to_string(HistogramKind kind) {
  switch (kind) {
    case HistogramKind::stage1: return "stage1";
    case HistogramKind::follow_signal: return "follow_signal";
    case HistogramKind::bnd: return "bnd";
  }
  return "unknown";
}

namespace {

std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "cohort" : out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

void export_histograms(const Cohort& cohort, HistogramKind kind,
                       const std::filesystem::path& out_dir) {
  std::vector<double> values;
  switch (kind) {
    case HistogramKind::stage1: values = metrics::stage1_ratings(cohort); break;
    case HistogramKind::follow_signal: values = metrics::follow_signals(cohort); break;
    case HistogramKind::bnd: values = metrics::network_distances(cohort); break;
  }
  if (values.empty())
    throw std::invalid_argument("export_histograms: no " +
                                std::string(to_string(kind)) + " data in '" +
                                cohort.label + "'");

  std::filesystem::create_directories(out_dir);
  const std::string base = sanitize_label(cohort.label) + "_" +
                           std::string(to_string(kind));

  std::string hist;
  const double n = static_cast<double>(values.size());
  if (kind == HistogramKind::stage1) {
    std::array<std::size_t, 5> counts{};
    for (double v : values) counts[static_cast<std::size_t>(v)] += 1;
    hist = "bin,count,proportion\n";
    for (int v = 0; v < 5; ++v) {
      const auto c = counts[static_cast<std::size_t>(v)];
      hist += std::to_string(v) + "," + std::to_string(c) + "," +
              full_precision(static_cast<double>(c) / n) + "\n";
    }
  } else {
    constexpr int kBins = 20;
    std::array<std::size_t, kBins> counts{};
    for (double v : values) {
      int bin = static_cast<int>(v * kBins / 4.0);
      bin = std::clamp(bin, 0, kBins - 1);  // 4.0 lands in the last bin
      counts[static_cast<std::size_t>(bin)] += 1;
    }
    hist = "bin_low,bin_high,count,proportion\n";
    for (int b = 0; b < kBins; ++b) {
      const auto c = counts[static_cast<std::size_t>(b)];
      hist += full_precision(b * 4.0 / kBins) + "," +
              full_precision((b + 1) * 4.0 / kBins) + "," + std::to_string(c) +
              "," + full_precision(static_cast<double>(c) / n) + "\n";
    }
  }
  write_file(out_dir / ("hist_" + base + ".csv"), hist);

  std::string raw = "value\n";
  for (double v : values) raw += full_precision(v) + "\n";
  write_file(out_dir / ("raw_" + base + ".csv"), raw);
}

// ---- bundle ---------------------------------------------------------------------

namespace {

json drops_to_json(const metrics::StageDrops& d) {
  return json{{"aligned", d.aligned}, {"dropped", d.dropped}};
}

}  // namespace

BundleOutcome write_bundle(const ReportBundle& bundle,
                           const std::vector<const Cohort*>& cohorts,
                           const std::map<std::string, std::string>& extra_meta) {
  BundleOutcome outcome;
  std::filesystem::create_directories(bundle.out_dir);
  const auto wants = [&](std::string_view format) {
    return std::find(bundle.formats.begin(), bundle.formats.end(), format) !=
           bundle.formats.end();
  };

  if (wants("tables_csv")) {
    try {
      write_file(bundle.out_dir / "stage1.csv", emit_stage1_csv(bundle.comparisons));
      write_file(bundle.out_dir / "stage2.csv", emit_stage2_csv(bundle.comparisons));
      write_file(bundle.out_dir / "stage3.csv", emit_stage3_csv(bundle.comparisons));
    } catch (const std::exception& e) {
      outcome.format_errors.emplace_back("tables_csv", e.what());
    }
  }
  if (wants("tables_text")) {
    try {
      std::string text;
      text += "Stage 1: initial belief distributions\n";
      text += emit_stage1_table(bundle.comparisons);
      text += "\nStage 2: social influence\n";
      text += emit_stage2_table(bundle.comparisons);
      text += "\nStage 3: belief network distance\n";
      text += emit_stage3_table(bundle.comparisons);
      write_file(bundle.out_dir / "report.txt", text);
    } catch (const std::exception& e) {
      outcome.format_errors.emplace_back("tables_text", e.what());
    }
  }
  if (wants("histograms")) {
    for (const Cohort* cohort : cohorts) {
      for (HistogramKind kind : {HistogramKind::stage1, HistogramKind::follow_signal,
                                 HistogramKind::bnd}) {
        try {
          export_histograms(*cohort, kind, bundle.out_dir);
        } catch (const std::exception& e) {
          outcome.format_errors.emplace_back(
              "histograms/" + sanitize_label(cohort->label) + "_" +
                  std::string(to_string(kind)),
              e.what());
        }
      }
    }
  }
  if (wants("meta")) {
    try {
      json meta;
      json comparisons = json::array();
      for (const auto& r : bundle.comparisons) {
        const auto& m = r.metadata;
        comparisons.push_back(
            json{{"subject", r.labels.first},
                 {"reference", r.labels.second},
                 {"group", m.group},
                 {"kl_pseudocount", m.kl_pseudocount},
                 {"log_base", m.log_base},
                 {"n_total", m.n_total},
                 {"n_aligned", r.n_aligned},
                 {"subject_only", m.subject_only},
                 {"reference_only", m.reference_only},
                 {"stage1", drops_to_json(m.stage1)},
                 {"stage2", drops_to_json(m.stage2)},
                 {"stage3", drops_to_json(m.stage3)}});
      }
      meta["comparisons"] = std::move(comparisons);
      json errors = json::array();
      for (const auto& [format, what] : outcome.format_errors)
        errors.push_back(json{{"format", format}, {"error", what}});
      meta["format_errors"] = std::move(errors);
      json extra = json::object();
      for (const auto& [key, value] : extra_meta) extra[key] = value;
      meta["run"] = std::move(extra);
      write_file(bundle.out_dir / "report_meta.json", meta.dump(2) + "\n");
    } catch (const std::exception& e) {
      outcome.format_errors.emplace_back("meta", e.what());
    }
  }
  return outcome;
}

}  // namespace beliefsim::report
