#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "beliefsim/stats.hpp"
#include "beliefsim/types.hpp"

namespace beliefsim::metrics {

// stage2.rating - stage1.rating. Throws when the trace lacks stage-2 data.
int belief_update(const RoundTrace& trace);

/// Spearman correlation, over all traces with stage-2 data, between
/// (mean peer rating - own initial rating) and the belief update. Requires
/// at least 3 eligible traces; propagates DegenerateSeriesError when either
/// derived series is constant (e.g. no agent ever updates).
stats::Correlation social_influence(const Cohort& cohort);

// Mean initial rating of the followed candidates. Throws on empty follows or
// a follow id that is not a candidate.
double follow_signal(const RoundTrace& trace);

// |follow_signal - stage1.rating|; zero means perfectly homophilic selection.
double belief_network_distance(const RoundTrace& trace);

struct BaselineSplit {
  double kl = 0.0;
  double wasserstein = 0.0;
};

/// Shuffle the stage-1-bearing traces by seed, split into halves (odd count:
/// extra trace to the first half) and compare the halves' rating
/// distributions. The no-signal reference point for KL / Wasserstein scores.
BaselineSplit baseline_half_split(const Cohort& cohort, std::uint64_t seed,
                                  double kl_pseudocount = 0.5);

/// A metric slot that either holds a value or says why it could not be
/// computed, so report tables stay rectangular.
template <typename T>
struct Metric {
  std::optional<T> value;
  std::string note;

  bool ok() const { return value.has_value(); }
  const T& operator*() const { return *value; }
  const T* operator->() const { return &*value; }

  static Metric of(T v, std::string note = {}) {
    return Metric{std::move(v), std::move(note)};
  }
  static Metric unavailable(std::string why) {
    return Metric{std::nullopt, std::move(why)};
  }
};

struct SampleStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

struct Stage1Metrics {
  std::size_t n_aligned = 0;
  Metric<double> kl;           // D(reference || subject), Eq. 1 direction
  Metric<double> wasserstein;
  Metric<stats::TestResult> mwu;          // subject sample first
  Metric<stats::Correlation> spearman;    // subject vs reference ratings
  Metric<SampleStats> subject_mean_std;
  Metric<SampleStats> reference_mean_std;
};

struct Stage2Metrics {
  std::size_t n_aligned = 0;
  Metric<SampleStats> subject_belief_change;
  Metric<SampleStats> reference_belief_change;
  Metric<stats::Correlation> belief_change_spearman;
  Metric<stats::Correlation> subject_social_influence;
  Metric<stats::Correlation> reference_social_influence;
  Metric<stats::TestResult> fisher;  // reference influence vs subject influence
};

struct Stage3Metrics {
  std::size_t n_aligned = 0;
  Metric<stats::Correlation> follow_signal_spearman;
  Metric<SampleStats> subject_bnd;
  Metric<SampleStats> reference_bnd;
  Metric<stats::TestResult> bnd_mwu;  // subject sample first
};

struct StageDrops {
  std::size_t aligned = 0;
  std::size_t dropped = 0;  // aligned + dropped == n_total
};

struct ReportMetadata {
  double kl_pseudocount = 0.5;
  std::string log_base = "e";  // KL is reported in nats
  std::size_t n_total = 0;     // keys present in both cohorts
  std::size_t subject_only = 0;
  std::size_t reference_only = 0;
  StageDrops stage1, stage2, stage3;
  std::string group;  // model-type grouping for report tables, may be empty
};

/// Everything one cohort-vs-cohort comparison produces; mirrors the report
/// tables (stage-1 divergences, stage-2 influence, stage-3 homophily).
struct MetricReport {
  std::pair<std::string, std::string> labels;  // (subject, reference)
  std::size_t n_aligned = 0;                   // stage-1 aligned size
  Stage1Metrics stage1;
  Stage2Metrics stage2;
  Stage3Metrics stage3;
  ReportMetadata metadata;
};

struct CompareOptions {
  double kl_pseudocount = 0.5;
  std::string group;
};

/// Full comparison with per-stage drop alignment: each stage's statistics
/// are computed over exactly the keys where both cohorts carry that stage's
/// data. Throws ValidationError when no key has stage-1 data on both sides;
/// degenerate or empty later stages degrade to "not computable" entries.
MetricReport compare_cohorts(const Cohort& subject, const Cohort& reference,
                             const CompareOptions& options = {});

// Key-ordered metric series over the traces carrying the relevant stage.
std::vector<double> stage1_ratings(const Cohort& cohort);
std::vector<double> belief_updates(const Cohort& cohort);
std::vector<double> follow_signals(const Cohort& cohort);
std::vector<double> network_distances(const Cohort& cohort);

}  // namespace beliefsim::metrics
