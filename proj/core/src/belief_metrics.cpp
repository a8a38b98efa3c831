#include "beliefsim/belief_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "beliefsim/rng.hpp"
#include "beliefsim/stats.hpp"

namespace beliefsim::metrics {

int belief_update(const RoundTrace& trace) {
  if (!trace.stage1 || !trace.stage2)
    throw std::invalid_argument("belief_update: trace has no stage-2 data");
  return trace.stage2->rating.value() - trace.stage1->rating.value();
}

namespace {

double peer_mean(const RoundTrace& trace) {
  double sum = 0.0;
  for (const auto& p : trace.peers) sum += p.rating.value();
  return sum / static_cast<double>(trace.peers.size());
}

}  // namespace

stats::Correlation social_influence(const Cohort& cohort) {
  std::vector<double> x, y;
  for (const auto& [key, trace] : cohort.traces) {
    if (!trace.has_stage(Stage::update)) continue;
    x.push_back(peer_mean(trace) - trace.stage1->rating.value());
    y.push_back(static_cast<double>(belief_update(trace)));
  }
  if (x.size() < 3)
    throw std::invalid_argument("social_influence: fewer than 3 stage-2 traces");
  return stats::spearman(x, y);
}

double follow_signal(const RoundTrace& trace) {
  if (!trace.follows || trace.follows->empty())
    throw std::invalid_argument("follow_signal: trace has no follows");
  double sum = 0.0;
  for (const auto& id : *trace.follows) {
    auto it = std::find_if(trace.candidates.begin(), trace.candidates.end(),
                           [&](const PeerObservation& c) { return c.peer_id == id; });
    if (it == trace.candidates.end())
      throw std::invalid_argument("follow_signal: follow id '" + id +
                                  "' not among candidates");
    sum += it->rating.value();
  }
  return sum / static_cast<double>(trace.follows->size());
}

double belief_network_distance(const RoundTrace& trace) {
  if (!trace.stage1)
    throw std::invalid_argument("belief_network_distance: no stage-1 rating");
  return std::fabs(follow_signal(trace) - trace.stage1->rating.value());
}

BaselineSplit baseline_half_split(const Cohort& cohort, std::uint64_t seed,
                                  double kl_pseudocount) {
  std::vector<LikertRating> ratings;
  for (const auto& [key, trace] : cohort.traces)
    if (trace.has_stage(Stage::rate)) ratings.push_back(trace.stage1->rating);
  if (ratings.size() < 2)
    throw std::invalid_argument("baseline_half_split: need at least 2 stage-1 traces");

  Rng rng(mix64(seed ^ 0x5b5e1f1eull));
  rng.shuffle(ratings);

  const std::size_t first_size = (ratings.size() + 1) / 2;  // odd: extra to first
  std::span<const LikertRating> all(ratings);
  const auto p = stats::pmf_of(all.subspan(0, first_size));
  const auto q = stats::pmf_of(all.subspan(first_size));
  return {stats::kl_divergence(p, q, kl_pseudocount),
          stats::wasserstein_distance(p, q)};
}

std::vector<double> stage1_ratings(const Cohort& cohort) {
  std::vector<double> out;
  for (const auto& [key, trace] : cohort.traces)
    if (trace.has_stage(Stage::rate))
      out.push_back(static_cast<double>(trace.stage1->rating.value()));
  return out;
}

std::vector<double> belief_updates(const Cohort& cohort) {
  std::vector<double> out;
  for (const auto& [key, trace] : cohort.traces)
    if (trace.has_stage(Stage::update))
      out.push_back(static_cast<double>(belief_update(trace)));
  return out;
}

std::vector<double> follow_signals(const Cohort& cohort) {
  std::vector<double> out;
  for (const auto& [key, trace] : cohort.traces)
    if (trace.has_stage(Stage::follow)) out.push_back(follow_signal(trace));
  return out;
}

std::vector<double> network_distances(const Cohort& cohort) {
  std::vector<double> out;
  for (const auto& [key, trace] : cohort.traces)
    if (trace.has_stage(Stage::follow))
      out.push_back(belief_network_distance(trace));
  return out;
}

namespace {

using stats::Correlation;
using stats::TestResult;

std::vector<TraceKey> aligned_keys(const Cohort& subject, const Cohort& reference,
                                   Stage stage) {
  std::vector<TraceKey> keys;
  for (const auto& [key, trace] : subject.traces) {
    auto it = reference.traces.find(key);
    if (it == reference.traces.end()) continue;
    if (trace.has_stage(stage) && it->second.has_stage(stage)) keys.push_back(key);
  }
  return keys;
}

Metric<SampleStats> stats_of(const std::vector<double>& values) {
  if (values.size() < 2)
    return Metric<SampleStats>::unavailable("fewer than 2 samples");
  const auto ms = stats::mean_std(values);
  return Metric<SampleStats>::of({ms.mean, ms.stddev, values.size()});
}

Metric<Correlation> spearman_of(const std::vector<double>& x,
                                const std::vector<double>& y) {
  if (x.size() < 3)
    return Metric<Correlation>::unavailable("fewer than 3 aligned samples");
  try {
    return Metric<Correlation>::of(stats::spearman(x, y));
  } catch (const stats::DegenerateSeriesError& e) {
    return Metric<Correlation>::unavailable(e.what());
  }
}

}  // namespace

MetricReport compare_cohorts(const Cohort& subject, const Cohort& reference,
                             const CompareOptions& options) {
  MetricReport report;
  report.labels = {subject.label, reference.label};
  report.metadata.kl_pseudocount = options.kl_pseudocount;
  report.metadata.group = options.group;

  std::size_t n_both = 0;
  for (const auto& [key, trace] : subject.traces)
    if (reference.traces.contains(key)) ++n_both;
  report.metadata.n_total = n_both;
  report.metadata.subject_only = subject.size() - n_both;
  report.metadata.reference_only = reference.size() - n_both;

  const auto keys1 = aligned_keys(subject, reference, Stage::rate);
  if (keys1.empty()) throw ValidationError("no comparable instances");
  const auto keys2 = aligned_keys(subject, reference, Stage::update);
  const auto keys3 = aligned_keys(subject, reference, Stage::follow);

  report.metadata.stage1 = {keys1.size(), n_both - keys1.size()};
  report.metadata.stage2 = {keys2.size(), n_both - keys2.size()};
  report.metadata.stage3 = {keys3.size(), n_both - keys3.size()};

  // ---- stage 1: initial belief distributions -------------------------------
  auto& s1 = report.stage1;
  s1.n_aligned = keys1.size();
  report.n_aligned = keys1.size();

  std::vector<double> subj_r1, ref_r1;
  std::vector<LikertRating> subj_l1, ref_l1;
  for (const auto& key : keys1) {
    const auto& st = subject.traces.at(key);
    const auto& rt = reference.traces.at(key);
    subj_r1.push_back(st.stage1->rating.value());
    ref_r1.push_back(rt.stage1->rating.value());
    subj_l1.push_back(st.stage1->rating);
    ref_l1.push_back(rt.stage1->rating);
  }
  const auto subj_dist = stats::pmf_of(subj_l1);
  const auto ref_dist = stats::pmf_of(ref_l1);
  std::string kl_note =
      options.kl_pseudocount > 0.0
          ? "pseudocount " + std::to_string(options.kl_pseudocount) + " per bin"
          : std::string{};
  s1.kl = Metric<double>::of(
      stats::kl_divergence(ref_dist, subj_dist, options.kl_pseudocount), kl_note);
  s1.wasserstein =
      Metric<double>::of(stats::wasserstein_distance(ref_dist, subj_dist));
  s1.mwu = Metric<TestResult>::of(stats::mann_whitney_u(subj_r1, ref_r1));
  s1.spearman = spearman_of(subj_r1, ref_r1);
  s1.subject_mean_std = stats_of(subj_r1);
  s1.reference_mean_std = stats_of(ref_r1);

  // ---- stage 2: belief change and social influence -------------------------
  auto& s2 = report.stage2;
  s2.n_aligned = keys2.size();
  if (keys2.empty()) {
    const char* why = "no aligned stage-2 instances";
    s2.subject_belief_change = Metric<SampleStats>::unavailable(why);
    s2.reference_belief_change = Metric<SampleStats>::unavailable(why);
    s2.belief_change_spearman = Metric<Correlation>::unavailable(why);
    s2.subject_social_influence = Metric<Correlation>::unavailable(why);
    s2.reference_social_influence = Metric<Correlation>::unavailable(why);
    s2.fisher = Metric<TestResult>::unavailable(why);
  } else {
    std::vector<double> subj_bc, ref_bc, subj_x, ref_x;
    Cohort subj2{subject.label, {}}, ref2{reference.label, {}};
    for (const auto& key : keys2) {
      const auto& st = subject.traces.at(key);
      const auto& rt = reference.traces.at(key);
      subj_bc.push_back(belief_update(st));
      ref_bc.push_back(belief_update(rt));
      subj2.traces.emplace(key, st);
      ref2.traces.emplace(key, rt);
    }
    s2.subject_belief_change = stats_of(subj_bc);
    s2.reference_belief_change = stats_of(ref_bc);
    s2.belief_change_spearman = spearman_of(subj_bc, ref_bc);

    auto influence = [](const Cohort& c) -> Metric<Correlation> {
      try {
        return Metric<Correlation>::of(social_influence(c));
      } catch (const std::exception& e) {
        return Metric<Correlation>::unavailable(e.what());
      }
    };
    s2.subject_social_influence = influence(subj2);
    s2.reference_social_influence = influence(ref2);

    if (s2.subject_social_influence.ok() && s2.reference_social_influence.ok() &&
        keys2.size() >= 4) {
      const double r_ref = s2.reference_social_influence->rho;
      const double r_subj = s2.subject_social_influence->rho;
      if (std::fabs(r_ref) < 1.0 && std::fabs(r_subj) < 1.0) {
        s2.fisher = Metric<TestResult>::of(
            stats::fisher_r_to_z(r_ref, keys2.size(), r_subj, keys2.size()));
      } else {
        s2.fisher = Metric<TestResult>::unavailable("|rho| = 1 on one side");
      }
    } else {
      s2.fisher = Metric<TestResult>::unavailable(
          "social influence not computable on both sides");
    }
  }

  // ---- stage 3: follow selection and homophily -----------------------------
  auto& s3 = report.stage3;
  s3.n_aligned = keys3.size();
  if (keys3.empty()) {
    const char* why = "no aligned stage-3 instances";
    s3.follow_signal_spearman = Metric<Correlation>::unavailable(why);
    s3.subject_bnd = Metric<SampleStats>::unavailable(why);
    s3.reference_bnd = Metric<SampleStats>::unavailable(why);
    s3.bnd_mwu = Metric<TestResult>::unavailable(why);
  } else {
    std::vector<double> subj_fs, ref_fs, subj_bnd, ref_bnd;
    for (const auto& key : keys3) {
      const auto& st = subject.traces.at(key);
      const auto& rt = reference.traces.at(key);
      subj_fs.push_back(follow_signal(st));
      ref_fs.push_back(follow_signal(rt));
      subj_bnd.push_back(belief_network_distance(st));
      ref_bnd.push_back(belief_network_distance(rt));
    }
    s3.follow_signal_spearman = spearman_of(subj_fs, ref_fs);
    s3.subject_bnd = stats_of(subj_bnd);
    s3.reference_bnd = stats_of(ref_bnd);
    s3.bnd_mwu = Metric<TestResult>::of(stats::mann_whitney_u(subj_bnd, ref_bnd));
  }

  return report;
}

}  // namespace beliefsim::metrics
