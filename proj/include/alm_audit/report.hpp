#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "alm_audit/metrics.hpp"
#include "alm_audit/stats.hpp"

namespace alm_audit {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTest {
  std::string name;
  TestResult result;
};

struct NamedInterval {
  std::string name;
  MeanInterval interval;
};

struct SkippedStatistic {
  std::string name;
  std::string reason;
};

struct StatsBundle {
  std::vector<NamedTest> tests;
  std::vector<NamedInterval> intervals;
  std::vector<SkippedStatistic> skipped;
};

// One point per RSN (model, strategy) with a PER arm.
struct LandscapePoint {
  std::string model;
  std::string strategy;
  AttackFamily family = AttackFamily::Acoustic;
  Rate asr, coh_per, diss_per;
};

std::vector<LandscapePoint> landscape_points(const MetricReport& report);

// Across landscape points:
//   dissonance_linguistic_vs_acoustic   Welch on PER dissonance
//   coherence_acoustic_vs_linguistic    Welch on PER coherence
//   coherence_vs_dissonance             Pearson on (coh PER, diss PER)
//   <metric>_<family>_ci95              mean CI of each PER scalar per family
// Anything with too few points or zero variance lands in `skipped`.
StatsBundle compute_statistics(const MetricReport& report);

void to_json(nlohmann::json& j, const StatsBundle& stats);

// RFC-4180 field quoting.
std::string csv_field(std::string_view s);

// Percentage with one decimal, never "-0.0"; empty when absent.
std::string format_percent(const std::optional<double>& fraction);

// File bodies, exposed so stages can write subsets.
std::string render_metrics_csv(const MetricReport& report);
std::string render_landscape_csv(const std::vector<LandscapePoint>& points, const QuadrantThresholds& thresholds);
std::string render_summary(const MetricReport& report, const StatsBundle& stats, const QuadrantThresholds& thresholds);

inline constexpr const char* kReportFiles[] = {"metrics.csv", "metrics.json", "landscape_points.csv", "stats.json",
                                               "summary.txt"};

// Writes the five report files into out_dir, creating it if needed. Output
// bytes depend only on the arguments. Throws ReportError if a file cannot be
// written.
void emit_report(const MetricReport& report, const StatsBundle& stats, const std::filesystem::path& out_dir,
                 const QuadrantThresholds& thresholds = {});

}  // namespace alm_audit
