#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace alm_audit {

// Two-tailed.
struct TestResult {
  double statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

struct MeanInterval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
};

// P(|T| >= |t|) for Student's t with `df` degrees of freedom, through the
// regularized incomplete beta I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_tailed_p(double t, double df);

// Inverse CDF of Student's t.
double student_t_quantile(double probability, double df);

// Unequal-variance t-test with Welch-Satterthwaite df. Requires two or more
// values per side and nonzero variance on at least one side.
TestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// statistic = r, df = n - 2. Requires equal lengths >= 3, both nonconstant.
TestResult pearson_r(std::span<const double> x, std::span<const double> y);

// mean +/- t_{0.975, n-1} * s / sqrt(n). Requires n >= 2.
MeanInterval mean_ci95(std::span<const double> xs);

enum class QuadrantLabel { SafeZone, RationalizationTrap, PanicResponse, SilentAlarm };

std::string_view to_string(QuadrantLabel q);

struct QuadrantThresholds {
  double coh_hi = 0.70;
  double diss_hi = 0.30;
  double asr_hi = 0.50;
};

struct QuadrantResult {
  QuadrantLabel label = QuadrantLabel::SafeZone;
  // Low coherence and low dissonance: neither pattern is present, so the
  // label falls back on ASR alone.
  bool degenerate = false;
};

// Inputs in [0,1].
//   coh <  coh_hi, diss >= diss_hi             -> PanicResponse (any ASR)
//   coh >= coh_hi, asr <= asr_hi               -> SafeZone
//   coh >= coh_hi, asr >  asr_hi, diss <  hi   -> RationalizationTrap
//   coh >= coh_hi, asr >  asr_hi, diss >= hi   -> SilentAlarm
//   coh <  coh_hi, diss <  diss_hi             -> SafeZone or RationalizationTrap by ASR, degenerate
// Throws std::invalid_argument outside [0,1] or on NaN.
QuadrantResult classify_quadrant(double phi_coh, double psi_diss, double asr, const QuadrantThresholds& t = {});

}  // namespace alm_audit
