#include "alm_audit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace alm_audit {

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // sample (n - 1)
};

Moments moments(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(xs.size() - 1);
  return m;
}

void require_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite value in sample");
  }
}

}  // namespace

double student_t_two_tailed_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (std::isnan(t)) throw std::invalid_argument("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(boost::math::ibeta(df / 2.0, 0.5, x), 0.0, 1.0);
}

double student_t_quantile(double probability, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (!(probability > 0.0 && probability < 1.0)) throw std::invalid_argument("probability must be in (0,1)");
  return boost::math::quantile(boost::math::students_t(df), probability);
}

TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch t-test needs at least two values per sample");
  require_finite(a);
  require_finite(b);
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = ma.variance / na;
  const double vb = mb.variance / nb;
  if (va + vb == 0.0) throw std::invalid_argument("welch t-test is degenerate: both samples are constant");

  TestResult r;
  r.n1 = a.size();
  r.n2 = b.size();
  r.statistic = (ma.mean - mb.mean) / std::sqrt(va + vb);
  r.degrees_of_freedom = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p_value = student_t_two_tailed_p(r.statistic, r.degrees_of_freedom);
  return r;
}

TestResult pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson correlation needs equal lengths");
  if (x.size() < 3) throw std::invalid_argument("pearson correlation needs at least three pairs");
  require_finite(x);
  require_finite(y);
  const Moments mx = moments(x);
  const Moments my = moments(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx.mean;
    const double dy = y[i] - my.mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson correlation of a constant sequence");

  TestResult out;
  out.n1 = out.n2 = x.size();
  out.statistic = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  out.degrees_of_freedom = static_cast<double>(x.size() - 2);
  const double r2 = out.statistic * out.statistic;
  if (r2 >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.statistic * std::sqrt(out.degrees_of_freedom / (1.0 - r2));
    out.p_value = student_t_two_tailed_p(t, out.degrees_of_freedom);
  }
  return out;
}

MeanInterval mean_ci95(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("confidence interval needs at least two values");
  require_finite(xs);
  const Moments m = moments(xs);
  const double n = static_cast<double>(xs.size());
  const double half = student_t_quantile(0.975, n - 1.0) * std::sqrt(m.variance / n);
  return {m.mean, m.mean - half, m.mean + half, xs.size()};
}

std::string_view to_string(QuadrantLabel q) {
  switch (q) {
    case QuadrantLabel::SafeZone:
      return "safe_zone";
    case QuadrantLabel::RationalizationTrap:
      return "rationalization_trap";
    case QuadrantLabel::PanicResponse:
      return "panic_response";
    case QuadrantLabel::SilentAlarm:
      return "silent_alarm";
  }
  return "unknown";
}

QuadrantResult classify_quadrant(double phi_coh, double psi_diss, double asr, const QuadrantThresholds& t) {
  for (double v : {phi_coh, psi_diss, asr}) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("quadrant inputs must lie in [0,1]");
  }
  const bool coherent = phi_coh >= t.coh_hi;
  const bool dissonant = psi_diss >= t.diss_hi;
  const bool fooled = asr > t.asr_hi;

  if (!coherent && dissonant) return {QuadrantLabel::PanicResponse, false};
  if (!coherent) return {fooled ? QuadrantLabel::RationalizationTrap : QuadrantLabel::SafeZone, true};
  if (!fooled) return {QuadrantLabel::SafeZone, false};
  return {dissonant ? QuadrantLabel::SilentAlarm : QuadrantLabel::RationalizationTrap, false};
}

}  // namespace alm_audit
