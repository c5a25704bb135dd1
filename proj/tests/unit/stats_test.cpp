#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <gtest/gtest.h>

#include "alm_audit/stats.hpp"
#include "published_tables.hpp"

namespace alm_audit {
namespace {

// Reference values below were produced by scipy.stats 1.15.3
// (ttest_ind with equal_var=False, pearsonr, t.ppf) and are frozen here.

TEST(Welch, ShiftedQuartets) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {3, 4, 5, 6};
  const TestResult r = welch_t_test(a, b);
  EXPECT_NEAR(r.statistic, -2.1908902300206647, 1e-12);
  EXPECT_NEAR(r.degrees_of_freedom, 6.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.07098765432098755, 1e-10);
  EXPECT_EQ(r.n1, 4u);
  EXPECT_EQ(r.n2, 4u);
}

TEST(Welch, EqualMeansGiveZeroStatistic) {
  const std::vector<double> a = {1, 2, 3, 4, 5, 6, 7}, b = {2, 9, 4, 1};
  const TestResult r = welch_t_test(a, b);
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_NEAR(r.degrees_of_freedom, 4.300813008130081, 1e-10);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(Welch, UnequalSizesAndVariances) {
  const std::vector<double> a = {0.1, 0.4, 0.35, 0.8, 0.9}, b = {0.5, 0.55, 0.52, 0.6, 0.58, 0.51};
  const TestResult r = welch_t_test(a, b);
  EXPECT_NEAR(r.statistic, -0.22286145822446513, 1e-12);
  EXPECT_NEAR(r.degrees_of_freedom, 4.0982483330256985, 1e-10);
  EXPECT_NEAR(r.p_value, 0.8343119513953082, 1e-10);
}

TEST(Welch, AntisymmetricInArgumentOrder) {
  boost::random::mt19937_64 rng(3);
  boost::random::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(2 + trial % 7), b(3 + trial % 5);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const TestResult ab = welch_t_test(a, b), ba = welch_t_test(b, a);
    EXPECT_DOUBLE_EQ(ab.statistic, -ba.statistic);
    EXPECT_DOUBLE_EQ(ab.p_value, ba.p_value);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
    EXPECT_GT(ab.degrees_of_freedom, 0.0);
  }
}

TEST(Welch, RejectsTinyOrConstantSamples) {
  const std::vector<double> one = {1.0}, two = {1.0, 2.0}, flat = {3.0, 3.0, 3.0};
  EXPECT_THROW(welch_t_test(one, two), std::invalid_argument);
  EXPECT_THROW(welch_t_test(flat, flat), std::invalid_argument);
  EXPECT_NO_THROW(welch_t_test(flat, two));
}

std::vector<double> column(double testing::ArmRow::*field) {
  std::vector<double> out;
  for (const auto& r : testing::kAcousticArms) out.push_back(r.*field);
  for (const auto& r : testing::kLinguisticArms) out.push_back(r.*field);
  return out;
}

TEST(Welch, PublishedDissonanceLinguisticBelowAcoustic) {
  const auto diss = column(&testing::ArmRow::diss_per);
  const std::vector<double> acoustic(diss.begin(), diss.begin() + 12), linguistic(diss.begin() + 12, diss.end());
  const TestResult r = welch_t_test(linguistic, acoustic);
  EXPECT_NEAR(r.statistic, -4.035965538231681, 1e-9);
  EXPECT_NEAR(r.degrees_of_freedom, 16.613329165372715, 1e-9);
  EXPECT_NEAR(r.p_value, 0.0008938585033616478, 1e-12);
}

TEST(Welch, PublishedCoherenceDifferenceIsNotSignificant) {
  const auto coh = column(&testing::ArmRow::coh_per);
  const std::vector<double> acoustic(coh.begin(), coh.begin() + 12), linguistic(coh.begin() + 12, coh.end());
  const TestResult r = welch_t_test(acoustic, linguistic);
  EXPECT_NEAR(r.statistic, -1.668502692890222, 1e-9);
  EXPECT_NEAR(r.degrees_of_freedom, 17.07277316585686, 1e-9);
  EXPECT_NEAR(r.p_value, 0.1134502426530969, 1e-10);
}

TEST(Pearson, PublishedCoherenceDissonancePairs) {
  const TestResult r = pearson_r(column(&testing::ArmRow::coh_per), column(&testing::ArmRow::diss_per));
  EXPECT_NEAR(r.statistic, -0.7859342929234234, 1e-12);
  EXPECT_NEAR(r.p_value, 7.196198905201128e-07, 1e-15);
  EXPECT_EQ(r.degrees_of_freedom, 26.0);
}

TEST(Pearson, SmallReference) {
  const std::vector<double> x = {1, 2, 3, 4, 5}, y = {2, 1, 4, 3, 5};
  const TestResult r = pearson_r(x, y);
  EXPECT_NEAR(r.statistic, 0.8, 1e-12);
  EXPECT_NEAR(r.p_value, 0.10408803866182799, 1e-10);
}

TEST(Pearson, ExactLinearRelations) {
  const std::vector<double> x = {0.5, 1.0, 2.5, 4.0};
  std::vector<double> up, down;
  for (double v : x) {
    up.push_back(2 * v + 1);
    down.push_back(-v);
  }
  EXPECT_DOUBLE_EQ(pearson_r(x, up).statistic, 1.0);
  EXPECT_EQ(pearson_r(x, up).p_value, 0.0);
  EXPECT_DOUBLE_EQ(pearson_r(x, down).statistic, -1.0);
}

TEST(Pearson, AffineInvariance) {
  boost::random::mt19937_64 rng(8);
  boost::random::uniform_real_distribution<double> u(0, 1);
  std::vector<double> x(20), y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x[i] = u(rng);
    y[i] = x[i] * 0.3 + u(rng);
  }
  const double r = pearson_r(x, y).statistic;
  std::vector<double> xs, yneg;
  for (double v : x) xs.push_back(7.5 * v - 3.0);
  for (double v : y) yneg.push_back(-2.0 * v + 1.0);
  EXPECT_NEAR(pearson_r(xs, y).statistic, r, 1e-12);
  EXPECT_NEAR(pearson_r(x, yneg).statistic, -r, 1e-12);
}

TEST(Pearson, Preconditions) {
  const std::vector<double> a = {1, 2}, b = {1, 2, 3}, flat = {1, 1, 1};
  EXPECT_THROW(pearson_r(a, a), std::invalid_argument);
  EXPECT_THROW(pearson_r(a, b), std::invalid_argument);
  EXPECT_THROW(pearson_r(b, flat), std::invalid_argument);
}

TEST(StudentT, QuantilesAndTails) {
  EXPECT_NEAR(student_t_quantile(0.975, 4), 2.7764451051977987, 1e-12);
  // Closed forms: df = 1 is Cauchy, df = 2 is (2p - 1) / sqrt(2p(1 - p)).
  EXPECT_NEAR(student_t_quantile(0.975, 1), std::tan(std::numbers::pi * 0.475), 1e-9);
  EXPECT_NEAR(student_t_quantile(0.9, 2), 0.8 / std::sqrt(2 * 0.9 * 0.1), 1e-12);
  EXPECT_NEAR(student_t_two_tailed_p(2.7764451051977987, 4), 0.05, 1e-12);
  EXPECT_EQ(student_t_two_tailed_p(0.0, 3), 1.0);
}

TEST(MeanCi95, References) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const MeanInterval ci = mean_ci95(a);
  EXPECT_DOUBLE_EQ(ci.mean, 3.0);
  EXPECT_NEAR(ci.lower, 1.0367568385224393, 1e-12);
  EXPECT_NEAR(ci.upper, 4.9632431614775605, 1e-12);
  const std::vector<double> b = {0.2, 0.5, 0.9, 0.4};
  const MeanInterval cb = mean_ci95(b);
  EXPECT_NEAR(cb.lower, 0.031556587696680016, 1e-12);
  EXPECT_NEAR(cb.upper, 0.96844341230332, 1e-12);
}

TEST(MeanCi95, ConstantAndSymmetricData) {
  const std::vector<double> flat = {0.4, 0.4, 0.4};
  const MeanInterval c = mean_ci95(flat);
  EXPECT_DOUBLE_EQ(c.lower, c.mean);
  EXPECT_DOUBLE_EQ(c.upper, c.mean);
  EXPECT_DOUBLE_EQ(c.mean, 0.4);
  const std::vector<double> sym = {-2, -1, 0, 1, 2};
  const MeanInterval s = mean_ci95(sym);
  EXPECT_DOUBLE_EQ(s.upper - s.mean, s.mean - s.lower);
  const std::vector<double> one = {1.0};
  EXPECT_THROW(mean_ci95(one), std::invalid_argument);
}

TEST(Quadrant, PublishedPoints) {
  EXPECT_EQ(classify_quadrant(0.953, 0.047, 1.00).label, QuadrantLabel::RationalizationTrap);
  EXPECT_EQ(classify_quadrant(0.376, 0.782, 0.481).label, QuadrantLabel::PanicResponse);
  EXPECT_EQ(classify_quadrant(0.806, 0.096, 0.315).label, QuadrantLabel::SafeZone);
}

TEST(Quadrant, HighCoherenceCells) {
  EXPECT_EQ(classify_quadrant(0.9, 0.5, 0.8).label, QuadrantLabel::SilentAlarm);
  EXPECT_EQ(classify_quadrant(0.9, 0.5, 0.2).label, QuadrantLabel::SafeZone);
  EXPECT_EQ(classify_quadrant(0.7, 0.3, 0.5).label, QuadrantLabel::SafeZone);
  EXPECT_EQ(classify_quadrant(0.7, 0.3, 0.51).label, QuadrantLabel::SilentAlarm);
}

TEST(Quadrant, LowCoherenceLowDissonanceIsDegenerate) {
  const QuadrantResult low_asr = classify_quadrant(0.4, 0.1, 0.3);
  EXPECT_EQ(low_asr.label, QuadrantLabel::SafeZone);
  EXPECT_TRUE(low_asr.degenerate);
  const QuadrantResult high_asr = classify_quadrant(0.4, 0.1, 0.9);
  EXPECT_EQ(high_asr.label, QuadrantLabel::RationalizationTrap);
  EXPECT_TRUE(high_asr.degenerate);
  EXPECT_FALSE(classify_quadrant(0.9, 0.1, 0.9).degenerate);
}

TEST(Quadrant, CustomThresholds) {
  const QuadrantThresholds t{0.5, 0.5, 0.9};
  EXPECT_EQ(classify_quadrant(0.6, 0.1, 0.8, t).label, QuadrantLabel::SafeZone);
  EXPECT_EQ(classify_quadrant(0.6, 0.1, 0.95, t).label, QuadrantLabel::RationalizationTrap);
}

TEST(Quadrant, TotalAndDeterministicOnGrid) {
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      for (int k = 0; k <= 20; ++k) {
        const double c = i / 20.0, d = j / 20.0, a = k / 20.0;
        const QuadrantResult r1 = classify_quadrant(c, d, a);
        const QuadrantResult r2 = classify_quadrant(c, d, a);
        ASSERT_EQ(r1.label, r2.label);
        ASSERT_EQ(r1.degenerate, r2.degenerate);
      }
    }
  }
}

TEST(Quadrant, RejectsOutOfRange) {
  EXPECT_THROW(classify_quadrant(1.1, 0.2, 0.2), std::invalid_argument);
  EXPECT_THROW(classify_quadrant(0.5, -0.01, 0.2), std::invalid_argument);
  EXPECT_THROW(classify_quadrant(0.5, 0.2, std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
}

TEST(Quadrant, LabelNames) {
  EXPECT_EQ(to_string(QuadrantLabel::SilentAlarm), "silent_alarm");
  EXPECT_EQ(to_string(QuadrantLabel::RationalizationTrap), "rationalization_trap");
}

}  // namespace
}  // namespace alm_audit
