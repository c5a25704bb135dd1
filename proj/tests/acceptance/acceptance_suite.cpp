// Acceptance checks, one per criterion. Prints a PASS/FAIL line for each
// criterion run and exits nonzero if any failed.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "alm_audit/attacks.hpp"
#include "alm_audit/phase_vocoder.hpp"
#include "alm_audit/report.hpp"
#include "alm_audit/stats.hpp"
#include "alm_audit/trace.hpp"
#include "fixture_corpus.hpp"
#include "mock_alm.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "published_tables.hpp"

namespace alm_audit {
namespace {

namespace fs = std::filesystem;

// Collects failed expectations for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << got << ", want " << want << " +/- " << tol;
    expect(std::isfinite(got) && std::abs(got - want) <= tol, s.str());
  }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AudioClip random_clip(std::uint64_t seed, std::size_t n = 16000) {
  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> g(0.0, 0.2);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return AudioClip(std::move(x), 16000);
}

std::vector<double> tone(double hz, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0);
  return x;
}

bool bit_identical(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

void snr_contract(Checks& c) {
  const auto t0 = Clock::now();
  for (double target : {5.0, 10.0, 15.0, 20.0, 25.0}) {
    for (std::uint64_t k = 0; k < 10; ++k) {
      const AudioClip clean = random_clip(100 + k);
      const AudioClip noisy = add_white_noise(clean, target, k);
      std::vector<double> residual(clean.size());
      for (std::size_t i = 0; i < clean.size(); ++i) residual[i] = noisy[i] - clean[i];
      const double snr = measured_snr_db(clean, AudioClip(std::move(residual), 16000));
      c.near(snr, target, 0.01, "snr target " + std::to_string(target) + " clip " + std::to_string(k));
    }
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 5.0, "runtime " + std::to_string(elapsed) + " s");
}

void time_pitch_properties(Checks& c) {
  const AudioClip x = random_clip(7, 4001);
  const auto n = static_cast<std::int64_t>(x.size());
  c.expect(bit_identical(time_shift(x, n).samples(), x.samples()), "shift by N is identity");
  c.expect(bit_identical(time_shift(x, 3 * n).samples(), x.samples()), "shift by 3N is identity");
  for (auto [a, b] : {std::pair<std::int64_t, std::int64_t>{3, 5}, {700, 1234}, {4000, 4000}, {0, 17}}) {
    c.expect(bit_identical(time_shift(time_shift(x, a), b).samples(), time_shift(x, a + b).samples()),
             "shift composition " + std::to_string(a) + "+" + std::to_string(b));
  }
  const std::size_t hop = VocoderConfig{}.hop;
  for (double ratio : {0.90, 0.95, 1.05, 1.10}) {
    const auto y = phase_vocoder_stretch(tone(440.0, 16000), ratio);
    const auto want = static_cast<double>(std::lround(16000 * ratio));
    c.near(static_cast<double>(y.size()), want, static_cast<double>(hop), "stretch length at " + std::to_string(ratio));
    if (y.size() <= 4096) continue;
    const std::span<const double> middle(y.data() + 2048, y.size() - 4096);
    c.near(testing::dft_peak_hz(middle, 16000, 400.0, 480.0), 440.0, 4.0, "peak at " + std::to_string(ratio));
  }
}

void echo_fade_volume(Checks& c) {
  std::vector<double> impulse(4000, 0.0);
  impulse[0] = 1.0;
  const AudioClip unit(impulse, 16000);
  const AudioClip echoed = add_echo(unit, 1500, 0.35);
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < echoed.size(); ++i) {
    if (echoed[i] != 0.0) nonzero.push_back(i);
  }
  c.expect(nonzero == std::vector<std::size_t>{0, 1500}, "echo impulse has two taps at 0 and delay");
  if (nonzero.size() == 2) {
    c.expect(echoed[0] == 1.0, "direct tap is unity");
    c.expect(echoed[1500] == 0.35, "echo tap equals strength");
  }
  const AudioClip x = random_clip(11);
  c.expect(bit_identical(add_echo(x, 800, 0.0).samples(), x.samples()), "zero-strength echo is identity");
  for (double k : {0.25, 0.5, 1.7, 3.0}) c.near(rms(change_volume(x, k)) / rms(x), k, 1e-12, "volume factor");

  for (auto dir : {FadeDirection::FadeIn, FadeDirection::FadeOut}) {
    for (auto shape : {FadeShape::Linear, FadeShape::Logarithmic, FadeShape::Exponential, FadeShape::Sine}) {
      const double fraction = 0.3;
      const AudioClip y = apply_fade(x, shape, dir, fraction);
      const auto ramp = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(x.size())));
      const std::size_t begin = dir == FadeDirection::FadeIn ? ramp : 0;
      const std::size_t end = dir == FadeDirection::FadeIn ? x.size() : x.size() - ramp;
      c.expect(bit_identical(y.samples().subspan(begin, end - begin), x.samples().subspan(begin, end - begin)),
               "fade leaves untouched region bit-identical (" + std::string(to_string(shape)) + ", " +
                   std::string(to_string(dir)) + ")");
    }
  }
}

template <typename T>
bool same(const std::optional<double>& got, const std::optional<T>& want) {
  return got.has_value() == want.has_value() && (!got || *got == *want);
}

void metric_oracles(Checks& c) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto inst = testing::random_instance(seed, 200);
    const std::string at = " seed " + std::to_string(seed);
    c.expect(inst.org.size() + inst.per.size() <= 200, "instance size" + at);
    for (auto d : kAllDimensions) {
      for (const auto* arm : {&inst.org, &inst.per}) {
        c.expect(same(coherence_score(*arm, d).value, testing::naive_coherence(*arm, d)), "coherence" + at);
        c.expect(same(dissonance(*arm, d).value, testing::naive_dissonance(*arm, d)), "dissonance" + at);
      }
      const auto cp = testing::naive_coherence(inst.per, d), co = testing::naive_coherence(inst.org, d);
      const auto dp = testing::naive_dissonance(inst.per, d), dn = testing::naive_dissonance(inst.org, d);
      std::optional<double> want_dc, want_dd;
      if (cp && co) want_dc.emplace(*cp - *co);
      if (dp && dn) want_dd.emplace(*dp - *dn);
      c.expect(same(coherence_shift(coherence_score(inst.per, d), coherence_score(inst.org, d)).value, want_dc),
               "coherence shift" + at);
      c.expect(same(dissonance_shift(dissonance(inst.per, d), dissonance(inst.org, d)).value, want_dd),
               "dissonance shift" + at);
    }
    c.expect(same(original_accuracy(inst.org).value, testing::naive_accuracy(inst.org)), "OC" + at);
    c.expect(same(attack_success_rate(inst.org, inst.per, AsrDefinition::PairedFlip).value,
                  testing::naive_paired_flip(inst.org, inst.per)),
             "paired flip" + at);
    c.expect(same(attack_success_rate(inst.org, inst.per, AsrDefinition::RawPerError).value,
                  testing::naive_raw_error(inst.per)),
             "raw PER error" + at);
  }
}

void table_reconstruction(Checks& c) {
  auto check = [&](std::span<const testing::ArmRow> rows, std::span<const testing::SummaryRow> summary) {
    for (const auto& s : summary) {
      std::vector<Rate> coh_per, diss_per, coh_org, diss_org;
      for (const auto& r : rows) {
        if (r.model != s.model) continue;
        coh_per.push_back(Rate{r.coh_per / 100.0, 1, {}});
        diss_per.push_back(Rate{r.diss_per / 100.0, 1, {}});
        coh_org.push_back(Rate{r.coh_org / 100.0, 1, {}});
        diss_org.push_back(Rate{r.diss_org / 100.0, 1, {}});
      }
      const std::string m(s.model);
      const auto pct = [](const std::vector<Rate>& v) { return 100.0 * unweighted_mean(v).value.value_or(NAN); };
      c.near(pct(coh_per), s.coh_per, 0.05 + 1e-9, m + " coherence PER mean");
      c.near(pct(diss_per), s.diss_per, 0.05 + 1e-9, m + " dissonance PER mean");
      c.near(s.coh_per - s.coh_delta, pct(coh_org), 0.1 + 1e-9, m + " coherence PER - delta");
      c.near(s.diss_per - s.diss_delta, pct(diss_org), 0.1 + 1e-9, m + " dissonance PER - delta");
    }
  };
  check(testing::kAcousticArms, testing::kAcousticSummary);
  check(testing::kLinguisticArms, testing::kLinguisticSummary);
}

void statistics(Checks& c) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {3, 4, 5, 6};
  const TestResult w = welch_t_test(a, b);
  c.near(w.statistic, -2.449, 0.001, "Welch t");
  c.near(w.degrees_of_freedom, 6.0, 1e-9, "Welch df");
  c.near(w.p_value, 0.0499, 0.001, "Welch p");

  std::vector<double> coh, diss;
  for (const auto rows : {static_cast<std::span<const testing::ArmRow>>(testing::kAcousticArms),
                           static_cast<std::span<const testing::ArmRow>>(testing::kLinguisticArms)}) {
    for (const auto& r : rows) {
      coh.push_back(r.coh_per / 100.0);
      diss.push_back(r.diss_per / 100.0);
    }
  }
  c.expect(coh.size() == 28, "28 transcribed pairs");
  const TestResult p = pearson_r(coh, diss);
  c.expect(p.statistic <= -0.6, "Pearson r " + std::to_string(p.statistic) + " <= -0.6");
}

void quadrant_fidelity(Checks& c) {
  struct Point {
    const char* name;
    double coh, diss, asr;
    QuadrantLabel want;
  };
  const Point points[] = {{"gemma american_female", 0.953, 0.047, 1.000, QuadrantLabel::RationalizationTrap},
                          {"gemma shape_space", 0.376, 0.782, 0.481, QuadrantLabel::PanicResponse},
                          {"Qwen2 linguistic", 0.806, 0.096, 0.315, QuadrantLabel::SafeZone}};
  for (const auto& p : points) {
    const QuadrantLabel got = classify_quadrant(p.coh, p.diss, p.asr).label;
    c.expect(got == p.want, std::string(p.name) + ": got " + std::string(to_string(got)) + ", want " +
                                std::string(to_string(p.want)));
  }
}

std::string fuzz_input(std::uint64_t seed) {
  static const std::array<std::string_view, 14> pieces = {
      "- Prosody:", "- Conclusion:", "**Quality**:", "$fake$", "$real$", "$fake$ or $real$", "$", "\n",
      "Speed",      ":",             "\r\n",         "\xff",   "\0",     "- - -"};
  boost::random::mt19937_64 rng(seed ^ 0x5eedULL);
  boost::random::uniform_int_distribution<int> count(0, 60), pick(0, 13), byte(0, 255), coin(0, 2);
  std::string s;
  for (int i = count(rng); i > 0; --i) {
    if (coin(rng) == 0) {
      s.push_back(static_cast<char>(byte(rng)));
    } else {
      s += pieces[pick(rng)];
    }
  }
  return s;
}

void parser_robustness(Checks& c) {
  const fs::path fixtures = fs::path(ALM_SOURCE_DIR) / "tests" / "fixtures";
  for (auto [file, want] : {std::pair{"exemplar_fake.txt", Verdict::Fake}, {"exemplar_real.txt", Verdict::Real}}) {
    const ReasoningTrace t = parse_trace(slurp(fixtures / file));
    c.expect(t.verdict == want, std::string(file) + " verdict");
    c.expect(t.aspects.size() == kDimensionCount, std::string(file) + " has all six aspects");
    for (const auto& [d, body] : t.aspects) c.expect(!body.empty(), std::string(file) + " non-empty aspect");
  }
  c.expect(parse_trace("$fake$ or $real$").verdict == Verdict::Unparseable, "template phrase alone is unparseable");
  std::size_t thrown = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    try {
      const ReasoningTrace t = parse_trace(fuzz_input(s));
      (void)validate_trace(t);
    } catch (...) {
      ++thrown;
    }
  }
  c.expect(thrown == 0, std::to_string(thrown) + " fuzzed inputs raised");
}

void end_to_end_determinism(Checks& c) {
  const auto t0 = Clock::now();
  const fs::path corpus = testing::bundled_corpus_dir();
  const fs::path root = fs::temp_directory_path() / ("alm_audit_acceptance_e2e_" + std::to_string(::getpid()));
  fs::remove_all(root);
  testing::MockAlmServer server;
  server.start();
  std::vector<fs::path> runs;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = root / name;
    fs::create_directories(dir);
    testing::write_fixture_config(dir / "config.json", corpus, server.url());
    const RunConfig config = load_run_config(dir / "config.json");
    const auto r = testing::run_pipeline(config, dir / "run");
    c.expect(r.failures() == 0, std::string("run ") + name + " had " + std::to_string(r.failures()) + " failures");
    runs.push_back(dir / "run" / layout::kReportDir);
  }
  for (const char* file : kReportFiles) {
    const std::string a = slurp(runs[0] / file);
    c.expect(!a.empty(), std::string(file) + " is non-empty");
    c.expect(a == slurp(runs[1] / file), std::string(file) + " is byte-identical");
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 60.0, "runtime " + std::to_string(elapsed) + " s");
}

struct Criterion {
  int number;
  const char* title;
  std::function<void(Checks&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "SNR contract", snr_contract},
      {2, "time/pitch properties", time_pitch_properties},
      {3, "echo/fade/volume", echo_fade_volume},
      {4, "metric oracle equivalence", metric_oracles},
      {5, "table reconstruction", table_reconstruction},
      {6, "statistics", statistics},
      {7, "quadrant fidelity", quadrant_fidelity},
      {8, "parser robustness", parser_robustness},
      {9, "end-to-end determinism", end_to_end_determinism},
  };
  return all;
}

bool run(const Criterion& k) {
  Checks c;
  try {
    k.run(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("threw: ") + e.what());
  }
  const bool ok = c.failures().empty();
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << k.number << ": " << k.title << "\n";
  for (const auto& f : c.failures()) std::cout << "    " << f << "\n";
  return ok;
}

}  // namespace
}  // namespace alm_audit

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  bool all_ok = true;
  for (const auto& k : alm_audit::criteria()) {
    if (only != 0 && k.number != only) continue;
    all_ok = alm_audit::run(k) && all_ok;
  }
  return all_ok ? 0 : 1;
}
