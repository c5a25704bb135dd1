#include "alm_audit/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace alm_audit {

namespace {

constexpr const char* kEol = "\r\n";

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string count_field(const Rate& r) { return r.value ? std::to_string(r.denominator) : std::string(); }

void note(std::vector<std::string>& reasons, std::string_view field, const std::string& reason) {
  if (!reason.empty()) reasons.push_back(std::string(field) + ": " + reason);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_field(fields[i]);
  }
  return out + kEol;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw ReportError("write failed for " + path.string());
}

std::vector<double> values(const std::vector<LandscapePoint>& pts, AttackFamily family, Rate LandscapePoint::*field) {
  std::vector<double> out;
  for (const auto& p : pts) {
    if (p.family == family && (p.*field).value) out.push_back(*(p.*field).value);
  }
  return out;
}

}  // namespace

std::string render_metrics_csv(const MetricReport& report) {
  std::string out = row({"model", "mode", "strategy", "family", "dimension", "phi_perc", "phi_perc_n", "phi_coh_org",
                         "phi_coh_org_n", "phi_coh_per", "phi_coh_per_n", "delta_phi", "psi_diss_org",
                         "psi_diss_org_n", "psi_diss_per", "psi_diss_per_n", "delta_psi", "oc", "oc_n", "asr", "asr_n",
                         "asr_definition", "reason"});
  for (const auto& e : report.entries) {
    for (const auto& s : e.strategies) {
      for (const auto& c : s.dimensions) {
        const Rate& perc = e.perception[static_cast<std::size_t>(c.dimension)];
        std::vector<std::string> reasons;
        note(reasons, "phi_perc", perc.reason);
        note(reasons, "phi_coh_org", c.coh_org.reason);
        note(reasons, "phi_coh_per", c.coh_per.reason);
        note(reasons, "delta_phi", c.delta_coh.reason);
        note(reasons, "psi_diss_org", c.diss_org.reason);
        note(reasons, "psi_diss_per", c.diss_per.reason);
        note(reasons, "delta_psi", c.delta_diss.reason);
        note(reasons, "oc", s.scalars.oc.reason);
        note(reasons, "asr", s.scalars.asr.reason);
        out += row({e.model,
                    std::string(to_string(e.mode)),
                    s.strategy,
                    s.family ? std::string(to_string(*s.family)) : std::string(),
                    std::string(dimension_key(c.dimension)),
                    format_percent(perc.value),
                    count_field(perc),
                    format_percent(c.coh_org.value),
                    count_field(c.coh_org),
                    format_percent(c.coh_per.value),
                    count_field(c.coh_per),
                    format_percent(c.delta_coh.value),
                    format_percent(c.diss_org.value),
                    count_field(c.diss_org),
                    format_percent(c.diss_per.value),
                    count_field(c.diss_per),
                    format_percent(c.delta_diss.value),
                    format_percent(s.scalars.oc.value),
                    count_field(s.scalars.oc),
                    format_percent(s.scalars.asr.value),
                    count_field(s.scalars.asr),
                    std::string(to_string(e.asr_definition)),
                    join(reasons, "; ")});
      }
    }
  }
  return out;
}

std::string render_landscape_csv(const std::vector<LandscapePoint>& pts, const QuadrantThresholds& thresholds) {
  std::string out =
      row({"model", "strategy", "family", "asr", "phi_coh_per", "psi_diss_per", "quadrant", "degenerate", "reason"});
  for (const auto& p : pts) {
    std::string quadrant;
    std::string degenerate;
    std::vector<std::string> reasons;
    note(reasons, "asr", p.asr.reason);
    note(reasons, "phi_coh_per", p.coh_per.reason);
    note(reasons, "psi_diss_per", p.diss_per.reason);
    if (p.asr.value && p.coh_per.value && p.diss_per.value) {
      const auto q = classify_quadrant(*p.coh_per.value, *p.diss_per.value, *p.asr.value, thresholds);
      quadrant = to_string(q.label);
      degenerate = q.degenerate ? "1" : "0";
    }
    out += row({p.model, p.strategy, std::string(to_string(p.family)), format_percent(p.asr.value),
                format_percent(p.coh_per.value), format_percent(p.diss_per.value), quadrant, degenerate,
                join(reasons, "; ")});
  }
  return out;
}

namespace {

std::string percent_or_dash(const Rate& r) { return r.value ? format_percent(r.value) : std::string("-"); }

std::string shift_or_dash(const Shift& s) {
  if (!s.value) return "-";
  const std::string v = format_percent(s.value);
  return v.front() == '-' ? v : "+" + v;
}

}  // namespace

std::string render_summary(const MetricReport& report, const StatsBundle& stats, const QuadrantThresholds& thresholds) {
  std::ostringstream out;
  out << "Reasoning robustness report\n";
  out << "quadrant thresholds: coh " << format_fixed(thresholds.coh_hi, 2) << ", diss "
      << format_fixed(thresholds.diss_hi, 2) << ", asr " << format_fixed(thresholds.asr_hi, 2) << "\n";
  for (const auto& e : report.entries) {
    out << "\n" << e.model << " [" << to_string(e.mode) << "] asr=" << to_string(e.asr_definition) << "\n";
    for (const auto& s : e.strategies) {
      const auto& a = s.scalars;
      out << "  " << s.strategy << " (n_org " << s.n_org << ", n_per " << s.n_per << "): OC " << percent_or_dash(a.oc)
          << "  ASR " << percent_or_dash(a.asr) << "  Coh " << percent_or_dash(a.coh_org) << " -> "
          << percent_or_dash(a.coh_per) << " (" << shift_or_dash(a.delta_coh) << ")  Diss "
          << percent_or_dash(a.diss_org) << " -> " << percent_or_dash(a.diss_per) << " ("
          << shift_or_dash(a.delta_diss) << ")\n";
    }
    for (const auto& f : e.families) {
      const auto& a = f.scalars;
      out << "  = " << to_string(f.family) << " mean over " << f.strategies.size() << ": OC " << percent_or_dash(a.oc)
          << "  ASR " << percent_or_dash(a.asr) << "  Coh PER " << percent_or_dash(a.coh_per) << " ("
          << shift_or_dash(a.delta_coh) << ")  Diss PER " << percent_or_dash(a.diss_per) << " ("
          << shift_or_dash(a.delta_diss) << ")\n";
    }
  }
  out << "\nStatistics\n";
  for (const auto& t : stats.tests) {
    out << "  " << t.name << ": statistic " << format_fixed(t.result.statistic, 4) << ", df "
        << format_fixed(t.result.degrees_of_freedom, 2) << ", p " << format_fixed(t.result.p_value, 4) << " (n "
        << t.result.n1 << "/" << t.result.n2 << ")\n";
  }
  for (const auto& i : stats.intervals) {
    out << "  " << i.name << ": " << format_percent(i.interval.mean) << " [" << format_percent(i.interval.lower)
        << ", " << format_percent(i.interval.upper) << "] (n " << i.interval.n << ")\n";
  }
  for (const auto& s : stats.skipped) out << "  " << s.name << ": skipped, " << s.reason << "\n";
  return out.str();
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_percent(const std::optional<double>& fraction) {
  if (!fraction) return {};
  return format_fixed(*fraction * 100.0, 1);
}

std::vector<LandscapePoint> landscape_points(const MetricReport& report) {
  std::vector<LandscapePoint> out;
  for (const auto& e : report.entries) {
    if (e.mode != Mode::Rsn) continue;
    for (const auto& s : e.strategies) {
      if (!s.family) continue;
      out.push_back({e.model, s.strategy, *s.family, s.scalars.asr, s.scalars.coh_per, s.scalars.diss_per});
    }
  }
  return out;
}

StatsBundle compute_statistics(const MetricReport& report) {
  const auto pts = landscape_points(report);
  StatsBundle out;

  auto try_test = [&](const std::string& name, auto fn) {
    try {
      out.tests.push_back({name, fn()});
    } catch (const std::invalid_argument& e) {
      out.skipped.push_back({name, e.what()});
    }
  };

  const auto diss_ac = values(pts, AttackFamily::Acoustic, &LandscapePoint::diss_per);
  const auto diss_li = values(pts, AttackFamily::Linguistic, &LandscapePoint::diss_per);
  const auto coh_ac = values(pts, AttackFamily::Acoustic, &LandscapePoint::coh_per);
  const auto coh_li = values(pts, AttackFamily::Linguistic, &LandscapePoint::coh_per);

  try_test("dissonance_linguistic_vs_acoustic", [&] { return welch_t_test(diss_li, diss_ac); });
  try_test("coherence_acoustic_vs_linguistic", [&] { return welch_t_test(coh_ac, coh_li); });

  std::vector<double> coh;
  std::vector<double> diss;
  for (const auto& p : pts) {
    if (p.coh_per.value && p.diss_per.value) {
      coh.push_back(*p.coh_per.value);
      diss.push_back(*p.diss_per.value);
    }
  }
  try_test("coherence_vs_dissonance", [&] { return pearson_r(coh, diss); });

  const std::pair<const char*, Rate LandscapePoint::*> metrics[] = {
      {"asr", &LandscapePoint::asr}, {"phi_coh_per", &LandscapePoint::coh_per}, {"psi_diss_per", &LandscapePoint::diss_per}};
  for (const auto& [metric, field] : metrics) {
    for (auto family : {AttackFamily::Acoustic, AttackFamily::Linguistic}) {
      const std::string name = std::string(metric) + "_" + std::string(to_string(family)) + "_ci95";
      const auto xs = values(pts, family, field);
      try {
        out.intervals.push_back({name, mean_ci95(xs)});
      } catch (const std::invalid_argument& e) {
        out.skipped.push_back({name, e.what()});
      }
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const StatsBundle& stats) {
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : stats.tests) {
    tests.push_back({{"name", t.name},
                     {"statistic", t.result.statistic},
                     {"df", t.result.degrees_of_freedom},
                     {"p_value", t.result.p_value},
                     {"n1", t.result.n1},
                     {"n2", t.result.n2}});
  }
  nlohmann::json intervals = nlohmann::json::array();
  for (const auto& i : stats.intervals) {
    intervals.push_back({{"name", i.name},
                         {"mean", i.interval.mean},
                         {"lower", i.interval.lower},
                         {"upper", i.interval.upper},
                         {"n", i.interval.n}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : stats.skipped) skipped.push_back({{"name", s.name}, {"reason", s.reason}});
  j = nlohmann::json{{"tests", tests}, {"intervals", intervals}, {"skipped", skipped}};
}

void emit_report(const MetricReport& report, const StatsBundle& stats, const std::filesystem::path& out_dir,
                 const QuadrantThresholds& thresholds) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ReportError("cannot create " + out_dir.string() + ": " + ec.message());

  nlohmann::json metrics = report;
  nlohmann::json stats_json = stats;
  write_file(out_dir / "metrics.csv", render_metrics_csv(report));
  write_file(out_dir / "metrics.json", metrics.dump(2) + "\n");
  write_file(out_dir / "landscape_points.csv", render_landscape_csv(landscape_points(report), thresholds));
  write_file(out_dir / "stats.json", stats_json.dump(2) + "\n");
  write_file(out_dir / "summary.txt", render_summary(report, stats, thresholds));
}

}  // namespace alm_audit
