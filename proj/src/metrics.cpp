#include "alm_audit/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "alm_audit/attacks.hpp"

namespace alm_audit {

namespace {

constexpr std::string_view kNoReasoning = "NON mode has no reasoning";
constexpr std::string_view kNoPerArm = "no PER arm";

std::size_t index_of(ReasoningDimension d) { return static_cast<std::size_t>(d); }

Rate ratio(std::size_t numerator, std::size_t denominator, std::string_view empty_reason) {
  if (denominator == 0) return Rate::absent(std::string(empty_reason));
  return {static_cast<double>(numerator) / static_cast<double>(denominator), denominator, {}};
}

void require_homogeneous(std::span<const JudgedRecord> records, bool need_bits) {
  if (records.empty()) return;
  const auto& first = records.front();
  for (const auto& r : records) {
    if (r.model != first.model || r.mode != first.mode || r.condition != first.condition) {
      throw std::invalid_argument("records mix (model, mode, condition) groups");
    }
    if (need_bits && !r.entail_bits) {
      throw std::invalid_argument("record " + r.sample_id + " has no entailment bits");
    }
  }
  if (need_bits && first.mode != Mode::Rsn) throw std::invalid_argument("entailment metrics need RSN records");
}

Shift difference(const Rate& per, const Rate& org) {
  if (!per.value) return {std::nullopt, "PER absent: " + per.reason};
  if (!org.value) return {std::nullopt, "ORG absent: " + org.reason};
  return {*per.value - *org.value, {}};
}

template <typename Get>
Rate mean_over(std::span<const DimensionCell> cells, Get get) {
  std::vector<Rate> parts;
  parts.reserve(cells.size());
  for (const auto& c : cells) parts.push_back(get(c));
  return unweighted_mean(parts);
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::Non ? "NON" : "RSN"; }
std::string_view to_string(Condition c) { return c == Condition::Org ? "ORG" : "PER"; }
std::string_view to_string(AttackFamily f) { return f == AttackFamily::Acoustic ? "acoustic" : "linguistic"; }
std::string_view to_string(AsrDefinition d) { return d == AsrDefinition::PairedFlip ? "paired_flip" : "raw_per_error"; }

Mode mode_from_string(std::string_view s) {
  if (s == "NON") return Mode::Non;
  if (s == "RSN") return Mode::Rsn;
  throw std::invalid_argument("unknown mode: " + std::string(s));
}

Condition condition_from_string(std::string_view s) {
  if (s == "ORG") return Condition::Org;
  if (s == "PER") return Condition::Per;
  throw std::invalid_argument("unknown condition: " + std::string(s));
}

AsrDefinition asr_definition_from_string(std::string_view s) {
  if (s == "paired_flip") return AsrDefinition::PairedFlip;
  if (s == "raw_per_error") return AsrDefinition::RawPerError;
  throw std::invalid_argument("unknown ASR definition: " + std::string(s));
}

AttackFamily attack_family(std::string_view strategy) {
  for (auto k : {RecipeKind::BackgroundNoise, RecipeKind::TimePitch, RecipeKind::ShapeSpace}) {
    if (strategy == to_string(k)) return AttackFamily::Acoustic;
  }
  return AttackFamily::Linguistic;
}

void validate(const JudgedRecord& r) {
  if (r.sample_id.empty()) throw std::invalid_argument("judged record has empty sample_id");
  if (r.true_label == Verdict::Unparseable) throw std::invalid_argument("true label must be fake or real");
  if (r.condition == Condition::Per && !r.strategy) {
    throw std::invalid_argument("PER record " + r.sample_id + " has no strategy");
  }
  if (r.mode == Mode::Non && r.entail_bits) {
    throw std::invalid_argument("NON record " + r.sample_id + " carries entailment bits");
  }
}

void to_json(nlohmann::json& j, const JudgedRecord& r) {
  j = nlohmann::json{{"sample_id", r.sample_id},
                     {"model", r.model},
                     {"mode", to_string(r.mode)},
                     {"condition", to_string(r.condition)},
                     {"strategy", r.strategy ? nlohmann::json(*r.strategy) : nlohmann::json()},
                     {"voice_profile", r.voice_profile ? nlohmann::json(*r.voice_profile) : nlohmann::json()},
                     {"true_label", to_string(r.true_label)},
                     {"predicted", to_string(r.predicted)}};
  if (r.entail_bits) {
    nlohmann::json bits = nlohmann::json::object();
    for (auto d : kAllDimensions) bits[std::string(dimension_key(d))] = (*r.entail_bits)[index_of(d)] ? 1 : 0;
    j["entail_bits"] = bits;
  } else {
    j["entail_bits"] = nullptr;
  }
  j["flags"] = r.flags;
  j["judge_backend"] = r.judge_backend;
}

void from_json(const nlohmann::json& j, JudgedRecord& r) {
  r.sample_id = j.at("sample_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.mode = mode_from_string(j.at("mode").get<std::string>());
  r.condition = condition_from_string(j.at("condition").get<std::string>());
  r.strategy.reset();
  if (j.contains("strategy") && !j.at("strategy").is_null()) r.strategy = j.at("strategy").get<std::string>();
  r.voice_profile.reset();
  if (j.contains("voice_profile") && !j.at("voice_profile").is_null()) {
    r.voice_profile = j.at("voice_profile").get<std::string>();
  }
  r.true_label = label_from_string(j.at("true_label").get<std::string>());
  r.predicted = verdict_from_string(j.at("predicted").get<std::string>());
  r.entail_bits.reset();
  if (j.contains("entail_bits") && !j.at("entail_bits").is_null()) {
    std::array<bool, kDimensionCount> bits{};
    const auto& obj = j.at("entail_bits");
    for (auto d : kAllDimensions) bits[index_of(d)] = obj.at(std::string(dimension_key(d))).get<int>() != 0;
    r.entail_bits = bits;
  }
  r.flags = j.value("flags", std::vector<std::string>{});
  r.judge_backend = j.value("judge_backend", std::string());
  validate(r);
}

Rate perception_score(std::span<const PerceptionBit> bits, ReasoningDimension d) {
  std::size_t n = 0;
  std::size_t ones = 0;
  for (const auto& b : bits) {
    if (b.dimension != d) continue;
    ++n;
    if (b.bit) ++ones;
  }
  return ratio(ones, n, "no perception bits");
}

Rate coherence_score(std::span<const JudgedRecord> records, ReasoningDimension d) {
  require_homogeneous(records, true);
  std::size_t ones = 0;
  for (const auto& r : records) {
    if ((*r.entail_bits)[index_of(d)]) ++ones;
  }
  return ratio(ones, records.size(), "no records");
}

Rate dissonance(std::span<const JudgedRecord> records, ReasoningDimension d) {
  require_homogeneous(records, true);
  std::size_t wrong = 0;
  std::size_t contradicting = 0;
  for (const auto& r : records) {
    if (r.correct()) continue;
    ++wrong;
    if (!(*r.entail_bits)[index_of(d)]) ++contradicting;
  }
  return ratio(contradicting, wrong, "no wrong predictions");
}

Shift coherence_shift(const Rate& per, const Rate& org) { return difference(per, org); }
Shift dissonance_shift(const Rate& per, const Rate& org) { return difference(per, org); }

Rate original_accuracy(std::span<const JudgedRecord> records) {
  require_homogeneous(records, false);
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (r.condition != Condition::Org) throw std::invalid_argument("original accuracy needs ORG records");
    if (r.correct()) ++correct;
  }
  return ratio(correct, records.size(), "no ORG records");
}

Rate attack_success_rate(std::span<const JudgedRecord> org, std::span<const JudgedRecord> per,
                         AsrDefinition definition) {
  std::unordered_map<std::string, bool> per_correct;
  for (const auto& r : per) {
    if (r.condition != Condition::Per) throw std::invalid_argument("ASR PER side holds an ORG record");
    if (!per_correct.emplace(r.sample_id, r.correct()).second) {
      throw std::invalid_argument("duplicate PER sample id: " + r.sample_id);
    }
  }
  if (definition == AsrDefinition::RawPerError) {
    std::size_t wrong = 0;
    for (const auto& r : per) {
      if (!r.correct()) ++wrong;
    }
    return ratio(wrong, per.size(), "no PER records");
  }
  std::set<std::string> seen;
  std::size_t eligible = 0;
  std::size_t flipped = 0;
  for (const auto& r : org) {
    if (r.condition != Condition::Org) throw std::invalid_argument("ASR ORG side holds a PER record");
    if (!seen.insert(r.sample_id).second) throw std::invalid_argument("duplicate ORG sample id: " + r.sample_id);
    if (!r.correct()) continue;
    const auto it = per_correct.find(r.sample_id);
    if (it == per_correct.end()) continue;
    ++eligible;
    if (!it->second) ++flipped;
  }
  return ratio(flipped, eligible, "no paired samples correct at ORG");
}

Rate unweighted_mean(std::span<const Rate> rates) {
  double sum = 0.0;
  std::size_t present = 0;
  std::size_t denominator = 0;
  std::string first_reason;
  for (const auto& r : rates) {
    if (r.value) {
      sum += *r.value;
      ++present;
      denominator += r.denominator;
    } else if (first_reason.empty()) {
      first_reason = r.reason;
    }
  }
  if (present == 0) return Rate::absent(rates.empty() ? "nothing to average" : first_reason);
  Rate out{sum / static_cast<double>(present), denominator, {}};
  if (present < rates.size()) {
    out.reason = "partial: " + std::to_string(present) + " of " + std::to_string(rates.size()) + " present";
  }
  return out;
}

ModelModeReport aggregate_report(std::span<const JudgedRecord> records, AsrDefinition definition) {
  ModelModeReport out;
  out.asr_definition = definition;
  for (auto& p : out.perception) p = Rate::absent("no perception audit");
  if (records.empty()) return out;
  out.model = records.front().model;
  out.mode = records.front().mode;

  std::vector<JudgedRecord> org;
  std::map<std::string, std::vector<JudgedRecord>> per_by_strategy;
  for (const auto& r : records) {
    validate(r);
    if (r.model != out.model || r.mode != out.mode) throw std::invalid_argument("records mix models or modes");
    if (r.condition == Condition::Org) {
      org.push_back(r);
    } else {
      per_by_strategy[*r.strategy].push_back(r);
    }
  }
  auto by_id = [](const JudgedRecord& a, const JudgedRecord& b) { return a.sample_id < b.sample_id; };
  std::sort(org.begin(), org.end(), by_id);
  for (auto& [_, v] : per_by_strategy) std::sort(v.begin(), v.end(), by_id);

  const bool reasoning = out.mode == Mode::Rsn;

  auto fill = [&](const std::string& name, const std::vector<JudgedRecord>& org_arm,
                  const std::vector<JudgedRecord>* per_arm) {
    StrategyReport s;
    s.strategy = name;
    if (per_arm != nullptr) s.family = attack_family(name);
    s.n_org = org_arm.size();
    s.n_per = per_arm != nullptr ? per_arm->size() : 0;

    for (auto d : kAllDimensions) {
      DimensionCell& c = s.dimensions[index_of(d)];
      c.dimension = d;
      if (!reasoning) {
        c.coh_org = c.coh_per = c.diss_org = c.diss_per = Rate::absent(std::string(kNoReasoning));
      } else {
        c.coh_org = coherence_score(org_arm, d);
        c.diss_org = dissonance(org_arm, d);
        if (per_arm != nullptr) {
          c.coh_per = coherence_score(*per_arm, d);
          c.diss_per = dissonance(*per_arm, d);
        } else {
          c.coh_per = c.diss_per = Rate::absent(std::string(kNoPerArm));
        }
      }
      c.delta_coh = coherence_shift(c.coh_per, c.coh_org);
      c.delta_diss = dissonance_shift(c.diss_per, c.diss_org);
      if (per_arm == nullptr && reasoning) {
        c.delta_coh = c.delta_diss = Shift{std::nullopt, std::string(kNoPerArm)};
      }
    }

    ArmScalars& a = s.scalars;
    a.oc = original_accuracy(org_arm);
    a.asr = per_arm != nullptr ? attack_success_rate(org_arm, *per_arm, definition)
                               : Rate::absent(std::string(kNoPerArm));
    a.coh_org = mean_over(s.dimensions, [](const DimensionCell& c) { return c.coh_org; });
    a.coh_per = mean_over(s.dimensions, [](const DimensionCell& c) { return c.coh_per; });
    a.diss_org = mean_over(s.dimensions, [](const DimensionCell& c) { return c.diss_org; });
    a.diss_per = mean_over(s.dimensions, [](const DimensionCell& c) { return c.diss_per; });
    a.delta_coh = coherence_shift(a.coh_per, a.coh_org);
    a.delta_diss = dissonance_shift(a.diss_per, a.diss_org);
    if (per_arm == nullptr) {
      a.delta_coh = a.delta_diss = Shift{std::nullopt, std::string(kNoPerArm)};
    }
    return s;
  };

  if (per_by_strategy.empty()) {
    out.strategies.push_back(fill(std::string(kNoStrategy), org, nullptr));
    return out;
  }

  for (const auto& [name, per_arm] : per_by_strategy) {
    std::set<std::string> ids;
    for (const auto& r : per_arm) ids.insert(r.sample_id);
    std::vector<JudgedRecord> org_arm;
    for (const auto& r : org) {
      if (ids.contains(r.sample_id)) org_arm.push_back(r);
    }
    out.strategies.push_back(fill(name, org_arm, &per_arm));
  }

  for (auto family : {AttackFamily::Acoustic, AttackFamily::Linguistic}) {
    std::vector<const StrategyReport*> members;
    for (const auto& s : out.strategies) {
      if (s.family == family) members.push_back(&s);
    }
    if (members.empty()) continue;
    FamilySummary f;
    f.family = family;
    auto collect = [&](auto field) {
      std::vector<Rate> parts;
      for (const auto* m : members) parts.push_back(m->scalars.*field);
      return unweighted_mean(parts);
    };
    for (const auto* m : members) f.strategies.push_back(m->strategy);
    f.scalars.oc = collect(&ArmScalars::oc);
    f.scalars.asr = collect(&ArmScalars::asr);
    f.scalars.coh_org = collect(&ArmScalars::coh_org);
    f.scalars.coh_per = collect(&ArmScalars::coh_per);
    f.scalars.diss_org = collect(&ArmScalars::diss_org);
    f.scalars.diss_per = collect(&ArmScalars::diss_per);
    f.scalars.delta_coh = coherence_shift(f.scalars.coh_per, f.scalars.coh_org);
    f.scalars.delta_diss = dissonance_shift(f.scalars.diss_per, f.scalars.diss_org);
    out.families.push_back(std::move(f));
  }
  return out;
}

MetricReport build_metric_report(std::span<const JudgedRecord> records, std::span<const PerceptionBit> perception,
                                 AsrDefinition definition) {
  std::map<std::pair<std::string, Mode>, std::vector<JudgedRecord>> groups;
  for (const auto& r : records) groups[{r.model, r.mode}].push_back(r);

  MetricReport report;
  for (const auto& [key, group] : groups) {
    ModelModeReport entry = aggregate_report(group, definition);
    std::vector<PerceptionBit> mine;
    for (const auto& b : perception) {
      if (b.model == key.first) mine.push_back(b);
    }
    if (!mine.empty()) {
      for (auto d : kAllDimensions) entry.perception[index_of(d)] = perception_score(mine, d);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

void to_json(nlohmann::json& j, const Rate& r) {
  j = nlohmann::json{{"value", r.value ? nlohmann::json(*r.value) : nlohmann::json()},
                     {"denominator", r.denominator},
                     {"reason", r.reason}};
}

void to_json(nlohmann::json& j, const Shift& s) {
  j = nlohmann::json{{"value", s.value ? nlohmann::json(*s.value) : nlohmann::json()}, {"reason", s.reason}};
}

namespace {

nlohmann::json scalars_json(const ArmScalars& a) {
  return nlohmann::json{{"oc", a.oc},           {"asr", a.asr},           {"phi_coh_org", a.coh_org},
                        {"phi_coh_per", a.coh_per}, {"delta_phi", a.delta_coh}, {"psi_diss_org", a.diss_org},
                        {"psi_diss_per", a.diss_per}, {"delta_psi", a.delta_diss}};
}

}  // namespace

void to_json(nlohmann::json& j, const MetricReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json perception = nlohmann::json::object();
    for (auto d : kAllDimensions) perception[std::string(dimension_key(d))] = e.perception[index_of(d)];
    nlohmann::json strategies = nlohmann::json::array();
    for (const auto& s : e.strategies) {
      nlohmann::json dims = nlohmann::json::array();
      for (const auto& c : s.dimensions) {
        dims.push_back({{"dimension", dimension_key(c.dimension)},
                        {"phi_perc", e.perception[index_of(c.dimension)]},
                        {"phi_coh_org", c.coh_org},
                        {"phi_coh_per", c.coh_per},
                        {"delta_phi", c.delta_coh},
                        {"psi_diss_org", c.diss_org},
                        {"psi_diss_per", c.diss_per},
                        {"delta_psi", c.delta_diss}});
      }
      strategies.push_back({{"strategy", s.strategy},
                            {"family", s.family ? nlohmann::json(to_string(*s.family)) : nlohmann::json()},
                            {"n_org", s.n_org},
                            {"n_per", s.n_per},
                            {"scalars", scalars_json(s.scalars)},
                            {"dimensions", dims}});
    }
    nlohmann::json families = nlohmann::json::array();
    for (const auto& f : e.families) {
      families.push_back(
          {{"family", to_string(f.family)}, {"strategies", f.strategies}, {"scalars", scalars_json(f.scalars)}});
    }
    entries.push_back({{"model", e.model},
                       {"mode", to_string(e.mode)},
                       {"asr_definition", to_string(e.asr_definition)},
                       {"perception", perception},
                       {"strategies", strategies},
                       {"families", families}});
  }
  j = nlohmann::json{{"entries", entries}};
}

}  // namespace alm_audit
