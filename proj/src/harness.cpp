#include "alm_audit/harness.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <toml.hpp>

#include "alm_audit/audio.hpp"
#include "alm_audit/judge.hpp"
#include "alm_audit/parallel.hpp"
#include "alm_audit/prompts.hpp"
#include "alm_audit/report.hpp"
#include "alm_audit/seeding.hpp"

namespace alm_audit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// files

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw ConfigError("write failed for " + path.string());
}

// Audit trails are append-only: a stage output that already exists is never
// replaced.
void refuse_existing(const fs::path& path) {
  if (fs::exists(path)) throw ConfigError("refusing to overwrite existing output " + path.string());
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  refuse_existing(path);
  std::string body;
  for (const auto& r : rows) body += r.dump() + "\n";
  write_text(path, body);
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing stage input " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return rows;
}

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(); }

std::optional<std::string> get_optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

// ---------------------------------------------------------------------------
// config reading

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  template <typename T>
  std::optional<T> optional(const char* key) {
    const json* v = find(key);
    if (v == nullptr) return std::nullopt;
    try {
      return v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  template <typename T>
  T required(const char* key) {
    auto v = optional<T>(key);
    if (!v) throw ConfigError(where_ + "." + key + " is required");
    return *v;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown key " + where_ + "." + key);
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

void read_endpoint_fields(ObjectReader& r, EndpointConfig& e) {
  e.url = r.required<std::string>("url");
  if (auto v = r.optional<std::string>("model")) e.model = *v;
  if (auto v = r.optional<std::string>("api_key_env")) e.api_key_env = *v;
  if (auto v = r.optional<double>("temperature")) e.decode.temperature = *v;
  if (auto v = r.optional<int>("max_tokens")) e.decode.max_tokens = *v;
  if (auto v = r.optional<std::uint64_t>("seed")) e.decode.seed = *v;
  if (auto v = r.optional<int>("max_retries")) e.max_retries = *v;
  if (auto v = r.optional<long>("backoff_initial_ms")) e.backoff_initial = std::chrono::milliseconds(*v);
  if (auto v = r.optional<long>("backoff_cap_ms")) e.backoff_cap = std::chrono::milliseconds(*v);
  if (auto v = r.optional<long>("timeout_ms")) e.timeout = std::chrono::milliseconds(*v);
  if (e.max_retries < 0) throw ConfigError(r.where() + ".max_retries must be >= 0");
  if (e.decode.max_tokens <= 0) throw ConfigError(r.where() + ".max_tokens must be positive");
}

json endpoint_json(const EndpointConfig& e) {
  return json{{"url", e.url},
              {"model", e.model},
              {"api_key_env", e.api_key_env},
              {"temperature", e.decode.temperature},
              {"max_tokens", e.decode.max_tokens},
              {"seed", e.decode.seed ? json(*e.decode.seed) : json()},
              {"max_retries", e.max_retries}};
}

// ---------------------------------------------------------------------------
// stage helpers

std::string reasoning_prompt(const RunConfig& config) {
  return config.prompt ? read_text(*config.prompt) : std::string(kCotPrompt);
}

std::vector<std::string> noise_corpus(const RunConfig& config) {
  std::vector<std::string> names;
  if (!config.noise_dir) return names;
  for (const auto& e : fs::directory_iterator(*config.noise_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

bool has_prefix(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// Flags marking an item that never produced a model answer. Such records are
// kept in every stage output but left out of metric computation.
bool operational_failure(const std::vector<std::string>& flags) {
  for (const auto& f : flags) {
    for (std::string_view p : {"transport_failed", "perturb_failed", "audio_error", "malformed_response"}) {
      if (has_prefix(f, p)) return true;
    }
  }
  return false;
}

struct InferItem {
  std::string sample_id;  // join key
  std::string audio_id;
  Condition condition = Condition::Org;
  std::optional<std::string> strategy;
  std::optional<std::string> voice_profile;
  Verdict true_label = Verdict::Fake;
  std::optional<fs::path> audio;
  std::vector<std::string> flags;  // pre-existing failures
};

std::unique_ptr<JudgeBackend> make_judge(const RunConfig& config) {
  if (config.judge.backend == "stub") return std::make_unique<StubJudge>();
  return std::make_unique<RemoteJudge>(*config.judge.endpoint);
}

std::vector<JudgedRecord> load_judged(const fs::path& in_dir, std::size_t& excluded) {
  std::vector<JudgedRecord> records;
  excluded = 0;
  for (const auto& row : read_jsonl(in_dir / layout::kJudged)) {
    auto r = row.get<JudgedRecord>();
    if (operational_failure(r.flags)) {
      ++excluded;
      continue;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PerceptionBit> load_perception(const fs::path& in_dir) {
  std::vector<PerceptionBit> bits;
  if (!fs::exists(in_dir / layout::kPerception)) return bits;
  for (const auto& row : read_jsonl(in_dir / layout::kPerception)) bits.push_back(row.get<PerceptionBit>());
  return bits;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Dev:
      return "dev";
    case Split::Eval:
      return "eval";
    case Split::Audit:
      return "audit";
  }
  return "eval";
}

Split split_from_string(std::string_view s) {
  for (auto v : {Split::Train, Split::Dev, Split::Eval, Split::Audit}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown split: " + std::string(s));
}

std::vector<ManifestEntry> ingest_manifest(const fs::path& path, const fs::path& audio_root) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::size_t> first_line;
  std::vector<std::string> missing;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string at = path.string() + ":" + std::to_string(number);
    ManifestEntry e;
    e.line = number;
    try {
      const json j = json::parse(line);
      ObjectReader r(j, at);
      e.sample_id = r.required<std::string>("sample_id");
      e.audio_path = r.required<std::string>("audio_path");
      e.true_label = label_from_string(r.required<std::string>("true_label"));
      e.split = split_from_string(r.optional<std::string>("split").value_or("eval"));
      e.voice_profile = r.optional<std::string>("voice_profile");
      e.attack_provenance = r.optional<std::string>("attack_provenance");
      r.finish();
    } catch (const json::exception& ex) {
      throw ConfigError(at + ": malformed line: " + ex.what());
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(at + ": " + ex.what());
    }
    if (e.sample_id.empty()) throw ConfigError(at + ": empty sample_id");
    if (const auto [it, fresh] = first_line.emplace(e.sample_id, number); !fresh) {
      throw ConfigError("duplicate sample_id " + e.sample_id + " on lines " + std::to_string(it->second) + " and " +
                        std::to_string(number));
    }
    if (!fs::is_regular_file(audio_root / e.audio_path)) {
      missing.push_back("line " + std::to_string(number) + ": " + (audio_root / e.audio_path).string());
    }
    entries.push_back(std::move(e));
  }
  if (!missing.empty()) {
    std::string msg = "missing audio files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ConfigError(msg);
  }
  // A linguistic arm joins its clean source on sample id, so each source may
  // appear once per voice profile.
  std::map<std::pair<std::string, std::string>, std::size_t> pairing;
  for (const auto& e : entries) {
    if (!e.attack_provenance) continue;
    const std::string at = path.string() + ":" + std::to_string(e.line);
    if (!first_line.contains(*e.attack_provenance)) {
      throw ConfigError(at + ": attack_provenance " + *e.attack_provenance + " is not in the manifest");
    }
    const auto [it, fresh] = pairing.emplace(std::pair{*e.attack_provenance, e.voice_profile.value_or("")}, e.line);
    if (!fresh) {
      throw ConfigError(at + ": source " + *e.attack_provenance + " already attacked with this voice profile on line " +
                        std::to_string(it->second));
    }
  }
  return entries;
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  ObjectReader r(j, "config");
  c.manifest = resolve(base_dir, r.required<std::string>("manifest"));
  const auto audio_root = r.optional<std::string>("audio_root");
  c.audio_root = audio_root ? resolve(base_dir, *audio_root) : c.manifest.parent_path();
  if (auto v = r.optional<std::string>("prompt")) c.prompt = resolve(base_dir, *v);
  if (auto v = r.optional<std::string>("noise_dir")) c.noise_dir = resolve(base_dir, *v);
  if (auto v = r.optional<std::string>("question_bank")) c.question_bank = resolve(base_dir, *v);
  if (auto v = r.optional<std::string>("audit_ground_truth")) c.audit_ground_truth = resolve(base_dir, *v);
  if (auto v = r.optional<std::string>("output_root")) c.output_root = resolve(base_dir, *v);
  if (auto v = r.optional<std::int64_t>("concurrency")) {
    if (*v < 1) throw ConfigError("config.concurrency must be >= 1");
    c.concurrency = static_cast<std::size_t>(*v);
  }
  if (auto v = r.optional<std::uint64_t>("run_seed")) c.run_seed = *v;
  if (auto v = r.optional<bool>("majority_vote")) c.majority_vote = *v;
  try {
    if (auto v = r.optional<std::string>("asr_definition")) c.asr_definition = asr_definition_from_string(*v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.asr_definition: ") + e.what());
  }

  if (const json* q = r.find("quadrant")) {
    ObjectReader qr(*q, "config.quadrant");
    if (auto v = qr.optional<double>("coh_hi")) c.thresholds.coh_hi = *v;
    if (auto v = qr.optional<double>("diss_hi")) c.thresholds.diss_hi = *v;
    if (auto v = qr.optional<double>("asr_hi")) c.thresholds.asr_hi = *v;
    qr.finish();
  }

  const json* models = r.find("models");
  if (models == nullptr || !models->is_array() || models->empty()) {
    throw ConfigError("config.models must be a non-empty array");
  }
  for (std::size_t i = 0; i < models->size(); ++i) {
    ObjectReader mr((*models)[i], "config.models[" + std::to_string(i) + "]");
    ModelSpec m;
    m.name = mr.required<std::string>("name");
    try {
      m.mode = mode_from_string(mr.optional<std::string>("mode").value_or("RSN"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(mr.where() + ".mode: " + e.what());
    }
    read_endpoint_fields(mr, m.endpoint);
    if (m.endpoint.model.empty()) m.endpoint.model = m.name;
    mr.finish();
    c.models.push_back(std::move(m));
  }

  if (const json* recipes = r.find("recipes")) {
    if (!recipes->is_array()) throw ConfigError("config.recipes must be an array");
    for (std::size_t i = 0; i < recipes->size(); ++i) {
      ObjectReader rr((*recipes)[i], "config.recipes[" + std::to_string(i) + "]");
      RecipeSpec s;
      try {
        s.kind = recipe_kind_from_string(rr.required<std::string>("kind"));
      } catch (const std::exception& e) {
        throw ConfigError(rr.where() + ".kind: " + e.what());
      }
      s.seed = rr.optional<std::uint64_t>("seed").value_or(0);
      rr.finish();
      c.recipes.push_back(s);
    }
  }

  if (const json* judge = r.find("judge")) {
    ObjectReader jr(*judge, "config.judge");
    c.judge.backend = jr.optional<std::string>("backend").value_or("stub");
    if (c.judge.backend == "remote") {
      EndpointConfig e;
      read_endpoint_fields(jr, e);
      if (e.model.empty()) throw ConfigError("config.judge.model is required for the remote backend");
      c.judge.endpoint = e;
    } else if (c.judge.backend != "stub") {
      throw ConfigError("config.judge.backend must be \"stub\" or \"remote\"");
    }
    jr.finish();
  }
  r.finish();
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  if (c.concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (c.models.empty()) throw ConfigError("no models configured");
  std::set<std::pair<std::string, Mode>> keys;
  for (const auto& m : c.models) {
    if (m.name.empty()) throw ConfigError("model name is empty");
    if (m.name.find_first_of("/\\:") != std::string::npos) throw ConfigError("model name has a path character: " + m.name);
    if (!keys.emplace(m.name, m.mode).second) {
      throw ConfigError("model " + m.name + " listed twice for mode " + std::string(to_string(m.mode)));
    }
  }
  std::set<RecipeKind> kinds;
  for (const auto& rs : c.recipes) {
    if (!kinds.insert(rs.kind).second) throw ConfigError("recipe " + std::string(to_string(rs.kind)) + " listed twice");
  }
  for (double t : {c.thresholds.coh_hi, c.thresholds.diss_hi, c.thresholds.asr_hi}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("quadrant thresholds must lie in [0,1]");
  }
  auto must_exist = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  must_exist(c.manifest, "manifest");
  must_exist(c.audio_root, "audio root");
  if (c.prompt) must_exist(*c.prompt, "prompt asset");
  if (c.noise_dir) must_exist(*c.noise_dir, "noise directory");
  if (c.question_bank) must_exist(*c.question_bank, "question bank");
  if (c.audit_ground_truth) must_exist(*c.audit_ground_truth, "audit ground truth");
  if (c.judge.backend == "remote" && !c.judge.endpoint) throw ConfigError("remote judge needs an endpoint");
}

RunConfig load_run_config(const fs::path& path) {
  const std::string text = read_text(path);
  json j;
  if (path.extension() == ".toml") {
    try {
      const toml::table table = toml::parse(text, path.string());
      std::ostringstream ss;
      ss << toml::json_formatter{table};
      j = json::parse(ss.str());
    } catch (const toml::parse_error& e) {
      throw ConfigError(path.string() + ": " + std::string(e.description()));
    }
  } else {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return run_config_from_json(j, path.parent_path());
}

std::string perturbed_id(std::string_view sample_id, RecipeKind recipe) {
  return std::string(sample_id) + "__" + std::string(to_string(recipe));
}

std::vector<ManifestEntry> clean_entries(const std::vector<ManifestEntry>& manifest) {
  std::vector<ManifestEntry> out;
  for (const auto& e : manifest) {
    if (e.split != Split::Audit && !e.attack_provenance) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  return out;
}

void write_run_metadata(const RunConfig& config, const fs::path& run_dir) {
  json models = json::array();
  for (const auto& m : config.models) {
    json e = endpoint_json(m.endpoint);
    e["name"] = m.name;
    e["mode"] = to_string(m.mode);
    models.push_back(e);
  }
  json recipes = json::array();
  for (const auto& r : config.recipes) recipes.push_back({{"kind", to_string(r.kind)}, {"seed", r.seed}});
  const json meta = {{"run_seed", config.run_seed},
                     {"models", models},
                     {"recipes", recipes},
                     {"judge_backend", config.judge.backend},
                     {"judge_endpoint", config.judge.endpoint ? endpoint_json(*config.judge.endpoint) : json()},
                     {"classify_prompt", kClassifyPrompt},
                     {"reasoning_prompt", reasoning_prompt(config)},
                     {"asr_definition", to_string(config.asr_definition)},
                     {"majority_vote", config.majority_vote},
                     {"quadrant",
                      {{"coh_hi", config.thresholds.coh_hi},
                       {"diss_hi", config.thresholds.diss_hi},
                       {"asr_hi", config.thresholds.asr_hi}}}};
  const std::string body = meta.dump(2) + "\n";
  const fs::path path = run_dir / layout::kRunMetadata;
  if (fs::exists(path)) {
    if (read_text(path) != body) throw ConfigError(run_dir.string() + " belongs to a run with a different configuration");
    return;
  }
  write_text(path, body);
}

StageResult run_perturb(const RunConfig& config, const std::vector<ManifestEntry>& manifest, const fs::path& run_dir) {
  const fs::path index_path = run_dir / layout::kPerturbIndex;
  refuse_existing(index_path);
  fs::create_directories(run_dir / layout::kPerturbDir);

  const auto entries = clean_entries(manifest);
  const auto corpus = noise_corpus(config);
  const NoiseLoader loader = [&](const std::string& name) {
    if (!config.noise_dir) throw AttackError("no noise directory configured");
    return load_wav(*config.noise_dir / name);
  };

  struct Job {
    const ManifestEntry* entry;
    RecipeSpec recipe;
  };
  std::vector<Job> jobs;
  for (const auto& e : entries) {
    for (const auto& r : config.recipes) jobs.push_back({&e, r});
  }

  std::vector<json> index(jobs.size());
  parallel_for(jobs.size(), config.concurrency, [&](std::size_t i) {
    const auto& [entry, recipe] = jobs[i];
    const std::string recipe_key(to_string(recipe.kind));
    const std::string id = perturbed_id(entry->sample_id, recipe.kind);
    json row = {{"sample_id", entry->sample_id}, {"recipe", recipe_key}, {"audio_id", id}};
    try {
      const std::uint64_t seed = derive_seed(config.run_seed, entry->sample_id, recipe_key, recipe.seed);
      const PerturbationSpec spec = sample_recipe(recipe.kind, seed, corpus);
      const AudioClip clean = load_wav(config.audio_root / entry->audio_path);
      const AudioClip attacked = apply(spec, clean, loader);
      const fs::path wav = fs::path(layout::kPerturbDir) / (id + ".wav");
      const fs::path sidecar = fs::path(layout::kPerturbDir) / (id + ".json");
      refuse_existing(run_dir / wav);
      save_wav(attacked, run_dir / wav);
      const json side = {{"sample_id", entry->sample_id}, {"recipe", recipe_key}, {"audio_id", id}, {"spec", spec}};
      write_text(run_dir / sidecar, side.dump(2) + "\n");
      row["status"] = "ok";
      row["wav"] = wav.generic_string();
      row["sidecar"] = sidecar.generic_string();
    } catch (const std::exception& ex) {
      row["status"] = "error";
      row["error"] = ex.what();
      spdlog::warn("perturb {} failed: {}", id, ex.what());
    }
    index[i] = std::move(row);
  });

  StageResult result{jobs.size(), 0};
  for (const auto& row : index) {
    if (row.at("status") != "ok") ++result.failures;
  }
  write_jsonl(index_path, index);
  return result;
}

StageResult run_infer(const RunConfig& config, const std::vector<ManifestEntry>& manifest, const fs::path& in_dir,
                      const fs::path& out_dir) {
  const fs::path out_path = out_dir / layout::kInferOutputs;
  refuse_existing(out_path);

  std::vector<InferItem> items;
  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : manifest) by_id[e.sample_id] = &e;

  for (const auto& e : clean_entries(manifest)) {
    items.push_back({e.sample_id, e.sample_id, Condition::Org, std::nullopt, e.voice_profile, e.true_label,
                     config.audio_root / e.audio_path, {}});
  }
  if (!config.recipes.empty()) {
    for (const auto& row : read_jsonl(in_dir / layout::kPerturbIndex)) {
      const auto sample_id = row.at("sample_id").get<std::string>();
      const auto it = by_id.find(sample_id);
      if (it == by_id.end()) throw ConfigError("perturb index names unknown sample " + sample_id);
      InferItem item{sample_id,
                     row.at("audio_id").get<std::string>(),
                     Condition::Per,
                     row.at("recipe").get<std::string>(),
                     it->second->voice_profile,
                     it->second->true_label,
                     std::nullopt,
                     {}};
      if (row.at("status") == "ok") {
        item.audio = in_dir / row.at("wav").get<std::string>();
      } else {
        item.flags.push_back("perturb_failed: " + row.value("error", std::string()));
      }
      items.push_back(std::move(item));
    }
  }
  for (const auto& e : manifest) {
    if (e.split == Split::Audit || !e.attack_provenance) continue;
    items.push_back({*e.attack_provenance, e.sample_id, Condition::Per,
                     e.voice_profile.value_or(std::string("linguistic")), e.voice_profile, e.true_label,
                     config.audio_root / e.audio_path, {}});
  }

  const std::string cot = reasoning_prompt(config);
  struct Job {
    const ModelSpec* model;
    const InferItem* item;
  };
  std::vector<Job> jobs;
  for (const auto& m : config.models) {
    for (const auto& it : items) jobs.push_back({&m, &it});
  }
  auto key = [](const Job& j) {
    return std::make_tuple(j.model->name, to_string(j.model->mode), to_string(j.item->condition),
                           j.item->strategy.value_or(""), j.item->sample_id, j.item->audio_id);
  };
  std::sort(jobs.begin(), jobs.end(), [&](const Job& a, const Job& b) { return key(a) < key(b); });

  std::vector<json> rows(jobs.size());
  parallel_for(jobs.size(), config.concurrency, [&](std::size_t i) {
    const auto& [model, item] = jobs[i];
    const bool reasoning = model->mode == Mode::Rsn;
    const std::string request_id = model->name + ":" + std::string(to_string(model->mode)) + ":" + item->audio_id;
    json row = {{"sample_id", item->sample_id},
                {"audio_id", item->audio_id},
                {"model", model->name},
                {"mode", to_string(model->mode)},
                {"condition", to_string(item->condition)},
                {"strategy", optional_string(item->strategy)},
                {"voice_profile", optional_string(item->voice_profile)},
                {"true_label", to_string(item->true_label)},
                {"request_id", request_id},
                {"prompt", reasoning ? "reasoning" : "classify"}};
    std::vector<std::string> flags = item->flags;
    json generations = json::array();
    int attempts = 0;
    if (flags.empty()) {
      try {
        const AudioClip clip = load_wav(*item->audio);
        const int count = config.majority_vote ? 3 : 1;
        for (int g = 0; g < count; ++g) {
          EndpointConfig endpoint = model->endpoint;
          std::string rid = request_id;
          if (count > 1) {
            rid += "#g" + std::to_string(g + 1);
            endpoint.decode.seed = mix_seed(endpoint.decode.seed.value_or(config.run_seed), static_cast<std::uint64_t>(g));
          }
          const auto result = ModelClient(endpoint).query(&clip, reasoning ? std::string_view(cot) : kClassifyPrompt, rid);
          attempts += result.attempts;
          generations.push_back(result.text);
        }
      } catch (const AuthError&) {
        throw;
      } catch (const TransportError& e) {
        flags.push_back(std::string("transport_failed: ") + e.what());
      } catch (const MalformedResponseError& e) {
        flags.push_back(std::string("malformed_response: ") + e.what());
      } catch (const AudioError& e) {
        flags.push_back(std::string("audio_error: ") + e.what());
      }
    }
    if (!flags.empty()) generations = json::array();
    row["generations"] = generations;
    row["attempts"] = attempts;
    row["flags"] = flags;
    rows[i] = std::move(row);
  });

  StageResult result{rows.size(), 0};
  for (const auto& r : rows) {
    if (!r.at("flags").empty()) ++result.failures;
  }
  write_jsonl(out_path, rows);
  return result;
}

StageResult run_judge(const RunConfig& config, const fs::path& in_dir, const fs::path& out_dir) {
  const fs::path out_path = out_dir / layout::kJudged;
  refuse_existing(out_path);
  const auto rows = read_jsonl(in_dir / layout::kInferOutputs);
  auto backend = make_judge(config);

  std::vector<json> judged(rows.size());
  std::vector<int> failed(rows.size(), 0);
  parallel_for(rows.size(), config.concurrency, [&](std::size_t i) {
    const json& row = rows[i];
    JudgedRecord r;
    r.sample_id = row.at("sample_id").get<std::string>();
    r.model = row.at("model").get<std::string>();
    r.mode = mode_from_string(row.at("mode").get<std::string>());
    r.condition = condition_from_string(row.at("condition").get<std::string>());
    r.strategy = get_optional_string(row, "strategy");
    r.voice_profile = get_optional_string(row, "voice_profile");
    r.true_label = label_from_string(row.at("true_label").get<std::string>());
    r.flags = row.at("flags").get<std::vector<std::string>>();
    r.judge_backend = backend->name();
    const auto generations = row.at("generations").get<std::vector<std::string>>();

    if (r.mode == Mode::Rsn) r.entail_bits = std::array<bool, kDimensionCount>{};
    if (operational_failure(r.flags) || generations.empty()) {
      r.predicted = Verdict::Unparseable;
      failed[i] = 1;
      judged[i] = r;
      return;
    }

    std::vector<ReasoningTrace> traces;
    std::vector<Verdict> verdicts;
    for (const auto& g : generations) {
      traces.push_back(parse_trace(g));
      verdicts.push_back(r.mode == Mode::Rsn ? traces.back().verdict : extract_verdict(g));
    }
    r.predicted = verdicts.size() == 3 ? majority_vote(verdicts) : verdicts.front();

    if (r.mode == Mode::Rsn) {
      // The trace whose own verdict agrees with the vote carries the aspects.
      const ReasoningTrace* trace = &traces.front();
      for (std::size_t k = 0; k < traces.size(); ++k) {
        if (verdicts[k] == r.predicted) {
          trace = &traces[k];
          break;
        }
      }
      if (r.predicted == Verdict::Unparseable) r.flags.push_back("unparseable verdict");
      for (auto d : kAllDimensions) {
        const auto it = trace->aspects.find(d);
        if (it == trace->aspects.end()) {
          r.flags.push_back("missing aspect: " + std::string(dimension_title(d)));
          continue;
        }
        if (r.predicted == Verdict::Unparseable) continue;
        try {
          const EntailOutcome o = entail(*backend, it->second, r.predicted);
          (*r.entail_bits)[static_cast<std::size_t>(d)] = o.bit;
          if (o.flag) r.flags.push_back(*o.flag + ": " + std::string(dimension_title(d)));
        } catch (const AuthError&) {
          throw;
        } catch (const std::runtime_error& e) {
          r.flags.push_back("judge_failed: " + std::string(dimension_title(d)) + ": " + e.what());
          failed[i] = 1;
        }
      }
    }
    judged[i] = r;
  });

  write_jsonl(out_path, judged);
  StageResult result{rows.size(), 0};
  for (int f : failed) result.failures += static_cast<std::size_t>(f);
  return result;
}

StageResult run_audit(const RunConfig& config, const std::vector<ManifestEntry>& manifest, const fs::path& out_dir) {
  const fs::path out_path = out_dir / layout::kPerception;
  refuse_existing(out_path);

  std::vector<const ManifestEntry*> audit;
  for (const auto& e : manifest) {
    if (e.split == Split::Audit) audit.push_back(&e);
  }
  std::sort(audit.begin(), audit.end(), [](auto* a, auto* b) { return a->sample_id < b->sample_id; });

  std::vector<json> rows;
  StageResult result;
  if (!audit.empty()) {
    if (!config.audit_ground_truth) throw ConfigError("audit split present but no audit_ground_truth configured");
    const QuestionBank bank = config.question_bank ? load_question_bank(*config.question_bank) : default_question_bank();
    const AuditGroundTruth truth = load_audit_ground_truth(*config.audit_ground_truth);
    std::vector<AuditSample> samples;
    for (const auto* e : audit) {
      const auto it = truth.find(e->sample_id);
      if (it == truth.end()) throw ConfigError("no audit ground truth for " + e->sample_id);
      samples.push_back({e->sample_id, load_wav(config.audio_root / e->audio_path), it->second});
    }

    std::set<std::string> asked;
    for (const auto& m : config.models) {
      if (!asked.insert(m.name).second) continue;
      RemoteJudge listener(m.endpoint);
      std::vector<PerceptionBit> bits;
      try {
        bits = run_perception_audit(bank, samples, listener, config.concurrency);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("audit: ") + e.what());
      }
      for (auto& b : bits) {
        b.model = m.name;
        ++result.items;
        if (!b.flags.empty()) ++result.failures;
        rows.push_back(b);
      }
    }
  }
  write_jsonl(out_path, rows);
  return result;
}

StageResult run_metrics(const RunConfig& config, const fs::path& in_dir, const fs::path& out_dir) {
  const fs::path dir = out_dir / layout::kMetricsDir;
  for (const char* name : {"metrics.csv", "metrics.json"}) refuse_existing(dir / name);
  std::size_t excluded = 0;
  const auto records = load_judged(in_dir, excluded);
  const auto bits = load_perception(in_dir);
  const MetricReport report = build_metric_report(records, bits, config.asr_definition);
  const json j = report;
  write_text(dir / "metrics.csv", render_metrics_csv(report));
  write_text(dir / "metrics.json", j.dump(2) + "\n");
  if (excluded > 0) spdlog::warn("{} judged records without a model answer were left out of the metrics", excluded);
  return {records.size() + excluded, excluded};
}

StageResult run_metrics_and_report(const RunConfig& config, const fs::path& in_dir, const fs::path& out_dir) {
  const fs::path dir = out_dir / layout::kReportDir;
  for (const char* name : kReportFiles) refuse_existing(dir / name);
  std::size_t excluded = 0;
  const auto records = load_judged(in_dir, excluded);
  const auto bits = load_perception(in_dir);
  const MetricReport report = build_metric_report(records, bits, config.asr_definition);
  const StatsBundle stats = compute_statistics(report);
  try {
    emit_report(report, stats, dir, config.thresholds);
  } catch (const ReportError& e) {
    throw ConfigError(e.what());
  }
  if (excluded > 0) spdlog::warn("{} judged records without a model answer were left out of the report", excluded);
  return {records.size() + excluded, excluded};
}

}  // namespace alm_audit
