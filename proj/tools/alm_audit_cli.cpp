#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "alm_audit/harness.hpp"

namespace fs = std::filesystem;
using namespace alm_audit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> out;
  std::optional<std::string> in;
  std::optional<std::size_t> concurrency;
  bool verbose = false;
};

fs::path default_run_dir(const RunConfig& config) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
  return config.output_root / ("run-" + std::string(stamp) + "-" + std::to_string(config.run_seed));
}

int run(const std::string& stage, const Options& opt) {
  RunConfig config = load_run_config(opt.config);
  if (opt.run_seed) config.run_seed = *opt.run_seed;
  if (opt.concurrency) {
    if (*opt.concurrency < 1) throw ConfigError("--concurrency must be >= 1");
    config.concurrency = *opt.concurrency;
  }
  const fs::path out = opt.out ? fs::path(*opt.out) : default_run_dir(config);
  const fs::path in = opt.in ? fs::path(*opt.in) : out;
  fs::create_directories(out);
  write_run_metadata(config, out);
  spdlog::info("run directory {}", out.string());

  const bool needs_manifest = stage == "perturb" || stage == "infer" || stage == "audit" || stage == "all";
  std::vector<ManifestEntry> manifest;
  if (needs_manifest) manifest = ingest_manifest(config.manifest, config.audio_root);

  std::size_t failures = 0;
  auto report = [&](const char* name, const StageResult& r) {
    spdlog::info("{}: {} items, {} flagged", name, r.items, r.failures);
    failures += r.failures;
  };

  if (stage == "perturb" || stage == "all") report("perturb", run_perturb(config, manifest, out));
  if (stage == "infer" || stage == "all") report("infer", run_infer(config, manifest, stage == "all" ? out : in, out));
  if (stage == "judge" || stage == "all") report("judge", run_judge(config, stage == "all" ? out : in, out));
  if (stage == "audit" || stage == "all") report("audit", run_audit(config, manifest, out));
  if (stage == "metrics" || stage == "all") report("metrics", run_metrics(config, stage == "all" ? out : in, out));
  if (stage == "report" || stage == "all") {
    report("report", run_metrics_and_report(config, stage == "all" ? out : in, out));
  }
  return failures == 0 ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forensic audit of audio language model reasoning under adversarial audio"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "Run configuration (TOML or JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--run-seed", opt.run_seed, "Seed from which every per-sample attack seed derives");
  app.add_option("--out", opt.out, "Run directory to write into");
  app.add_option("--in", opt.in, "Run directory holding the previous stage's outputs (default: --out)");
  app.add_option("--concurrency", opt.concurrency, "Worker limit");
  app.add_flag("-v,--verbose", opt.verbose, "Log every request");

  const std::pair<const char*, const char*> stages[] = {
      {"perturb", "Apply the configured attack recipes to the clean corpus"},
      {"infer", "Query every model on clean and perturbed audio"},
      {"judge", "Parse verdicts and judge aspect entailment"},
      {"metrics", "Compute the metric tables"},
      {"report", "Compute metrics, statistics and the landscape, and write the report"},
      {"audit", "Run the perception audit on the audit split"},
      {"all", "Run every stage in order"},
  };
  for (const auto& [name, help] : stages) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("alm-audit"));
  spdlog::set_level(opt.verbose ? spdlog::level::debug : spdlog::level::info);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    return run(stage, opt);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const AuthError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitPartial;
  }
}
