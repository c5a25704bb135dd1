#include "alm_audit/model_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

namespace alm_audit {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint url needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw std::invalid_argument("unsupported url scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::optional<long> optional_long(const nlohmann::json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number_integer()) return std::nullopt;
  return obj.at(key).get<long>();
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                      static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int written = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                      static_cast<int>(text.size()));
  if (written < 0) throw std::invalid_argument("invalid base64");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(written) - padding);
  return out;
}

ModelClient::ModelClient(EndpointConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

QueryResult ModelClient::query(const AudioClip* audio, std::string_view prompt, std::string_view request_id) const {
  std::string token;
  if (!config_.api_key_env.empty()) {
    const char* value = std::getenv(config_.api_key_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw AuthError("credential variable " + config_.api_key_env + " is not set");
    }
    token = value;
  }

  const ParsedUrl url = split_url(config_.url);

  nlohmann::json body = {{"model", config_.model},
                         {"prompt", prompt},
                         {"request_id", request_id},
                         {"temperature", config_.decode.temperature},
                         {"max_tokens", config_.decode.max_tokens}};
  if (config_.decode.seed) body["seed"] = *config_.decode.seed;
  if (audio != nullptr) {
    body["audio"] = {{"format", "wav"}, {"encoding", "base64"}, {"data", base64_encode(encode_wav(*audio))}};
  }
  const std::string payload = body.dump();

  httplib::Client client(url.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers = {{"X-Request-Id", std::string(request_id)}};
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

  const auto started = std::chrono::steady_clock::now();
  std::string last_error;
  const int max_attempts = std::max(1, config_.max_retries + 1);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    auto response = client.Post(url.path, headers, payload, "application/json");
    if (!response) {
      last_error = "connection failed: " + httplib::to_string(response.error());
    } else if (response->status == 401 || response->status == 403) {
      throw AuthError("endpoint rejected credential (HTTP " + std::to_string(response->status) + ")");
    } else if (response->status == 200) {
      nlohmann::json parsed = nlohmann::json::parse(response->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("text") || !parsed.at("text").is_string()) {
        throw MalformedResponseError("response lacks a string \"text\" field");
      }
      QueryResult result;
      result.text = parsed.at("text").get<std::string>();
      result.request_id = std::string(request_id);
      result.attempts = attempt;
      result.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      if (parsed.contains("usage")) {
        result.prompt_tokens = optional_long(parsed.at("usage"), "prompt_tokens");
        result.completion_tokens = optional_long(parsed.at("usage"), "completion_tokens");
      }
      spdlog::debug("request {} model {} attempts {} latency {:.1f} ms tokens {}/{}", result.request_id,
                    config_.model, attempt, result.latency_ms, result.prompt_tokens.value_or(-1),
                    result.completion_tokens.value_or(-1));
      return result;
    } else if (!retryable_status(response->status)) {
      throw TransportError("endpoint returned HTTP " + std::to_string(response->status));
    } else {
      last_error = "HTTP " + std::to_string(response->status);
    }

    if (attempt < max_attempts) {
      const std::chrono::milliseconds delay = config_.backoff_initial * (1LL << std::min(attempt - 1, 20));
      sleeper_(std::min(delay, config_.backoff_cap));
    }
  }
  spdlog::warn("request {} model {} failed after {} attempts: {}", request_id, config_.model, max_attempts,
               last_error);
  throw TransportError("retries exhausted after " + std::to_string(max_attempts) + " attempts: " + last_error);
}

QueryResult query_audio_model(const EndpointConfig& endpoint, const AudioClip& audio, std::string_view prompt,
                              std::string_view request_id) {
  return ModelClient(endpoint).query(&audio, prompt, request_id);
}

}  // namespace alm_audit
