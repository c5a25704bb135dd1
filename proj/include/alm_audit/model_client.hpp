#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "alm_audit/audio.hpp"

namespace alm_audit {

// Transport failures are retryable and distinct from a model's answer.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedResponseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::uint64_t> seed;
};

struct EndpointConfig {
  std::string url;  // http[s]://host[:port][/path]
  std::string model;
  // Name of the environment variable holding a bearer token; empty means the
  // endpoint needs no credential.
  std::string api_key_env;
  DecodeParams decode;
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{200};
  std::chrono::milliseconds backoff_cap{5000};
  std::chrono::milliseconds timeout{60000};
};

struct QueryResult {
  std::string text;
  std::string request_id;
  int attempts = 0;
  double latency_ms = 0.0;
  std::optional<long> prompt_tokens;
  std::optional<long> completion_tokens;
};

// JSON-over-HTTP client for an audio language model.
//
// Request body:  {"model", "prompt", "request_id", "temperature", "max_tokens",
//                 ["seed"], ["audio": {"format": "wav", "encoding": "base64", "data"}]}
// Response body: {"text", ["usage": {"prompt_tokens", "completion_tokens"}]}
//
// HTTP 408/429/5xx and connection failures are retried with exponential
// backoff (initial * 2^k, capped) up to max_retries times; 401/403 raise
// AuthError immediately.
class ModelClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit ModelClient(EndpointConfig config, Sleeper sleeper = {});

  const EndpointConfig& config() const { return config_; }

  // `audio` may be null for text-only prompts. Throws AuthError before any
  // network traffic if the configured credential variable is unset.
  QueryResult query(const AudioClip* audio, std::string_view prompt, std::string_view request_id) const;

 private:
  EndpointConfig config_;
  Sleeper sleeper_;
};

QueryResult query_audio_model(const EndpointConfig& endpoint, const AudioClip& audio, std::string_view prompt,
                              std::string_view request_id = "");

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // throws std::invalid_argument

}  // namespace alm_audit
