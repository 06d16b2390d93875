#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "xshot/backend.hpp"

namespace xshot {

/// Splits "http://host:port/prefix" into the scheme-host-port part and a path prefix.
struct HttpEndpoint {
  std::string origin;  // "http://host:port"
  std::string prefix;  // "" or "/prefix"

  static HttpEndpoint parse(const std::string& url);
};

/// POSTs (or GETs when `body` is null) JSON, retrying once on a transport
/// failure or 5xx. Throws TransportError on the second failure.
nlohmann::json http_json(const HttpEndpoint& endpoint, const std::string& path, const nlohmann::json* body,
                         int timeout_seconds = 60);

/// Client for the JSON-over-HTTP model protocol:
///   GET  /v1/info      -> {"id","vocab_size","context_length"}
///   POST /v1/tokenize  {"text"}                          -> {"tokens"}
///   POST /v1/score     {"context","continuation"}        -> {"tokens","logprobs"}
///   POST /v1/generate  {"context","max_new_tokens","stop"} -> {"text"}
class RemoteBackend final : public LanguageModel {
 public:
  explicit RemoteBackend(std::string url, int max_in_flight = 4, int timeout_seconds = 60);

  /// Fetched from /v1/info on first use.
  const LmDescriptor& descriptor() const override;
  std::string cache_identity() const override { return "remote:" + url_; }

  std::vector<TokenId> tokenize(std::string_view text) const override;
  ScoredTokens score(std::string_view text) const override { return conditional_score({}, text); }
  ScoredTokens conditional_score(std::string_view context, std::string_view continuation) const override;
  std::string greedy_generate(std::string_view context, const GenerationParams& params) const override;

 private:
  nlohmann::json call(const std::string& path, const nlohmann::json* body) const;

  std::string url_;
  HttpEndpoint endpoint_;
  int timeout_seconds_;
  mutable std::counting_semaphore<1024> in_flight_;
  mutable std::once_flag info_once_;
  mutable LmDescriptor descriptor_;
};

/// Ingests a /v1/score response body, converting from "log_base" (default e).
ScoredTokens parse_scored_tokens(const nlohmann::json& body);
nlohmann::json to_json(const ScoredTokens& scored);

}  // namespace xshot
