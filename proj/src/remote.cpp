#include "xshot/remote.hpp"

#include <cmath>

#include <httplib.h>

#include "xshot/error.hpp"

namespace xshot {

using nlohmann::json;

HttpEndpoint HttpEndpoint::parse(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.substr(0, scheme) != "http") {
    throw Error("unsupported URL '" + url + "' (expected http://host:port[/prefix])");
  }
  const auto path = url.find('/', scheme + 3);
  HttpEndpoint endpoint;
  endpoint.origin = url.substr(0, path);
  if (path != std::string::npos) {
    endpoint.prefix = url.substr(path);
    while (endpoint.prefix.ends_with('/')) endpoint.prefix.pop_back();
  }
  return endpoint;
}

json http_json(const HttpEndpoint& endpoint, const std::string& path, const json* body, int timeout_seconds) {
  const std::string target = endpoint.prefix + path;
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(timeout_seconds);
    client.set_read_timeout(timeout_seconds);
    client.set_write_timeout(timeout_seconds);
    const auto result = body == nullptr ? client.Get(target) : client.Post(target, body->dump(), "application/json");
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw TransportError(endpoint.origin + target + ": HTTP " + std::to_string(result->status) + ": " + result->body);
    }
    try {
      return json::parse(result->body);
    } catch (const json::parse_error& e) {
      throw TransportError(endpoint.origin + target + ": malformed JSON response: " + e.what());
    }
  }
  throw TransportError(endpoint.origin + target + ": request failed after retry: " + last_error);
}

namespace {

const json& member(const json& body, const char* key, json::value_t type, const std::string& endpoint) {
  const auto it = body.find(key);
  const bool ok = it != body.end() &&
                  (it->type() == type || (type == json::value_t::number_integer && it->is_number_integer()) ||
                   (type == json::value_t::number_float && it->is_number()));
  if (!ok) throw TransportError(endpoint + ": response field \"" + key + "\" missing or mistyped");
  return *it;
}

std::vector<TokenId> parse_tokens(const json& array, const std::string& endpoint) {
  std::vector<TokenId> tokens;
  tokens.reserve(array.size());
  for (const auto& t : array) {
    if (!t.is_number_integer()) throw TransportError(endpoint + ": token ids must be integers");
    tokens.push_back(t.get<TokenId>());
  }
  return tokens;
}

}  // namespace

ScoredTokens parse_scored_tokens(const json& body) {
  const std::string where = "/v1/score";
  if (!body.is_object()) throw TransportError(where + ": response is not an object");
  ScoredTokens out;
  out.tokens = parse_tokens(member(body, "tokens", json::value_t::array, where), where);
  double scale = 1.0;
  if (const auto base = body.find("log_base"); base != body.end()) {
    if (!base->is_number() || base->get<double>() <= 1.0) throw TransportError(where + ": invalid log_base");
    scale = std::log(base->get<double>());
  }
  for (const auto& lp : member(body, "logprobs", json::value_t::array, where)) {
    if (!lp.is_number()) throw TransportError(where + ": logprobs must be numbers");
    out.logprobs.push_back(lp.get<double>() * scale);
  }
  out.validate();
  return out;
}

json to_json(const ScoredTokens& scored) { return json{{"tokens", scored.tokens}, {"logprobs", scored.logprobs}}; }

RemoteBackend::RemoteBackend(std::string url, int max_in_flight, int timeout_seconds)
    : url_(std::move(url)),
      endpoint_(HttpEndpoint::parse(url_)),
      timeout_seconds_(timeout_seconds),
      in_flight_(std::max(1, std::min(max_in_flight, 1024))) {}

json RemoteBackend::call(const std::string& path, const json* body) const {
  in_flight_.acquire();
  try {
    auto result = http_json(endpoint_, path, body, timeout_seconds_);
    in_flight_.release();
    return result;
  } catch (...) {
    in_flight_.release();
    throw;
  }
}

const LmDescriptor& RemoteBackend::descriptor() const {
  std::call_once(info_once_, [this] {
    const json info = call("/v1/info", nullptr);
    const std::string where = "/v1/info";
    LmDescriptor d;
    d.id = member(info, "id", json::value_t::string, where).get<std::string>();
    d.vocab_size = member(info, "vocab_size", json::value_t::number_integer, where).get<std::size_t>();
    d.context_length = member(info, "context_length", json::value_t::number_integer, where).get<std::size_t>();
    d.validate();
    descriptor_ = std::move(d);
  });
  return descriptor_;
}

std::vector<TokenId> RemoteBackend::tokenize(std::string_view text) const {
  const json request{{"text", std::string(text)}};
  const json body = call("/v1/tokenize", &request);
  return parse_tokens(member(body, "tokens", json::value_t::array, "/v1/tokenize"), "/v1/tokenize");
}

ScoredTokens RemoteBackend::conditional_score(std::string_view context, std::string_view continuation) const {
  const json request{{"context", std::string(context)}, {"continuation", std::string(continuation)}};
  return parse_scored_tokens(call("/v1/score", &request));
}

std::string RemoteBackend::greedy_generate(std::string_view context, const GenerationParams& params) const {
  if (params.max_new_tokens < 1) throw Error("max_new_tokens must be at least 1");
  const json request{{"context", std::string(context)},
                     {"max_new_tokens", params.max_new_tokens},
                     {"stop", params.stop_sequences}};
  const json body = call("/v1/generate", &request);
  return member(body, "text", json::value_t::string, "/v1/generate").get<std::string>();
}

}  // namespace xshot
