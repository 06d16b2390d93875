#include "xshot/cache.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "xshot/digest.hpp"
#include "xshot/error.hpp"
#include "xshot/remote.hpp"
#include "xshot/text.hpp"

namespace xshot {

using nlohmann::json;

namespace {

// Byte-level callers may pass text that is not valid UTF-8, which JSON cannot carry.
json text_field(std::string_view bytes) {
  if (text::is_valid_utf8(bytes)) return std::string(bytes);
  return json{{"hex", text::to_hex(bytes)}};
}

}  // namespace

std::optional<std::filesystem::path> resolve_cache_dir(const std::optional<std::filesystem::path>& configured) {
  if (const char* env = std::getenv(kCacheDirEnv); env != nullptr && *env != '\0') return std::filesystem::path(env);
  return configured;
}

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) throw Error("cache directory " + dir_.string() + " is not writable");
}

std::string DiskCache::key_for(std::string_view backend_id, std::string_view endpoint, const json& request) {
  const json envelope{{"backend_id", backend_id}, {"endpoint", endpoint}, {"request", request}};
  return sha256_hex(canonical_json(envelope));
}

std::filesystem::path DiskCache::entry_path(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::mutex& DiskCache::lock_for(const std::string& key) const {
  return write_locks_[std::hash<std::string>{}(key) % write_locks_.size()];
}

std::optional<json> DiskCache::get(const std::string& key) const {
  std::ifstream in(entry_path(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  const json entry = json::parse(buf.str(), nullptr, false);
  if (entry.is_discarded() || !entry.is_object() || !entry.contains("response") || entry.value("key", "") != key) {
    return std::nullopt;
  }
  return entry["response"];
}

void DiskCache::put(const std::string& key, const json& response) const {
  const auto path = entry_path(key);
  std::lock_guard lock(lock_for(key));
  std::filesystem::create_directories(path.parent_path());
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::this_thread::get_id();
  const auto tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << canonical_json(json{{"key", key}, {"response", response}}) << '\n';
    if (!out) throw Error("failed writing cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CachedBackend::CachedBackend(std::shared_ptr<const LanguageModel> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_(std::move(cache_dir)) {}

template <typename Compute, typename Decode>
auto CachedBackend::memoize(std::string_view endpoint, const json& request, Compute compute, Decode decode) const {
  const std::string key = DiskCache::key_for(inner_->cache_identity(), endpoint, request);
  if (auto stored = cache_.get(key)) {
    try {
      auto value = decode(*stored);
      ++hits_;
      return value;
    } catch (const std::exception&) {
      // Undecodable entry: fall through and overwrite it.
    }
  }
  ++misses_;
  json response = compute();
  auto value = decode(response);
  cache_.put(key, response);
  return value;
}

const LmDescriptor& CachedBackend::descriptor() const {
  std::call_once(info_once_, [this] {
    descriptor_ = memoize(
        "info", json::object(),
        [this] {
          const auto& d = inner_->descriptor();
          return json{{"id", d.id}, {"vocab_size", d.vocab_size}, {"context_length", d.context_length}};
        },
        [](const json& r) {
          LmDescriptor d{r.at("id").get<std::string>(), r.at("vocab_size").get<std::size_t>(),
                         r.at("context_length").get<std::size_t>()};
          d.validate();
          return d;
        });
  });
  return descriptor_;
}

std::vector<TokenId> CachedBackend::tokenize(std::string_view text) const {
  return memoize(
      "tokenize", json{{"text", text_field(text)}},
      [&] { return json{{"tokens", inner_->tokenize(text)}}; },
      [](const json& r) { return r.at("tokens").get<std::vector<TokenId>>(); });
}

ScoredTokens CachedBackend::score(std::string_view text) const {
  return conditional_score({}, text);
}

ScoredTokens CachedBackend::conditional_score(std::string_view context, std::string_view continuation) const {
  return memoize(
      "score", json{{"context", text_field(context)}, {"continuation", text_field(continuation)}},
      [&] { return to_json(inner_->conditional_score(context, continuation)); },
      [](const json& r) { return parse_scored_tokens(r); });
}

std::string CachedBackend::greedy_generate(std::string_view context, const GenerationParams& params) const {
  json stop = json::array();
  for (const auto& s : params.stop_sequences) stop.push_back(text_field(s));
  const json request{{"context", text_field(context)}, {"max_new_tokens", params.max_new_tokens}, {"stop", stop}};
  return memoize(
      // Hex keeps byte-level generations that end mid-character storable.
      "generate", request, [&] { return json{{"text_hex", text::to_hex(inner_->greedy_generate(context, params))}}; },
      [](const json& r) { return text::from_hex(r.at("text_hex").get<std::string>()); });
}

}  // namespace xshot
