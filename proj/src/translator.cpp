#include "xshot/translator.hpp"

#include "xshot/error.hpp"
#include "xshot/text.hpp"

namespace xshot {

using nlohmann::json;

HttpTranslator::HttpTranslator(std::string url, int timeout_seconds)
    : url_(std::move(url)), endpoint_(HttpEndpoint::parse(url_)), timeout_seconds_(timeout_seconds) {}

std::string HttpTranslator::translate(const std::string& text, const LanguageCode& source,
                                      const LanguageCode& target) const {
  const json request{{"text", text}, {"source", source.str()}, {"target", target.str()}};
  const json body = http_json(endpoint_, "/v1/translate", &request, timeout_seconds_);
  const auto it = body.find("text");
  if (it == body.end() || !it->is_string()) throw TransportError("/v1/translate: response field \"text\" missing");
  return it->get<std::string>();
}

CachedTranslator::CachedTranslator(std::shared_ptr<const Translator> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_(std::move(cache_dir)) {}

std::string CachedTranslator::translate(const std::string& text, const LanguageCode& source,
                                        const LanguageCode& target) const {
  const json request{{"text", text}, {"source", source.str()}, {"target", target.str()}};
  const auto key = DiskCache::key_for(inner_->cache_identity(), "translate", request);
  if (const auto stored = cache_.get(key); stored && stored->contains("text") && (*stored)["text"].is_string()) {
    return (*stored)["text"].get<std::string>();
  }
  std::string translated = inner_->translate(text, source, target);
  cache_.put(key, json{{"text", translated}});
  return translated;
}

std::vector<Example> translate_test_transform(const std::vector<Example>& examples, const Translator& client,
                                              const LanguageCode& target) {
  std::vector<Example> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    Example translated = ex;
    if (ex.lang != target) {
      for (auto& [name, value] : translated.fields) {
        try {
          value = text::nfc(client.translate(value, ex.lang, target));
        } catch (const Error& e) {
          throw Error("translate-test failed for example '" + ex.id + "' field '" + name + "': " + e.what());
        }
      }
      translated.lang = target;
    }
    out.push_back(std::move(translated));
  }
  return out;
}

}  // namespace xshot
