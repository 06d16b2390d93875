#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "xshot/cache.hpp"
#include "xshot/remote.hpp"
#include "xshot/task.hpp"

namespace xshot {

class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string cache_identity() const = 0;
  virtual std::string translate(const std::string& text, const LanguageCode& source, const LanguageCode& target) const = 0;
};

/// POST /v1/translate {"text","source","target"} -> {"text"}
class HttpTranslator final : public Translator {
 public:
  explicit HttpTranslator(std::string url, int timeout_seconds = 60);

  std::string cache_identity() const override { return "translator:" + url_; }
  std::string translate(const std::string& text, const LanguageCode& source, const LanguageCode& target) const override;

 private:
  std::string url_;
  HttpEndpoint endpoint_;
  int timeout_seconds_;
};

class CachedTranslator final : public Translator {
 public:
  CachedTranslator(std::shared_ptr<const Translator> inner, std::filesystem::path cache_dir);

  std::string cache_identity() const override { return inner_->cache_identity(); }
  std::string translate(const std::string& text, const LanguageCode& source, const LanguageCode& target) const override;

 private:
  std::shared_ptr<const Translator> inner_;
  DiskCache cache_;
};

/// Translate-test preprocessing: every field text goes through `client`
/// into `target`; ids are kept and lang is retagged to `target`.
/// Examples already in `target` pass through unchanged.
std::vector<Example> translate_test_transform(const std::vector<Example>& examples, const Translator& client,
                                              const LanguageCode& target);

}  // namespace xshot
