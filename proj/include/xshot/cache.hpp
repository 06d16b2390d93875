#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "xshot/backend.hpp"

namespace xshot {

/// Environment variable that overrides any configured cache directory.
inline constexpr const char* kCacheDirEnv = "XSHOT_CACHE_DIR";

/// Returns $XSHOT_CACHE_DIR if set and non-empty, else `configured`.
std::optional<std::filesystem::path> resolve_cache_dir(const std::optional<std::filesystem::path>& configured);

/// Content-addressed JSON response store, one file per key.
///
/// Entries are published with an atomic rename, so readers never see a
/// partial write. Unreadable or mismatched entries read as misses.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir);

  /// Lowercase hex SHA-256 of canonical {backend_id, endpoint, request}.
  static std::string key_for(std::string_view backend_id, std::string_view endpoint, const nlohmann::json& request);

  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& response) const;
  std::filesystem::path entry_path(const std::string& key) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::mutex& lock_for(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::array<std::mutex, 64> write_locks_;
};

/// Memoizes every backend endpoint on disk. A hit never touches the inner backend.
class CachedBackend final : public LanguageModel {
 public:
  CachedBackend(std::shared_ptr<const LanguageModel> inner, std::filesystem::path cache_dir);

  const LmDescriptor& descriptor() const override;
  std::string cache_identity() const override { return inner_->cache_identity(); }
  std::vector<TokenId> tokenize(std::string_view text) const override;
  ScoredTokens score(std::string_view text) const override;
  ScoredTokens conditional_score(std::string_view context, std::string_view continuation) const override;
  std::string greedy_generate(std::string_view context, const GenerationParams& params) const override;

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  template <typename Compute, typename Decode>
  auto memoize(std::string_view endpoint, const nlohmann::json& request, Compute compute, Decode decode) const;

  std::shared_ptr<const LanguageModel> inner_;
  DiskCache cache_;
  mutable std::once_flag info_once_;
  mutable LmDescriptor descriptor_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

}  // namespace xshot
