#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xshot/backend.hpp"

namespace xshot {

/// Byte n-gram counts with add-k smoothing and shortest-context backoff.
///
/// P(b | ctx) = (count(ctx b) + k) / (count(ctx) + 256 k), where ctx is the
/// longest suffix of the history (at most order-1 bytes) seen in training and
/// count(ctx) is the number of times ctx was followed by any byte.
class NgramModel {
 public:
  struct Row {
    std::uint64_t total = 0;
    std::vector<std::pair<std::uint8_t, std::uint64_t>> next;  // sorted by byte

    std::uint64_t count(std::uint8_t byte) const;
  };

  static NgramModel train(std::string_view corpus, int order, double add_k);
  static NgramModel train_file(const std::filesystem::path& corpus, int order, double add_k);

  /// Text format: "NGRAM v1 order=<n> addk=<k> vocab=byte" then sorted
  /// "<context-hex>\t<byte-hex>\t<count>" lines.
  std::string serialize() const;
  static NgramModel parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static NgramModel load(const std::filesystem::path& path);

  int order() const { return order_; }
  double add_k() const { return add_k_; }

  /// Longest usable context among the trailing bytes of `history`.
  const Row& resolve(std::string_view history) const;
  double logprob(const Row& row, std::uint8_t byte) const;
  double logprob(std::string_view history, std::uint8_t byte) const { return logprob(resolve(history), byte); }

 private:
  NgramModel(int order, double add_k) : order_(order), add_k_(add_k) {}

  int order_;
  double add_k_;
  std::unordered_map<std::string, Row> rows_;
};

class NgramBackend final : public ByteLanguageModel {
 public:
  explicit NgramBackend(std::shared_ptr<const NgramModel> model, std::size_t context_length = 2048);

  std::unique_ptr<ByteCursor> cursor() const override;
  const NgramModel& model() const { return *model_; }

 private:
  std::shared_ptr<const NgramModel> model_;
};

/// Interpolates the trained corpus model with an n-gram model of the same
/// order and smoothing built from the bytes already seen in the current
/// request: P = lambda * P_window + (1 - lambda) * P_corpus.
class ContextCacheBackend final : public ByteLanguageModel {
 public:
  ContextCacheBackend(std::shared_ptr<const NgramModel> model, double lambda = 0.5, std::size_t context_length = 2048);

  std::unique_ptr<ByteCursor> cursor() const override;
  double lambda() const { return lambda_; }

 private:
  std::shared_ptr<const NgramModel> model_;
  double lambda_;
};

}  // namespace xshot
