#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace xshot {

using TokenId = std::int32_t;

struct LmDescriptor {
  std::string id;
  std::size_t vocab_size = 0;
  std::size_t context_length = 0;

  /// Throws unless vocab_size >= 2 and context_length >= 8.
  void validate() const;
};

/// Natural-log conditionals aligned with their tokens.
struct ScoredTokens {
  std::vector<TokenId> tokens;
  std::vector<double> logprobs;

  double sum() const;
  std::size_t size() const { return tokens.size(); }
  /// Throws if lengths differ or any logprob is positive or NaN.
  void validate() const;

  friend bool operator==(const ScoredTokens&, const ScoredTokens&) = default;
};

struct GenerationParams {
  std::size_t max_new_tokens = 64;
  std::vector<std::string> stop_sequences;
};

/// Scoring and generation surface shared by every model backend.
/// Implementations must be safe for concurrent calls.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const LmDescriptor& descriptor() const = 0;
  /// Identity used for cache keys. Must not require contacting a server.
  virtual std::string cache_identity() const { return descriptor().id; }

  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  virtual ScoredTokens score(std::string_view text) const { return conditional_score({}, text); }
  /// Log-probs of the continuation's tokens, each given context + earlier continuation tokens.
  virtual ScoredTokens conditional_score(std::string_view context, std::string_view continuation) const = 0;
  /// Argmax decoding; ties go to the lowest token id. Stop sequences are stripped.
  virtual std::string greedy_generate(std::string_view context, const GenerationParams& params) const = 0;
};

/// Incremental next-byte distribution over a growing history.
class ByteCursor {
 public:
  virtual ~ByteCursor() = default;
  virtual double logprob(std::uint8_t next) const = 0;
  virtual void push(std::uint8_t byte) = 0;
};

/// Base for oracle models over the 256-symbol byte vocabulary.
/// Tokenization is the identity on UTF-8 bytes; position 0 conditions on the empty history.
class ByteLanguageModel : public LanguageModel {
 public:
  explicit ByteLanguageModel(LmDescriptor descriptor);

  const LmDescriptor& descriptor() const override { return descriptor_; }
  std::vector<TokenId> tokenize(std::string_view text) const override;
  ScoredTokens conditional_score(std::string_view context, std::string_view continuation) const override;
  std::string greedy_generate(std::string_view context, const GenerationParams& params) const override;

  virtual std::unique_ptr<ByteCursor> cursor() const = 0;

  /// Inverse of tokenize().
  static std::string detokenize(const std::vector<TokenId>& tokens);

 private:
  LmDescriptor descriptor_;
};

/// Every byte has probability 1/256 regardless of history.
class UniformBackend final : public ByteLanguageModel {
 public:
  explicit UniformBackend(std::size_t context_length = 2048);
  std::unique_ptr<ByteCursor> cursor() const override;
};

/// Throws if `token_count` exceeds the model's context length.
void check_fits(const LmDescriptor& descriptor, std::size_t token_count);

}  // namespace xshot
