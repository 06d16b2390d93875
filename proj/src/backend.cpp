#include "xshot/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xshot/error.hpp"

namespace xshot {

void LmDescriptor::validate() const {
  if (vocab_size < 2) throw Error("model '" + id + "': vocab_size must be at least 2");
  if (context_length < 8) throw Error("model '" + id + "': context_length must be at least 8");
}

double ScoredTokens::sum() const { return std::accumulate(logprobs.begin(), logprobs.end(), 0.0); }

void ScoredTokens::validate() const {
  if (tokens.size() != logprobs.size()) throw Error("backend contract violation: token/logprob length mismatch");
  for (const double lp : logprobs) {
    if (std::isnan(lp) || lp > 0.0) throw Error("backend contract violation: logprob " + std::to_string(lp) + " is not <= 0");
  }
}

void check_fits(const LmDescriptor& descriptor, std::size_t token_count) {
  if (token_count > descriptor.context_length) {
    throw Error("input of " + std::to_string(token_count) + " tokens exceeds context length " +
                std::to_string(descriptor.context_length) + " of model '" + descriptor.id + "'");
  }
}

ByteLanguageModel::ByteLanguageModel(LmDescriptor descriptor) : descriptor_(std::move(descriptor)) {
  descriptor_.validate();
}

std::vector<TokenId> ByteLanguageModel::tokenize(std::string_view text) const {
  std::vector<TokenId> tokens;
  tokens.reserve(text.size());
  for (const char c : text) tokens.push_back(static_cast<TokenId>(static_cast<unsigned char>(c)));
  return tokens;
}

std::string ByteLanguageModel::detokenize(const std::vector<TokenId>& tokens) {
  std::string text;
  text.reserve(tokens.size());
  for (const auto t : tokens) {
    if (t < 0 || t > 255) throw Error("token " + std::to_string(t) + " is not a byte");
    text.push_back(static_cast<char>(t));
  }
  return text;
}

ScoredTokens ByteLanguageModel::conditional_score(std::string_view context, std::string_view continuation) const {
  check_fits(descriptor_, context.size() + continuation.size());
  auto state = cursor();
  for (const char c : context) state->push(static_cast<std::uint8_t>(c));
  ScoredTokens out;
  out.tokens.reserve(continuation.size());
  out.logprobs.reserve(continuation.size());
  for (const char c : continuation) {
    const auto byte = static_cast<std::uint8_t>(c);
    out.tokens.push_back(byte);
    out.logprobs.push_back(state->logprob(byte));
    state->push(byte);
  }
  return out;
}

std::string ByteLanguageModel::greedy_generate(std::string_view context, const GenerationParams& params) const {
  if (params.max_new_tokens < 1) throw Error("max_new_tokens must be at least 1");
  check_fits(descriptor_, context.size() + params.max_new_tokens);
  auto state = cursor();
  for (const char c : context) state->push(static_cast<std::uint8_t>(c));
  std::string out;
  for (std::size_t step = 0; step < params.max_new_tokens; ++step) {
    int best = 0;
    double best_lp = state->logprob(0);
    for (int b = 1; b < 256; ++b) {
      const double lp = state->logprob(static_cast<std::uint8_t>(b));
      if (lp > best_lp) {
        best = b;
        best_lp = lp;
      }
    }
    out.push_back(static_cast<char>(best));
    state->push(static_cast<std::uint8_t>(best));
    // Several stops may complete on the same byte; cut at the earliest start.
    std::size_t cut = out.size() + 1;
    for (const auto& stop : params.stop_sequences) {
      if (!stop.empty() && out.ends_with(stop)) cut = std::min(cut, out.size() - stop.size());
    }
    if (cut <= out.size()) {
      out.resize(cut);
      return out;
    }
  }
  return out;
}

namespace {
class UniformCursor final : public ByteCursor {
 public:
  double logprob(std::uint8_t) const override { return -std::log(256.0); }
  void push(std::uint8_t) override {}
};
}  // namespace

UniformBackend::UniformBackend(std::size_t context_length)
    : ByteLanguageModel({"uniform-byte-" + std::to_string(context_length), 256, context_length}) {}

std::unique_ptr<ByteCursor> UniformBackend::cursor() const { return std::make_unique<UniformCursor>(); }

}  // namespace xshot
