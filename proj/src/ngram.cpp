#include "xshot/ngram.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "xshot/digest.hpp"
#include "xshot/error.hpp"
#include "xshot/text.hpp"

namespace xshot {

namespace {

constexpr double kVocab = 256.0;

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, end);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error("n-gram model: invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

std::uint64_t NgramModel::Row::count(std::uint8_t byte) const {
  const auto it = std::lower_bound(next.begin(), next.end(), byte,
                                   [](const auto& entry, std::uint8_t b) { return entry.first < b; });
  return (it != next.end() && it->first == byte) ? it->second : 0;
}

NgramModel NgramModel::train(std::string_view corpus, int order, double add_k) {
  if (order < 1) throw Error("n-gram order must be at least 1");
  if (!(add_k > 0.0)) throw Error("add-k must be positive");
  if (corpus.empty()) throw Error("n-gram corpus is empty");
  if (!text::is_valid_utf8(corpus)) throw Error("n-gram corpus is not valid UTF-8");

  std::unordered_map<std::string, std::map<std::uint8_t, std::uint64_t>> counts;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto byte = static_cast<std::uint8_t>(corpus[i]);
    const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(order - 1), i);
    for (std::size_t len = 0; len <= longest; ++len) {
      ++counts[std::string(corpus.substr(i - len, len))][byte];
    }
  }
  NgramModel model(order, add_k);
  for (auto& [context, next] : counts) {
    Row row;
    for (const auto& [byte, n] : next) {
      row.next.emplace_back(byte, n);
      row.total += n;
    }
    model.rows_.emplace(context, std::move(row));
  }
  return model;
}

NgramModel NgramModel::train_file(const std::filesystem::path& corpus, int order, double add_k) {
  return train(read_file(corpus), order, add_k);
}

std::string NgramModel::serialize() const {
  std::vector<std::string> contexts;
  contexts.reserve(rows_.size());
  for (const auto& [context, _] : rows_) contexts.push_back(text::to_hex(context));
  std::sort(contexts.begin(), contexts.end());

  std::string out = "NGRAM v1 order=" + std::to_string(order_) + " addk=" + format_double(add_k_) + " vocab=byte\n";
  for (const auto& hex : contexts) {
    const Row& row = rows_.at(text::from_hex(hex));
    for (const auto& [byte, n] : row.next) {
      out += hex;
      out += '\t';
      out += text::to_hex(std::string(1, static_cast<char>(byte)));
      out += '\t';
      out += std::to_string(n);
      out += '\n';
    }
  }
  return out;
}

NgramModel NgramModel::parse(std::string_view data) {
  const auto header_end = data.find('\n');
  if (header_end == std::string_view::npos) throw Error("n-gram model: missing header");
  const std::string_view header = data.substr(0, header_end);
  constexpr std::string_view kPrefix = "NGRAM v1 order=";
  constexpr std::string_view kAddK = " addk=";
  constexpr std::string_view kSuffix = " vocab=byte";
  if (!header.starts_with(kPrefix) || !header.ends_with(kSuffix)) {
    throw Error("n-gram model: bad header '" + std::string(header) + "'");
  }
  const auto body = header.substr(kPrefix.size(), header.size() - kPrefix.size() - kSuffix.size());
  const auto addk_pos = body.find(kAddK);
  if (addk_pos == std::string_view::npos) throw Error("n-gram model: bad header '" + std::string(header) + "'");
  const int order = parse_number<int>(body.substr(0, addk_pos), "order");
  const double add_k = parse_number<double>(body.substr(addk_pos + kAddK.size()), "addk");
  if (order < 1 || !(add_k > 0.0)) throw Error("n-gram model: order must be >= 1 and addk > 0");

  NgramModel model(order, add_k);
  std::string previous;
  bool first = true;
  std::size_t pos = header_end + 1;
  std::size_t line_no = 1;
  while (pos < data.size()) {
    ++line_no;
    auto end = data.find('\n', pos);
    if (end == std::string_view::npos) end = data.size();
    const std::string_view line = data.substr(pos, end - pos);
    pos = end + 1;
    const std::string where = "n-gram model line " + std::to_string(line_no);
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos) throw Error(where + ": expected three tab-separated columns");
    const auto context_hex = line.substr(0, tab1);
    const auto byte_hex = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string context = text::from_hex(context_hex);
    const std::string byte = text::from_hex(byte_hex);
    if (byte.size() != 1) throw Error(where + ": byte column must be one byte");
    if (context.size() > static_cast<std::size_t>(order - 1)) throw Error(where + ": context longer than order-1");
    const auto count = parse_number<std::uint64_t>(line.substr(tab2 + 1), "count");
    if (count == 0) throw Error(where + ": zero count");
    std::string key(line.substr(0, tab2));
    if (!first && key <= previous) throw Error(where + ": entries are not strictly sorted");
    previous = std::move(key);
    first = false;
    Row& row = model.rows_[context];
    row.next.emplace_back(static_cast<std::uint8_t>(byte[0]), count);
    row.total += count;
  }
  if (!model.rows_.contains(std::string())) throw Error("n-gram model: no unigram counts");
  return model;
}

void NgramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize();
  if (!out) throw Error("failed writing " + path.string());
}

NgramModel NgramModel::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const NgramModel::Row& NgramModel::resolve(std::string_view history) const {
  const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), history.size());
  for (std::size_t len = longest; len > 0; --len) {
    const auto it = rows_.find(std::string(history.substr(history.size() - len)));
    if (it != rows_.end() && it->second.total > 0) return it->second;
  }
  return rows_.at(std::string());
}

double NgramModel::logprob(const Row& row, std::uint8_t byte) const {
  return std::log((static_cast<double>(row.count(byte)) + add_k_) / (static_cast<double>(row.total) + add_k_ * kVocab));
}

namespace {

class NgramCursor final : public ByteCursor {
 public:
  explicit NgramCursor(const NgramModel& model) : model_(model), row_(&model.resolve({})) {}

  double logprob(std::uint8_t next) const override { return model_.logprob(*row_, next); }

  void push(std::uint8_t byte) override {
    window_.push_back(static_cast<char>(byte));
    const auto keep = static_cast<std::size_t>(model_.order() - 1);
    if (window_.size() > keep) window_.erase(0, window_.size() - keep);
    row_ = &model_.resolve(window_);
  }

 private:
  const NgramModel& model_;
  std::string window_;
  const NgramModel::Row* row_;
};

// Counts of the request's own bytes, smoothed and backed off like the corpus model.
class ContextCacheCursor final : public ByteCursor {
 public:
  ContextCacheCursor(const NgramModel& model, double lambda) : model_(model), corpus_(model), lambda_(lambda) {}

  double logprob(std::uint8_t next) const override {
    const double k = corpus_model().add_k();
    const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(corpus_model().order() - 1), history_.size());
    std::uint64_t total = 0;
    std::uint64_t hits = 0;
    for (std::size_t len = longest + 1; len-- > 0;) {
      const std::string context = history_.substr(history_.size() - len);
      const auto it = totals_.find(context);
      if (it == totals_.end() || it->second == 0) continue;
      total = it->second;
      const auto hit = counts_.find(context + static_cast<char>(next));
      hits = hit == counts_.end() ? 0 : hit->second;
      break;
    }
    const double window = (static_cast<double>(hits) + k) / (static_cast<double>(total) + k * kVocab);
    const double corpus = std::exp(corpus_.logprob(next));
    return std::log(lambda_ * window + (1.0 - lambda_) * corpus);
  }

  void push(std::uint8_t byte) override {
    const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(corpus_model().order() - 1), history_.size());
    for (std::size_t len = 0; len <= longest; ++len) {
      const std::string context = history_.substr(history_.size() - len);
      ++totals_[context];
      ++counts_[context + static_cast<char>(byte)];
    }
    history_.push_back(static_cast<char>(byte));
    corpus_.push(byte);
  }

 private:
  const NgramModel& corpus_model() const { return model_; }

  const NgramModel& model_;
  NgramCursor corpus_;
  double lambda_;
  std::string history_;
  std::unordered_map<std::string, std::uint64_t> totals_;
  std::unordered_map<std::string, std::uint64_t> counts_;
};

std::string model_digest(const NgramModel& model) { return sha256_hex(model.serialize()).substr(0, 16); }

}  // namespace

NgramBackend::NgramBackend(std::shared_ptr<const NgramModel> model, std::size_t context_length)
    : ByteLanguageModel({"ngram-o" + std::to_string(model->order()) + "-" + model_digest(*model), 256, context_length}),
      model_(std::move(model)) {}

std::unique_ptr<ByteCursor> NgramBackend::cursor() const { return std::make_unique<NgramCursor>(*model_); }

ContextCacheBackend::ContextCacheBackend(std::shared_ptr<const NgramModel> model, double lambda,
                                         std::size_t context_length)
    : ByteLanguageModel({"context-cache-o" + std::to_string(model->order()) + "-l" + format_double(lambda) + "-" +
                             model_digest(*model),
                         256, context_length}),
      model_(std::move(model)),
      lambda_(lambda) {
  if (!(lambda_ >= 0.0 && lambda_ <= 1.0)) throw Error("context-cache lambda must lie in [0, 1]");
}

std::unique_ptr<ByteCursor> ContextCacheBackend::cursor() const {
  return std::make_unique<ContextCacheCursor>(*model_, lambda_);
}

}  // namespace xshot
