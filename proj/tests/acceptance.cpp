// Acceptance suite: one PASS/FAIL line per criterion.
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/scoring_props.hpp"
#include "support/stub_server.hpp"
#include "support/synthetic.hpp"
#include "support/truncation_oracle.hpp"
#include "xshot/cache.hpp"
#include "xshot/config.hpp"
#include "xshot/error.hpp"
#include "xshot/fewshot.hpp"
#include "xshot/metrics.hpp"
#include "xshot/ngram.hpp"
#include "xshot/remote.hpp"
#include "xshot/report.hpp"
#include "xshot/runner.hpp"
#include "xshot/text.hpp"

using nlohmann::json;
using namespace xshot;
using xshot::testing::read_file;
using xshot::testing::TempDir;

namespace {

const std::filesystem::path kFixtures = XSHOT_FIXTURES;
const std::filesystem::path kCli = XSHOT_CLI_PATH;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail.str("");
      detail << "failed: " << what;
    }
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// 1 ------------------------------------------------------------------------
void oracle_equivalence(Verdict& v) {
  TempDir dir;
  const auto synth = xshot::testing::write_synthetic_task(dir.path(), 200, 1);
  NgramModel::train_file(synth.corpus, 3, 0.01).save(dir / "m.ngram");
  EvalConfig c;
  c.task = synth.manifest;
  c.templates = synth.templates;
  c.backend = "ngram:" + (dir / "m.ngram").string();
  c.scoring = ScoringFunction(ScoringKind::mean_skip_common_prefix);
  c.out_dir = dir / "out";
  const auto t0 = Clock::now();
  const auto outcome = run_eval(c);
  const double elapsed = seconds_since(t0);

  const xshot::testing::BruteNgram brute(synth.corpus_text, 3, 0.01);
  std::size_t agree = 0;
  for (const auto& r : outcome.records) {
    const std::size_t i = std::stoul(r.example_id.substr(2));
    std::vector<std::string> texts;
    for (const auto& verbal : synth.verbal) texts.push_back(synth.words[i] + "=" + verbal + ".");
    std::size_t diff = 0;
    while (texts[0][diff] == texts[1][diff] && texts[0][diff] == texts[2][diff]) ++diff;
    std::size_t best = 0;
    double best_value = -INFINITY;
    for (std::size_t ci = 0; ci < texts.size(); ++ci) {
      const auto lps = brute.logprobs(texts[ci], diff);
      double total = 0;
      for (double lp : lps) total += lp;
      const double mean = total / static_cast<double>(lps.size());
      if (mean > best_value) {
        best_value = mean;
        best = ci;
      }
    }
    agree += r.prediction == synth.labels[best] ? 1 : 0;
  }
  v.require(outcome.records.size() == 200, "expected 200 records");
  v.require(agree == outcome.records.size(), std::to_string(agree) + "/200 predictions match the brute-force scorer");
  v.require(elapsed < 10.0, "runtime " + fmt(elapsed, 2) + " s");
  if (v.pass) v.detail << agree << "/200 match brute force, " << fmt(elapsed, 2) << " s";
}

// 2 ------------------------------------------------------------------------
void scoring_suite(Verdict& v) {
  std::string corpus;
  for (int i = 0; i < 20; ++i) corpus += "the cat sat on the mat. a dog sat on the log. Answer: yes. ";
  const auto model = std::make_shared<const NgramModel>(NgramModel::train(corpus, 3, 0.01));
  const auto ngram = std::make_shared<NgramBackend>(model);
  std::mt19937_64 rng(42);
  const std::string alphabet = "abcdeghlmnorst .";
  auto word = [&](std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
  };
  using xshot::testing::splice;
  const std::vector<ScoringFunction> kinds{
      ScoringFunction(ScoringKind::sum_logprob),           ScoringFunction(ScoringKind::mean_logprob),
      ScoringFunction(ScoringKind::mean_skip_common_prefix), ScoringFunction(ScoringKind::common_suffix_logprob),
      ScoringFunction::uncond_normalized(),                ScoringFunction(ScoringKind::char_normalized)};

  // Candidates whose scores agree to within round-off are mathematical ties, which no
  // floating-point transform can be expected to keep apart; such draws are replaced.
  auto separated = [](const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = i + 1; j < values.size(); ++j) {
        if (std::abs(values[i] - values[j]) < 1e-9) return false;
      }
    }
    return true;
  };
  std::size_t transforms = 0, redrawn = 0;
  for (const auto& fn : kinds) {
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> values;
      while (true) {
        const std::string before = word(rng() % 10);
        std::vector<InstantiatedPrompt> prompts;
        const std::size_t n = 2 + rng() % 3;
        for (std::size_t i = 0; i < n; ++i) prompts.push_back(splice(before, std::string(1, "xyzw"[i]) + word(rng() % 5), " end."));
        values.clear();
        for (const auto& s : score_candidates(*ngram, prompts, fn)) values.push_back(s.value);
        if (separated(values)) break;
        ++redrawn;
      }
      // Rescale into the well-conditioned range of the transform family; an affine map is itself monotone.
      const double lo = *std::min_element(values.begin(), values.end());
      const double hi = *std::max_element(values.begin(), values.end());
      std::vector<double> scaled;
      for (double x : values) scaled.push_back(-20.0 * (hi - x) / (hi - lo));
      v.require(select(scaled) == select(values), "affine rescale changed argmax");
      v.require(xshot::testing::argmax_invariant(scaled, xshot::testing::random_monotone(rng)),
                std::string("monotone transform changed argmax for ") + std::string(to_string(fn.kind())));
      ++transforms;
      if (!v.pass) return;
    }
  }

  // skip-prefix == mean when no prefix is shared; sum ~ mean at equal lengths.
  for (int trial = 0; trial < 500; ++trial) {
    const auto len = 1 + rng() % 6;
    std::vector<InstantiatedPrompt> prompts{splice("", "a" + word(len - 1), ""), splice("", "b" + word(len - 1), ""),
                                            splice("", "c" + word(len - 1), "")};
    const auto skip = score_candidates(*ngram, prompts, ScoringFunction(ScoringKind::mean_skip_common_prefix));
    const auto mean = score_candidates(*ngram, prompts, ScoringFunction(ScoringKind::mean_logprob));
    const auto sum = score_candidates(*ngram, prompts, ScoringFunction(ScoringKind::sum_logprob));
    for (std::size_t i = 0; i < 3; ++i) v.require(skip[i].value == mean[i].value, "skip-prefix differs from mean at prefix 0");
    v.require(select(sum) == select(mean), "sum and mean rank equal-length candidates differently");
  }

  // uncond: zero when context equals the answer context; invariant to a shared logprob shift.
  const std::vector<InstantiatedPrompt> same_ctx{splice("Answer: ", "yes", "."), splice("Answer: ", "no", ".")};
  for (const auto& s : score_candidates(*ngram, same_ctx, ScoringFunction::uncond_normalized())) {
    v.require(std::abs(s.value) < 1e-12, "uncond not zero at the answer context");
  }
  class Shifted final : public LanguageModel {
   public:
    explicit Shifted(std::shared_ptr<const LanguageModel> m) : m_(std::move(m)) {}
    const LmDescriptor& descriptor() const override { return m_->descriptor(); }
    std::vector<TokenId> tokenize(std::string_view t) const override { return m_->tokenize(t); }
    ScoredTokens conditional_score(std::string_view c, std::string_view t) const override {
      auto s = m_->conditional_score(c, t);
      for (auto& lp : s.logprobs) lp -= 0.3;
      return s;
    }
    std::string greedy_generate(std::string_view c, const GenerationParams& p) const override { return m_->greedy_generate(c, p); }

   private:
    std::shared_ptr<const LanguageModel> m_;
  } shifted(ngram);
  const std::vector<InstantiatedPrompt> q{splice("the cat ", "sat", "."), splice("the cat ", "log", ".")};
  const auto a = score_candidates(*ngram, q, ScoringFunction::uncond_normalized());
  const auto b = score_candidates(shifted, q, ScoringFunction::uncond_normalized());
  for (std::size_t i = 0; i < 2; ++i) v.require(std::abs(a[i].value - b[i].value) < 1e-9, "uncond moved under a shared shift");

  // Determinism: the same inputs select the same candidate on every thread.
  std::vector<std::vector<InstantiatedPrompt>> batches;
  for (int i = 0; i < 50; ++i) {
    const std::string before = word(rng() % 10);
    batches.push_back({splice(before, "x" + word(3), "."), splice(before, "y" + word(3), "."), splice(before, "z" + word(2), ".")});
  }
  for (const auto& fn : kinds) {
    std::vector<std::vector<double>> reference;
    for (const auto& b : batches) {
      std::vector<double> values;
      for (const auto& s : score_candidates(*ngram, b, fn)) values.push_back(s.value);
      reference.push_back(values);
    }
    std::vector<std::thread> workers;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t i = 0; i < batches.size(); ++i) {
          const std::size_t j = (i * 7 + static_cast<std::size_t>(t) * 13) % batches.size();
          std::vector<double> values;
          for (const auto& s : score_candidates(*ngram, batches[j], fn)) values.push_back(s.value);
          if (values != reference[j] || select(values) != select(reference[j])) ++mismatches;
        }
      });
    }
    for (auto& w : workers) w.join();
    v.require(mismatches == 0, std::string("non-deterministic selection for ") + std::string(to_string(fn.kind())));
  }

  if (v.pass) {
    v.detail << "6 variants, " << transforms << " monotone transforms (" << redrawn
             << " round-off ties redrawn), prefix, length, shift and thread-determinism properties hold";
  }
}

// 3 ------------------------------------------------------------------------
void truncation(Verdict& v) {
  std::mt19937_64 rng(3);
  std::size_t checked = 0, threw = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_ctx = 8 + rng() % 300;
    const std::size_t k = rng() % 9;
    const SeparatorSpec sep{std::string(1 + rng() % 3, '|')};
    std::vector<InstantiatedPrompt> demos;
    std::vector<std::size_t> demo_sizes;
    for (std::size_t i = 0; i < k; ++i) {
      demo_sizes.push_back(1 + rng() % 60);
      demos.push_back(xshot::testing::make_prompt(std::string(demo_sizes.back(), static_cast<char>('a' + i)), 0, 1));
    }
    std::vector<InstantiatedPrompt> targets;
    std::vector<std::size_t> target_sizes;
    const std::size_t n_cand = 1 + rng() % 4;
    for (std::size_t i = 0; i < n_cand; ++i) {
      target_sizes.push_back(1 + rng() % 50);
      targets.push_back(xshot::testing::make_prompt(std::string(target_sizes.back(), 'T'), 0, 1));
    }
    const UniformBackend model(n_ctx);
    const long oracle = xshot::testing::linear_scan_kept(demo_sizes, target_sizes, sep.separator.size(), n_ctx);
    if (oracle < 0) {
      bool raised = false;
      try {
        truncate_to_fit(demos, targets, sep, model);
      } catch (const Error&) {
        raised = true;
      }
      v.require(raised, "targets that cannot fit did not raise");
      ++threw;
      continue;
    }
    const auto ctx = truncate_to_fit(demos, targets, sep, model);
    v.require(ctx.kept_count == static_cast<std::size_t>(oracle), "kept count differs from the linear-scan oracle");
    for (std::size_t i = 0; i < ctx.kept_count; ++i) {
      v.require(ctx.demos[i].text == demos[ctx.dropped_count + i].text, "kept demos are not a contiguous tail");
    }
    for (const auto& composed : build_context(ctx.demos, targets, sep)) {
      v.require(model.tokenize(composed.text).size() <= n_ctx, "composed candidate exceeds n_ctx");
    }
    ++checked;
    if (!v.pass) return;
  }
  if (v.pass) v.detail << checked << " instances match the oracle, " << threw << " over-length targets rejected";
}

// 4 ------------------------------------------------------------------------
void random_baselines(Verdict& v) {
  TempDir dir;
  std::mt19937_64 rng(4);
  std::vector<json> binary;
  for (int i = 0; i < 10000; ++i) {
    binary.push_back(json{{"id", "b" + std::to_string(i)},
                          {"lang", "en"},
                          {"fields", {{"context", "item " + std::to_string(i)}}},
                          {"choices", {"first ending", "second ending"}},
                          {"answer", static_cast<int>(rng() % 2)}});
  }
  xshot::testing::write_template(dir / "tpl-b", "binary", "en", {{"*", "{context} [Mask]"}}, "identity");
  EvalConfig c;
  c.task = xshot::testing::write_task(
      dir / "binary", json{{"name", "binary"}, {"kind", "multiple-choice"}, {"metric", "accuracy"}, {"languages", {"en"}}},
      {{"test", binary}});
  c.templates = dir / "tpl-b";
  c.out_dir = dir / "out-b";
  c.threads = 2;
  const auto bin = run_eval(c);
  const auto bin_metrics = run_metrics(bin.records);
  double acc = -1;
  for (const auto& m : bin_metrics) {
    if (m.metric == "accuracy") acc = m.value;
  }
  v.require(std::abs(acc - 0.5) <= 0.03, "binary accuracy " + fmt(acc));

  std::vector<json> probes;
  for (int i = 0; i < 3000; ++i) {
    json choices = json::array();
    for (int j = 0; j < 12; ++j) choices.push_back("entity" + std::to_string(j));
    probes.push_back(json{{"id", "p" + std::to_string(i)},
                          {"lang", "en"},
                          {"fields", {{"subject", "s" + std::to_string(i)}, {"relation", "P" + std::to_string(i % 5)}}},
                          {"choices", choices},
                          {"answer", static_cast<int>(rng() % 12)}});
  }
  xshot::testing::write_template(dir / "tpl-p", "probe", "en", {{"*", "{subject} is located in [Mask]."}}, "identity");
  c.task = xshot::testing::write_task(
      dir / "probe", json{{"name", "probe"}, {"kind", "cloze-probe"}, {"metric", "precision-at-1"}, {"languages", {"en"}}},
      {{"test", probes}});
  c.templates = dir / "tpl-p";
  c.out_dir = dir / "out-p";
  c.probe_candidates = 3;
  const auto probe = run_eval(c);
  double p1 = -1;
  for (const auto& m : run_metrics(probe.records)) {
    if (m.metric == "precision@1") p1 = m.value;
  }
  v.require(std::abs(p1 - 1.0 / 3.0) <= 0.03, "precision@1 " + fmt(p1));
  if (v.pass) v.detail << "binary accuracy " << fmt(acc) << " (10k items), precision@1 " << fmt(p1) << " (3 of 12 candidates)";
}

// 5 ------------------------------------------------------------------------
void majority_label_bias(Verdict& v) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const std::string cues = "XY";
  const std::vector<std::string> labels{"pos", "neg"};
  auto word = [&](std::size_t cls) {
    std::string w;
    for (int i = 0; i < 4; ++i) w.push_back(static_cast<char>('a' + rng() % 26));
    return w + cues[cls];
  };
  std::vector<json> train, test;
  for (int i = 0; i < 40; ++i) {
    train.push_back(json{{"id", "tr" + std::to_string(i)}, {"lang", "en"}, {"fields", {{"word", word(i % 2)}}}, {"label", labels[i % 2]}});
  }
  for (int i = 0; i < 200; ++i) {
    test.push_back(json{{"id", "te" + std::to_string(i)}, {"lang", "en"}, {"fields", {{"word", word(i % 2)}}}, {"label", labels[i % 2]}});
  }
  const auto manifest = xshot::testing::write_task(
      dir / "task",
      json{{"name", "bias"}, {"kind", "classification"}, {"metric", "accuracy"}, {"label_space", labels}, {"languages", {"en"}}},
      {{"train", train}, {"test", test}});
  std::string corpus;
  for (int i = 0; i < 30; ++i) corpus += "kX=yes. kY=no. ";
  const auto model = std::make_shared<const NgramModel>(NgramModel::train(corpus, 3, 0.01));
  const ContextCacheBackend backend(model, 0.5);

  const Task task = load_task(manifest);
  const auto tmpl = parse_template(json{{"task", "bias"}, {"language", "en"}, {"patterns", {{"*", "{word}=[Mask]."}}},
                                        {"verbalizer", {{"pos", "yes"}, {"neg", "no"}}}});
  const auto pool = demo_pool(task, "test", LanguageCode("en"));
  std::vector<Example> pos_pool;
  std::copy_if(pool.begin(), pool.end(), std::back_inserter(pos_pool), [](const Example& e) { return e.gold() == "pos"; });

  auto share_pos = [&](const std::vector<Example>& demos) {
    std::vector<InstantiatedPrompt> demo_prompts;
    for (const auto& d : demos) demo_prompts.push_back(gold_prompt(tmpl, d));
    std::size_t pos = 0;
    for (const auto& ex : task.split("test")) {
      const auto targets = candidate_prompts(tmpl, ex, task);
      const auto ctx = truncate_to_fit(demo_prompts, targets, SeparatorSpec{}, backend);
      const auto composed = build_context(ctx.demos, targets, SeparatorSpec{});
      const auto scores = score_candidates(backend, composed, ScoringFunction());
      pos += ex.candidates(task.label_space)[select(scores)] == "pos" ? 1 : 0;
    }
    return static_cast<double>(pos) / static_cast<double>(task.split("test").size());
  };

  double min_shift = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto skewed = sample_demos(pos_pool, ShotSpec{8, SamplingStrategy::random_total, seed}, "");
    const auto balanced = sample_demos(pool, ShotSpec{4, SamplingStrategy::per_class_uniform, seed}, "", task.label_space);
    v.require(skewed.size() == 8 && balanced.size() == 8, "expected 8 demonstrations");
    min_shift = std::min(min_shift, share_pos(skewed) - share_pos(balanced));
  }
  v.require(min_shift >= 0.15, "shift toward the majority label only " + fmt(100 * min_shift, 1) + " pp");

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (std::size_t k : {1, 2, 4, 8}) {
      std::map<std::string, std::size_t> hist;
      for (const auto& d : sample_demos(pool, ShotSpec{k, SamplingStrategy::per_class_uniform, seed}, "", task.label_space)) ++hist[d.gold()];
      v.require(hist["pos"] == k && hist["neg"] == k, "per-class histogram not uniform at seed " + std::to_string(seed));
    }
  }
  if (v.pass) v.detail << "min shift " << fmt(100 * min_shift, 1) << " pp over 5 seeds; per-class histogram exact for 100 seeds";
}

// 6 ------------------------------------------------------------------------
void eq2_degeneracy(Verdict& v) {
  std::size_t compared = 0;
  for (const char* name : {"xnli", "xcopa", "mt"}) {
    const Task task = load_task(kFixtures / name / "manifest.json");
    const auto templates = TemplateSet::load_directory(kFixtures / "templates", task.name);
    const UniformBackend model;
    for (const auto& [split, examples] : task.splits) {
      for (const auto& ex : examples) {
        const auto& tmpl = select_template(TemplateMode::same_language(), templates, ex.lang);
        const auto zero_shot = candidate_prompts(tmpl, ex, task);
        const auto demos = sample_demos({}, ShotSpec{0, SamplingStrategy::random_total, 9}, ex.id);
        std::vector<InstantiatedPrompt> demo_prompts;
        for (const auto& d : demos) demo_prompts.push_back(gold_prompt(tmpl, d));
        const auto ctx = truncate_to_fit(demo_prompts, zero_shot, SeparatorSpec{}, model);
        const auto few_shot = build_context(ctx.demos, zero_shot, SeparatorSpec{});
        v.require(few_shot.size() == zero_shot.size(), "candidate count differs");
        for (std::size_t i = 0; i < zero_shot.size(); ++i) {
          v.require(few_shot[i].text == zero_shot[i].text, "k=0 prompt differs for " + ex.id);
          v.require(few_shot[i].mask_span == zero_shot[i].mask_span, "k=0 mask span differs for " + ex.id);
          ++compared;
        }
      }
    }
    // The full runner path at k=0 scores exactly the zero-shot strings.
    TempDir dir;
    EvalConfig c;
    c.task = kFixtures / name / "manifest.json";
    c.templates = kFixtures / "templates";
    c.out_dir = dir / "out";
    c.record_prompts = true;
    for (const auto& r : run_eval(c).records) {
      v.require(r.status == "ok", std::string("runner failed on ") + name + ": " + r.error);
      if (r.failed()) continue;
      const auto& examples = task.split("test");
      const auto ex = std::find_if(examples.begin(), examples.end(), [&](const Example& e) { return e.id == r.example_id; });
      const auto zero_shot = candidate_prompts(select_template(TemplateMode::same_language(), templates, ex->lang), *ex, task);
      std::vector<std::string> texts;
      for (const auto& p : zero_shot) texts.push_back(p.text);
      v.require(r.prompts == texts, "runner k=0 prompts differ for " + r.example_id);
      ++compared;
    }
  }
  if (v.pass) v.detail << compared << " prompt comparisons across 3 fixture tasks, all byte-identical";
}

// 7 ------------------------------------------------------------------------
void bleu(Verdict& v) {
  using S = std::vector<std::string>;
  const auto perfect = corpus_bleu(S{"the cat sat down"}, S{"the cat sat down"});
  v.require(std::abs(perfect.score - 100.0) < 1e-9, "perfect match is " + fmt(perfect.score));
  const auto clipped = corpus_bleu(S{"the the the cat"}, S{"the cat sat down"});
  v.require(clipped.precisions.size() == 4, "expected 4 precisions");
  if (clipped.precisions.size() == 4) {
    v.require(std::abs(clipped.precisions[0] - 0.5) < 1e-12, "unigram precision " + fmt(clipped.precisions[0]));
    v.require(std::abs(clipped.precisions[1] - 1.0 / 3) < 1e-12, "bigram precision " + fmt(clipped.precisions[1]));
    v.require(clipped.precisions[2] == 0.0 && clipped.precisions[3] == 0.0, "higher-order precisions not zero");
  }
  v.require(clipped.score == 0.0, "clipped case score " + fmt(clipped.score));

  const S nfc{"caf\xC3\xA9 cr\xC3\xA8me br\xC3\xBBl\xC3\xA9""e tr\xC3\xA8s bon"};
  const S nfd{"cafe\xCC\x81 cre\xCC\x80me bru\xCC\x82le\xCC\x81""e tre\xCC\x80s bon"};
  const S ref{"un caf\xC3\xA9 cr\xC3\xA8me br\xC3\xBBl\xC3\xA9""e tr\xC3\xA8s bon"};
  v.require(text::nfc(nfd[0]) == nfc[0], "fixture strings are not canonically equivalent");
  v.require(corpus_bleu(nfd, ref).score == corpus_bleu(nfc, ref).score, "NFD re-encoding changed BLEU");
  v.require(corpus_bleu(nfc, S{text::nfc(ref[0])}).score > 0.0, "expected non-zero overlap");

  std::mt19937_64 rng(7);
  S hyps, refs;
  for (int i = 0; i < 1000; ++i) {
    std::string h, r;
    for (int w = 0; w < 25; ++w) {
      const std::string word = "w" + std::to_string(rng() % 200);
      r += (w ? " " : "") + word;
      h += (w ? " " : "") + (rng() % 4 == 0 ? "x" + std::to_string(rng() % 200) : word);
    }
    hyps.push_back(h);
    refs.push_back(r);
  }
  const auto t0 = Clock::now();
  const auto big = corpus_bleu(hyps, refs);
  const double elapsed = seconds_since(t0);
  v.require(elapsed < 1.0, "1000-sentence corpus took " + fmt(elapsed, 3) + " s");
  v.require(big.score > 0.0 && big.score < 100.0, "implausible corpus score " + fmt(big.score));
  if (v.pass) v.detail << "hand cases hold, NFC invariant, 1000 sentences in " << fmt(elapsed, 3) << " s (BLEU " << fmt(big.score, 2) << ")";
}

// 8 ------------------------------------------------------------------------
int run_cli(const std::string& args) {
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

void determinism_and_resume(Verdict& v) {
  TempDir dir;
  const auto synth = xshot::testing::write_synthetic_task(dir.path(), 40, 8);
  v.require(run_cli("train-ngram --corpus " + q(synth.corpus) + " --order 3 --add-k 0.01 --out " + q(dir / "m.ngram")) == 0,
            "train-ngram failed");
  const std::string common = "eval --task " + q(synth.manifest) + " --templates " + q(synth.templates) +
                             " --backend ngram:" + (dir / "m.ngram").string() + " --shots 0,2 --runs 3 --seed 5 --threads 3";
  const std::vector<std::string> files{"records.jsonl", "run_manifest.json", "report.csv", "report.txt", "aggregate.csv"};
  v.require(run_cli(common + " --out " + q(dir / "out")) == 0, "first eval failed");
  std::map<std::string, std::string> first;
  for (const auto& f : files) first[f] = read_file(dir / "out" / f);
  v.require(!first["records.jsonl"].empty(), "no records written");
  v.require(run_cli(common + " --out " + q(dir / "out")) == 0, "second eval failed");
  for (const auto& f : files) v.require(read_file(dir / "out" / f) == first[f], f + " differs between identical invocations");
  v.require(run_cli(common + " --out " + q(dir / "out2")) == 0, "third eval failed");
  v.require(read_file(dir / "out2" / "records.jsonl") == first["records.jsonl"], "records differ across output directories");

  // Resume against an instrumented server: interrupted run, then the full run, then a repeat.
  xshot::testing::StubServer stub(std::make_shared<NgramBackend>(
      std::make_shared<const NgramModel>(NgramModel::load(dir / "m.ngram"))));
  const auto cfg = dir / "remote.json";
  auto write_cfg = [&](const std::vector<std::string>& langs) {
    xshot::testing::write_file(cfg, json{{"task", (kFixtures / "xnli" / "manifest.json").string()},
                                         {"templates", (kFixtures / "templates").string()},
                                         {"backend", "remote:" + stub.url()},
                                         {"languages", langs},
                                         {"shots", {0, 1}},
                                         {"runs", 2},
                                         {"cache_dir", (dir / "cache").string()},
                                         {"out", (dir / "remote-out").string()}}
                                        .dump());
  };
  write_cfg({"en"});
  v.require(run_cli("eval --config " + q(cfg)) == 0, "partial remote eval failed");
  const auto partial = stub.total_requests();
  write_cfg({"en", "vi", "zh", "es"});
  v.require(run_cli("eval --config " + q(cfg)) == 0, "resumed remote eval failed");
  const auto full = stub.total_requests();
  v.require(run_cli("eval --config " + q(cfg)) == 0, "repeated remote eval failed");
  const auto after = stub.total_requests();
  v.require(partial > 0 && full > partial, "unexpected request counts");
  v.require(after == full, "repeat issued " + std::to_string(after - full) + " requests");
  v.require(stub.duplicate_requests() == 0, std::to_string(stub.duplicate_requests()) + " duplicate requests");
  if (v.pass) {
    v.detail << "3 CLI runs byte-identical; resume: " << partial << " + " << (full - partial)
             << " requests, 0 on repeat, duplicate counter = " << stub.duplicate_requests();
  }
}

// 9 ------------------------------------------------------------------------
void cross_lingual_audit(Verdict& v) {
  TempDir dir;
  EvalConfig c;
  c.task = kFixtures / "xnli" / "manifest.json";
  c.templates = kFixtures / "templates";
  c.template_mode = TemplateMode::source_language(LanguageCode("en"));
  c.demo_lang = LanguageCode("en");
  c.shots = {0, 1, 2};
  c.n_runs = 2;
  c.languages = {"vi", "zh", "es"};
  c.record_prompts = true;
  c.out_dir = dir / "out";
  const auto outcome = run_eval(c);
  const Task task = load_task(c.task);
  std::map<std::string, const Example*> by_id;
  for (const auto& [split, examples] : task.splits) {
    for (const auto& ex : examples) by_id[ex.id] = &ex;
  }
  const std::map<std::string, std::string> verbal{{"entailment", "Yes"}, {"neutral", "Also"}, {"contradiction", "No"}};
  std::size_t prompts = 0;
  for (const auto& r : outcome.records) {
    v.require(r.status == "ok", "cell failed: " + r.error);
    if (r.failed()) continue;
    const Example& ex = *by_id.at(r.example_id);
    for (std::size_t i = 0; i < r.prompts.size(); ++i) {
      const std::string expected_tail =
          ex.fields.at("sentence1") + ", right? " + verbal.at(task.label_space[i]) + ", " + ex.fields.at("sentence2");
      const auto& p = r.prompts[i];
      v.require(p.size() >= expected_tail.size() && p.compare(p.size() - expected_tail.size(), std::string::npos, expected_tail) == 0,
                "target segment is not the English template around untranslated fields for " + r.example_id);
      if (task.label_space[i] == "entailment") v.require(p.find(", right? Yes,") != std::string::npos, "missing ', right? Yes,'");
      v.require(p.find("đúng không") == std::string::npos && p.find("¿verdad?") == std::string::npos,
                "non-English template tokens leaked");
      ++prompts;
    }
  }
  // Table 6's source-language row, reproduced exactly.
  const auto row = std::find_if(outcome.records.begin(), outcome.records.end(),
                                [](const ResultRecord& r) { return r.example_id == "vi-0" && r.k == 0; });
  v.require(row != outcome.records.end(), "vi-0 not evaluated");
  if (row != outcome.records.end()) {
    v.require(row->prompts.at(0) ==
                  "Vâng, tôi thậm chí không nghĩ về điều đó, nhưng tôi đã rất thất vọng, và, tôi lại nói chuyện với anh ta lần "
                  "nữa, right? Yes, tôi đã không nói chuyện với anh ta nữa.",
              "Table 6 source-language example not reproduced");
  }
  if (v.pass) v.detail << prompts << " prompts audited (vi, zh, es; k = 0, 1, 2)";
}

// 10 -----------------------------------------------------------------------
void protocol_conformance(Verdict& v) {
  std::string corpus;
  for (int i = 0; i < 10; ++i) corpus += "the cat sat on the mat. ";
  const auto local = std::make_shared<NgramBackend>(std::make_shared<const NgramModel>(NgramModel::train(corpus, 3, 0.01)), 256);
  xshot::testing::StubServer stub(local);
  const auto remote = std::make_shared<RemoteBackend>(stub.url());

  v.require(remote->descriptor().id == local->descriptor().id, "/v1/info id");
  v.require(remote->descriptor().vocab_size == 256 && remote->descriptor().context_length == 256, "/v1/info sizes");
  v.require(remote->tokenize("the mat") == local->tokenize("the mat"), "/v1/tokenize");
  v.require(remote->conditional_score("the ", "cat") == local->conditional_score("the ", "cat"), "/v1/score");
  GenerationParams gp;
  gp.max_new_tokens = 12;
  gp.stop_sequences = {"."};
  v.require(remote->greedy_generate("the c", gp) == local->greedy_generate("the c", gp), "/v1/generate");
  for (const char* endpoint : {"info", "tokenize", "score", "generate"}) {
    v.require(stub.requests(endpoint) >= 1, std::string("no request reached ") + endpoint);
  }

  // Schema validation rejects malformed bodies.
  int rejected = 0;
  for (const json& bad : {json{{"tokens", {1}}, {"logprobs", {0.2}}}, json{{"tokens", {1, 2}}, {"logprobs", {-1.0}}},
                          json{{"logprobs", {-1.0}}}, json{{"tokens", {"a"}}, {"logprobs", {-1.0}}}, json::array()}) {
    try {
      parse_scored_tokens(bad);
    } catch (const Error&) {
      ++rejected;
    }
  }
  v.require(rejected == 5, "schema validation accepted a malformed body");

  TempDir dir;
  const CachedBackend cached(remote, dir.path());
  const auto s1 = cached.conditional_score("the ", "mat");
  const auto g1 = cached.greedy_generate("the m", gp);
  const auto t1 = cached.tokenize("sat");
  cached.descriptor();
  const auto before = stub.total_requests();
  bool same = true;
  for (int i = 0; i < 5; ++i) {
    same = same && cached.conditional_score("the ", "mat") == s1 && cached.greedy_generate("the m", gp) == g1 &&
           cached.tokenize("sat") == t1;
  }
  const CachedBackend reopened(std::make_shared<RemoteBackend>(stub.url()), dir.path());
  same = same && reopened.conditional_score("the ", "mat") == s1 && reopened.descriptor().id == local->descriptor().id;
  v.require(same, "cached responses differ");
  v.require(stub.total_requests() == before, std::to_string(stub.total_requests() - before) + " requests reached the stub on repeats");
  if (v.pass) v.detail << "4 endpoints round-trip, 5/5 malformed bodies rejected, repeats served with 0 stub requests";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"oracle equivalence (200-item 3-class task, order-3 n-gram)", oracle_equivalence},
      {"scoring-function suite", scoring_suite},
      {"truncation vs linear-scan oracle (1000 instances)", truncation},
      {"random baselines", random_baselines},
      {"majority-label-bias direction", majority_label_bias},
      {"k=0 few-shot equals zero-shot", eq2_degeneracy},
      {"BLEU", bleu},
      {"determinism and resumability", determinism_and_resume},
      {"cross-lingual composition audit", cross_lingual_audit},
      {"protocol conformance and cache", protocol_conformance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail.str("");
      v.detail << "exception: " << e.what();
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << " -- " << v.detail.str()
              << " [" << fmt(seconds_since(t0), 2) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " acceptance criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
