#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "xshot/scoring.hpp"
#include "xshot/template.hpp"

namespace xshot::testing {

inline InstantiatedPrompt make_prompt(std::string text, std::size_t begin, std::size_t end) {
  InstantiatedPrompt p;
  p.text = std::move(text);
  p.mask_span = {begin, end};
  p.template_lang = LanguageCode("en");
  p.example_id = "p";
  return p;
}

/// Prompt with `candidate` spliced between `before` and `after`.
inline InstantiatedPrompt splice(const std::string& before, const std::string& candidate, const std::string& after) {
  return make_prompt(before + candidate + after, before.size(), before.size() + candidate.size());
}

/// A random strictly increasing map: a piecewise-linear warp with slopes in
/// [0.1, 10] followed by one of identity, exp, atan or cube. Well conditioned on
/// scores in [-20, 0], so distinct inputs stay distinct in double precision.
inline std::function<double(double)> random_monotone(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> knot(-20.0, 0.0);
  std::uniform_real_distribution<double> slope(0.1, 10.0);
  std::vector<double> knots(1 + rng() % 5);
  for (auto& k : knots) k = knot(rng);
  std::sort(knots.begin(), knots.end());
  std::vector<double> slopes(knots.size() + 1);
  for (auto& s : slopes) s = slope(rng);
  auto warp = [knots, slopes](double x) {
    double y = slopes[0] * std::min(x, knots[0]);
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const double hi = i + 1 < knots.size() ? knots[i + 1] : 0.0;
      if (x > knots[i]) y += slopes[i + 1] * (std::min(x, std::max(hi, knots[i])) - knots[i]);
    }
    if (x > 0.0) y += slopes.back() * x;
    return y;
  };
  switch (rng() % 4) {
    case 0: return warp;
    case 1: return [warp](double x) { return std::exp(warp(x) / 4.0); };
    case 2: return [warp](double x) { return std::atan(warp(x) / 10.0); };
    default: return [warp](double x) { const double y = warp(x); return y * y * y; };
  }
}

/// True when select() picks the same index before and after `f` is applied.
/// Values are assumed pairwise separated enough that `f` keeps them distinct.
inline bool argmax_invariant(const std::vector<double>& values, const std::function<double(double)>& f) {
  std::vector<double> mapped;
  for (double v : values) mapped.push_back(f(v));
  return select(values) == select(mapped);
}

}  // namespace xshot::testing
