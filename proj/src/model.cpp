#include "sensekit/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sensekit/error.hpp"

namespace sensekit {

SenseModelParams::SenseModelParams(std::size_t vocab_size, std::size_t senses, std::size_t dim)
    : vocab_(vocab_size),
      senses_(senses),
      dim_(dim),
      global_(vocab_size * dim, 0.0),
      sense_(vocab_size * senses * dim, 0.0),
      disamb_(vocab_size * senses * dim, 0.0) {
  if (vocab_size == 0 || senses == 0 || dim == 0) {
    throw DataError("model dimensions must be >= 1 (V=" + std::to_string(vocab_size) +
                    ", K=" + std::to_string(senses) + ", D=" + std::to_string(dim) + ")");
  }
}

bool SenseModelParams::all_finite() const {
  auto finite = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(global_) && finite(sense_) && finite(disamb_);
}

SenseModelParams init_params(std::size_t vocab_size, std::size_t senses, std::size_t dim,
                             std::uint64_t seed) {
  SenseModelParams params(vocab_size, senses, dim);
  Rng rng(seed);
  const double bound = 1.0 / static_cast<double>(dim);
  auto fill = [&](std::vector<double>& xs) {
    for (auto& x : xs) x = (2.0 * uniform01(rng) - 1.0) * bound;
  };
  fill(params.global_data());
  fill(params.sense_data());
  fill(params.disamb_data());
  return params;
}

std::size_t SensePosterior::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw NumericError("softmax: temperature must be positive and finite");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("softmax: non-finite logit");
    top = std::max(top, z);
  }
  Vec out(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp((logits[k] - top) / temperature);
    total += out[k];
  }
  for (auto& p : out) p /= total;
  return out;
}

Vec sense_logits(WordId word, std::span<const double> context, const SenseModelParams& params) {
  Vec z(params.senses());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = dot(params.disamb(word, k), context);
  return z;
}

SensePosterior sense_posterior(WordId word, std::span<const double> context,
                               const SenseModelParams& params, double temperature) {
  auto z = sense_logits(word, context, params);
  return SensePosterior{softmax(z, temperature)};
}

Vec context_embedding_global(std::span<const WordId> context, const SenseModelParams& params) {
  if (context.empty()) throw DataError("context embedding of an empty context");
  Vec c(params.dim(), 0.0);
  for (WordId w : context) {
    auto g = params.global(w);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(context.size());
  for (auto& x : c) x *= inv;
  return c;
}

Vec context_embedding_global(const ContextWindow& window, const SenseModelParams& params) {
  return context_embedding_global(window.context, params);
}

std::vector<Vec> first_pass_posteriors(const ContextWindow& window, const SenseModelParams& params,
                                       IterContext mode) {
  if (window.context.empty()) throw DataError("context embedding of an empty context");
  std::vector<Vec> out;
  out.reserve(window.context.size());
  if (mode == IterContext::kWordCentered) {
    if (window.neighborhoods.size() != window.context.size()) {
      throw DataError("word-centered disambiguation needs per-word neighborhoods");
    }
    for (std::size_t l = 0; l < window.context.size(); ++l) {
      auto c = context_embedding_global(window.neighborhoods[l], params);
      out.push_back(sense_posterior(window.context[l], c, params).probs);
    }
    return out;
  }
  // Shared window: word l sees the center plus every other context word.
  // Sum once, then subtract each word's own vector.
  const std::size_t D = params.dim();
  Vec total(params.global(window.center).begin(), params.global(window.center).end());
  for (WordId w : window.context) {
    auto g = params.global(w);
    for (std::size_t i = 0; i < D; ++i) total[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(window.context.size());
  Vec c(D);
  for (WordId w : window.context) {
    auto g = params.global(w);
    for (std::size_t i = 0; i < D; ++i) c[i] = (total[i] - g[i]) * inv;
    out.push_back(sense_posterior(w, c, params).probs);
  }
  return out;
}

Vec iterative_embedding(const ContextWindow& window, const SenseModelParams& params,
                        std::span<const Vec> first_pass) {
  if (window.context.empty()) throw DataError("context embedding of an empty context");
  const std::size_t D = params.dim();
  Vec c(D, 0.0);
  for (std::size_t l = 0; l < window.context.size(); ++l) {
    for (std::size_t k = 0; k < params.senses(); ++k) {
      const double p = first_pass[l][k];
      auto v = params.sense(window.context[l], k);
      for (std::size_t i = 0; i < D; ++i) c[i] += p * v[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(window.context.size());
  for (auto& x : c) x *= inv;
  return c;
}

Vec context_embedding_iterative(const ContextWindow& window, const SenseModelParams& params,
                                IterContext mode) {
  auto first = first_pass_posteriors(window, params, mode);
  return iterative_embedding(window, params, first);
}

double score_context_word(WordId context_word, WordId center, std::size_t k,
                          const SenseModelParams& params) {
  return sigmoid(dot(params.global(context_word), params.sense(center, k)));
}

double mixture_context_prob(WordId context_word, WordId center, std::span<const double> posterior,
                            const SenseModelParams& params) {
  double p = 0.0;
  for (std::size_t k = 0; k < params.senses(); ++k) {
    p += posterior[k] * score_context_word(context_word, center, k, params);
  }
  return p;
}

double mixture_context_prob(WordId context_word, const ContextWindow& window,
                            const SenseModelParams& params) {
  auto c = context_embedding_global(window, params);
  auto post = sense_posterior(window.center, c, params);
  return mixture_context_prob(context_word, window.center, post.probs, params);
}

}  // namespace sensekit
