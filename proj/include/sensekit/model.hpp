#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sensekit/corpus.hpp"

namespace sensekit {

using Vec = std::vector<double>;

/// How the first pass of iterative disambiguation builds each context word's
/// own context embedding.
enum class IterContext {
  kSharedWindow,  ///< the same window's other words, center included
  kWordCentered,  ///< the word's own +-delta paragraph neighborhood
};

/// Global (V x D), sense (V x K x D) and disambiguation (V x K x D) tables.
/// Sense and disambiguation rows are stored word-major, sense-minor.
class SenseModelParams {
 public:
  SenseModelParams() = default;
  SenseModelParams(std::size_t vocab_size, std::size_t senses, std::size_t dim);

  std::size_t vocab_size() const { return vocab_; }
  std::size_t senses() const { return senses_; }
  std::size_t dim() const { return dim_; }

  std::span<double> global(WordId w) { return {global_.data() + w * dim_, dim_}; }
  std::span<const double> global(WordId w) const { return {global_.data() + w * dim_, dim_}; }
  std::span<double> sense(WordId w, std::size_t k) { return {sense_.data() + row(w, k), dim_}; }
  std::span<const double> sense(WordId w, std::size_t k) const {
    return {sense_.data() + row(w, k), dim_};
  }
  std::span<double> disamb(WordId w, std::size_t k) { return {disamb_.data() + row(w, k), dim_}; }
  std::span<const double> disamb(WordId w, std::size_t k) const {
    return {disamb_.data() + row(w, k), dim_};
  }

  std::vector<double>& global_data() { return global_; }
  const std::vector<double>& global_data() const { return global_; }
  std::vector<double>& sense_data() { return sense_; }
  const std::vector<double>& sense_data() const { return sense_; }
  std::vector<double>& disamb_data() { return disamb_; }
  const std::vector<double>& disamb_data() const { return disamb_; }

  bool all_finite() const;

  friend bool operator==(const SenseModelParams&, const SenseModelParams&) = default;

 private:
  std::size_t row(WordId w, std::size_t k) const { return (w * senses_ + k) * dim_; }

  std::size_t vocab_ = 0;
  std::size_t senses_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> global_;
  std::vector<double> sense_;
  std::vector<double> disamb_;
};

/// Every entry i.i.d. uniform on [-1/D, 1/D]; g, then v, then d.
SenseModelParams init_params(std::size_t vocab_size, std::size_t senses, std::size_t dim,
                             std::uint64_t seed);

struct SensePosterior {
  Vec probs;

  /// Ties go to the lowest index.
  std::size_t argmax() const;
};

double dot(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const double> b);
double sigmoid(double x);

/// softmax(logits / T) with max subtraction. Throws NumericError on
/// non-finite logits or T <= 0.
Vec softmax(std::span<const double> logits, double temperature = 1.0);

/// <d_word^k, c> for every sense k.
Vec sense_logits(WordId word, std::span<const double> context, const SenseModelParams& params);

SensePosterior sense_posterior(WordId word, std::span<const double> context,
                               const SenseModelParams& params, double temperature = 1.0);

/// Mean of the context words' global embeddings.
Vec context_embedding_global(std::span<const WordId> context, const SenseModelParams& params);
Vec context_embedding_global(const ContextWindow& window, const SenseModelParams& params);

/// First pass of iterative disambiguation: one posterior per context word.
std::vector<Vec> first_pass_posteriors(const ContextWindow& window, const SenseModelParams& params,
                                       IterContext mode = IterContext::kSharedWindow);

/// Second pass: mean over context words of their posterior-weighted sense
/// vectors, with `first_pass` treated as constants.
Vec iterative_embedding(const ContextWindow& window, const SenseModelParams& params,
                        std::span<const Vec> first_pass);

Vec context_embedding_iterative(const ContextWindow& window, const SenseModelParams& params,
                                IterContext mode = IterContext::kSharedWindow);

/// sigma(<g_context, v_center^k>).
double score_context_word(WordId context_word, WordId center, std::size_t k,
                          const SenseModelParams& params);

/// sum_k score(k) * posterior[k].
double mixture_context_prob(WordId context_word, WordId center, std::span<const double> posterior,
                            const SenseModelParams& params);

/// Mixture probability with the center's posterior from the global context
/// embedding of `window`.
double mixture_context_prob(WordId context_word, const ContextWindow& window,
                            const SenseModelParams& params);

}  // namespace sensekit
