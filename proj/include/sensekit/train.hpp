#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sensekit/corpus.hpp"
#include "sensekit/model.hpp"
#include "sensekit/optim.hpp"
#include "sensekit/teacher.hpp"

namespace sensekit {

/// Which context embedding feeds the center word's sense posterior.
enum class ContextMode {
  kGlobal,     ///< mean of context global embeddings
  kIterative,  ///< two-pass, posterior-weighted context sense vectors
};

/// Placement of the two distributions in the transfer cross-entropy.
enum class KdDirection {
  kPaper,           ///< -T^2 sum_k p_student(k) log p_teacher(k)
  kTeacherOutside,  ///< -T^2 sum_k p_teacher(k) log p_student(k)
};

std::optional<ContextMode> parse_context_mode(std::string_view s);
std::optional<IterContext> parse_iter_context(std::string_view s);
std::optional<KdDirection> parse_kd_direction(std::string_view s);
std::string_view to_string(ContextMode m);
std::string_view to_string(IterContext m);
std::string_view to_string(KdDirection d);

struct TrainConfig {
  int window = 5;
  std::size_t negatives = 10;
  std::size_t senses = 3;
  std::size_t dim = 300;
  double lr = 0.001;
  double alpha = 1.0;
  double temperature = 4.0;
  std::size_t epochs = 2;
  std::size_t batch_size = 2048;
  std::uint64_t seed = 1;
  bool distill = false;
  ContextMode context = ContextMode::kGlobal;
  IterContext iter_context = IterContext::kSharedWindow;
  KdDirection kd_direction = KdDirection::kPaper;
  double negative_exponent = 0.75;
  bool shuffle = true;
  unsigned threads = 1;

  /// Throws DataError naming the first invalid field.
  void validate() const;
};

inline constexpr double kLogFloor = 1e-12;

// ---------------------------------------------------------------------------
// Gradients and Adam

struct GradientSet {
  SparseRows global;
  SparseRows sense;   // K*D per word
  SparseRows disamb;  // K*D per word

  GradientSet(std::size_t senses, std::size_t dim)
      : global(dim), sense(senses * dim), disamb(senses * dim) {}

  void add(const GradientSet& other, double scale = 1.0);
  void clear();
  bool all_finite() const;
};

struct AdamState {
  AdamMoments global;
  AdamMoments sense;
  AdamMoments disamb;
  std::uint64_t step = 0;
  AdamConfig config;

  static AdamState for_params(const SenseModelParams& params);
};

/// One bias-corrected Adam step on the touched rows. Throws NumericError on a
/// non-finite gradient before anything is modified.
void adam_step(SenseModelParams& params, const GradientSet& grads, AdamState& state, double lr);

// ---------------------------------------------------------------------------
// Losses

/// Negatives for each context word, parallel to window.context.
using Negatives = std::vector<std::vector<WordId>>;

/// Per-window state frozen before differentiation: first-pass posteriors of
/// the context words (empty in global mode).
struct WindowContext {
  ContextMode mode = ContextMode::kGlobal;
  std::vector<Vec> first_pass;
};

WindowContext prepare_context(const ContextWindow& window, const SenseModelParams& params,
                              ContextMode mode, IterContext iter = IterContext::kSharedWindow);

/// Context embedding from current params with the frozen first pass.
Vec context_embedding(const ContextWindow& window, const SenseModelParams& params,
                      const WindowContext& ctx);

/// Negative-sampling loss of one window, positives and negatives scored
/// through the sense mixture.
double sense_loss(const ContextWindow& window, const Negatives& negatives,
                  const SenseModelParams& params, const WindowContext& ctx);
double sense_loss(const ContextWindow& window, const Negatives& negatives,
                  const SenseModelParams& params, ContextMode mode = ContextMode::kGlobal,
                  IterContext iter = IterContext::kSharedWindow);

/// Adds scale * dL/dtheta into `grads`, returns the loss.
double sense_loss_grad(const ContextWindow& window, const Negatives& negatives,
                       const SenseModelParams& params, const WindowContext& ctx,
                       GradientSet& grads, double scale = 1.0);

/// Teacher posterior softened to temperature T: q^(1/T) renormalized, with
/// entries clamped to kLogFloor first. Returns log-probabilities.
Vec soften_log(std::span<const double> teacher, double temperature);

/// Transfer loss between softmax(student_logits / T) and the softened teacher,
/// scaled by T^2. Throws DataError when the teacher is not normalized.
double distill_loss(std::span<const double> student_logits, std::span<const double> teacher,
                    double temperature, KdDirection direction = KdDirection::kPaper);

/// Gradient of distill_loss with respect to the student logits.
Vec distill_loss_grad(std::span<const double> student_logits, std::span<const double> teacher,
                      double temperature, KdDirection direction = KdDirection::kPaper);

struct LossParts {
  double total = 0.0;
  double sense = 0.0;
  double transfer = 0.0;
};

/// sense_loss + alpha * distill_loss on the center word's posterior logits.
/// `teacher` must be present when config.distill is set.
LossParts combined_loss(const ContextWindow& window, const Negatives& negatives,
                        const SenseModelParams& params, const WindowContext& ctx,
                        std::span<const double> teacher, const TrainConfig& config);

LossParts combined_loss_grad(const ContextWindow& window, const Negatives& negatives,
                             const SenseModelParams& params, const WindowContext& ctx,
                             std::span<const double> teacher, const TrainConfig& config,
                             GradientSet& grads, double scale = 1.0);

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_transfer = 0.0;
  std::size_t windows = 0;
};

/// `epoch<TAB>mean_loss<TAB>mean_transfer_loss<TAB>windows`
std::string format_epoch_line(const EpochStats& stats);

struct TrainResult {
  SenseModelParams params;
  std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&, const SenseModelParams&)>;

/// Mini-batch Adam over every window of the corpus. Single-threaded runs are
/// deterministic given the seed. With config.distill, `teacher` must hold a
/// posterior for every window.
TrainResult train(const std::vector<EncodedParagraph>& corpus, const Vocabulary& vocab,
                  const TrainConfig& config, const PosteriorStore* teacher = nullptr,
                  const EpochCallback& on_epoch = {});

}  // namespace sensekit
