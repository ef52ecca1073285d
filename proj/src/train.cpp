#include "sensekit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "sensekit/error.hpp"

namespace sensekit {

std::optional<ContextMode> parse_context_mode(std::string_view s) {
  if (s == "global") return ContextMode::kGlobal;
  if (s == "iterative") return ContextMode::kIterative;
  return std::nullopt;
}

std::optional<IterContext> parse_iter_context(std::string_view s) {
  if (s == "shared-window") return IterContext::kSharedWindow;
  if (s == "word-centered") return IterContext::kWordCentered;
  return std::nullopt;
}

std::optional<KdDirection> parse_kd_direction(std::string_view s) {
  if (s == "paper") return KdDirection::kPaper;
  if (s == "teacher-outside") return KdDirection::kTeacherOutside;
  return std::nullopt;
}

std::string_view to_string(ContextMode m) {
  return m == ContextMode::kGlobal ? "global" : "iterative";
}

std::string_view to_string(IterContext m) {
  return m == IterContext::kSharedWindow ? "shared-window" : "word-centered";
}

std::string_view to_string(KdDirection d) {
  return d == KdDirection::kPaper ? "paper" : "teacher-outside";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw DataError("invalid config: " + what); };
  if (window < 1) fail("window must be >= 1");
  if (window > 127) fail("window must be <= 127");
  if (negatives < 1) fail("negatives must be >= 1");
  if (senses < 1) fail("senses must be >= 1");
  if (dim < 1) fail("dim must be >= 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(temperature > 0.0)) fail("temperature must be positive");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch size must be >= 1");
  if (!(negative_exponent > 0.0)) fail("negative exponent must be positive");
  if (threads < 1) fail("threads must be >= 1");
}

// ---------------------------------------------------------------------------

void GradientSet::add(const GradientSet& other, double scale) {
  global.add(other.global, scale);
  sense.add(other.sense, scale);
  disamb.add(other.disamb, scale);
}

void GradientSet::clear() {
  global.clear();
  sense.clear();
  disamb.clear();
}

bool GradientSet::all_finite() const {
  return global.all_finite() && sense.all_finite() && disamb.all_finite();
}

AdamState AdamState::for_params(const SenseModelParams& params) {
  AdamState s;
  s.global = AdamMoments(params.global_data().size());
  s.sense = AdamMoments(params.sense_data().size());
  s.disamb = AdamMoments(params.disamb_data().size());
  return s;
}

void adam_step(SenseModelParams& params, const GradientSet& grads, AdamState& state, double lr) {
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");
  if (state.global.first.size() != params.global_data().size() ||
      state.sense.first.size() != params.sense_data().size() ||
      state.disamb.first.size() != params.disamb_data().size()) {
    throw DataError("adam_step: optimizer state does not match parameter shapes");
  }
  ++state.step;
  adam_update_rows(params.global_data(), state.global, grads.global, lr, state.step, state.config);
  adam_update_rows(params.sense_data(), state.sense, grads.sense, lr, state.step, state.config);
  adam_update_rows(params.disamb_data(), state.disamb, grads.disamb, lr, state.step, state.config);
}

// ---------------------------------------------------------------------------

WindowContext prepare_context(const ContextWindow& window, const SenseModelParams& params,
                              ContextMode mode, IterContext iter) {
  WindowContext ctx;
  ctx.mode = mode;
  if (mode == ContextMode::kIterative) ctx.first_pass = first_pass_posteriors(window, params, iter);
  return ctx;
}

Vec context_embedding(const ContextWindow& window, const SenseModelParams& params,
                      const WindowContext& ctx) {
  if (ctx.mode == ContextMode::kGlobal) return context_embedding_global(window, params);
  if (ctx.first_pass.size() != window.context.size()) {
    throw DataError("window context state does not match the window");
  }
  return iterative_embedding(window, params, ctx.first_pass);
}

namespace {

struct Forward {
  Vec c;
  Vec logits;
  Vec posterior;
};

Forward forward(const ContextWindow& window, const SenseModelParams& params,
                const WindowContext& ctx) {
  Forward f;
  f.c = context_embedding(window, params, ctx);
  f.logits = sense_logits(window.center, f.c, params);
  f.posterior = softmax(f.logits);
  return f;
}

/// Sense loss of one window. With `grads`, adds the gradients of every term
/// that does not pass through the posterior, and accumulates dL/dposterior
/// into `dpost`.
double sense_terms(const ContextWindow& window, const Negatives& negatives,
                   const SenseModelParams& params, const Forward& f, GradientSet* grads,
                   double scale, Vec* dpost) {
  if (negatives.size() != window.context.size()) {
    throw DataError("negatives must be given for every context word");
  }
  const std::size_t K = params.senses();
  const std::size_t D = params.dim();
  const WordId w = window.center;
  Vec s(K);
  double loss = 0.0;

  auto term = [&](WordId x, bool positive) {
    auto gx = params.global(x);
    double p = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      s[k] = sigmoid(dot(gx, params.sense(w, k)));
      p += f.posterior[k] * s[k];
    }
    const double arg = positive ? p : 1.0 - p;
    double dldp = 0.0;
    if (arg > kLogFloor) {
      loss -= std::log(arg);
      dldp = positive ? -1.0 / arg : 1.0 / arg;
    } else {
      loss -= std::log(kLogFloor);
    }
    if (grads == nullptr || dldp == 0.0) return;
    auto g_row = grads->global.row(x);
    auto v_rows = grads->sense.row(w);
    for (std::size_t k = 0; k < K; ++k) {
      (*dpost)[k] += dldp * s[k];
      const double coeff = scale * dldp * f.posterior[k] * s[k] * (1.0 - s[k]);
      auto v = params.sense(w, k);
      for (std::size_t i = 0; i < D; ++i) {
        g_row[i] += coeff * v[i];
        v_rows[k * D + i] += coeff * gx[i];
      }
    }
  };

  for (std::size_t l = 0; l < window.context.size(); ++l) {
    term(window.context[l], true);
    for (WordId neg : negatives[l]) term(neg, false);
  }
  return loss;
}

/// Backpropagates dL/dlogits of the center word into d and the context
/// embedding inputs.
void backprop_logits(const ContextWindow& window, const SenseModelParams& params,
                     const WindowContext& ctx, const Forward& f, std::span<const double> dz,
                     GradientSet& grads, double scale) {
  const std::size_t K = params.senses();
  const std::size_t D = params.dim();
  const WordId w = window.center;
  Vec dc(D, 0.0);
  auto d_rows = grads.disamb.row(w);
  for (std::size_t k = 0; k < K; ++k) {
    if (dz[k] == 0.0) continue;
    auto d = params.disamb(w, k);
    for (std::size_t i = 0; i < D; ++i) {
      d_rows[k * D + i] += scale * dz[k] * f.c[i];
      dc[i] += dz[k] * d[i];
    }
  }
  const double inv_m = scale / static_cast<double>(window.context.size());
  if (ctx.mode == ContextMode::kGlobal) {
    for (WordId x : window.context) {
      auto row = grads.global.row(x);
      for (std::size_t i = 0; i < D; ++i) row[i] += inv_m * dc[i];
    }
    return;
  }
  for (std::size_t l = 0; l < window.context.size(); ++l) {
    auto rows = grads.sense.row(window.context[l]);
    for (std::size_t k = 0; k < K; ++k) {
      const double coeff = inv_m * ctx.first_pass[l][k];
      for (std::size_t i = 0; i < D; ++i) rows[k * D + i] += coeff * dc[i];
    }
  }
}

void check_teacher(std::span<const double> teacher) {
  double total = 0.0;
  for (double q : teacher) {
    if (!std::isfinite(q) || q < 0.0) throw DataError("teacher posterior has an invalid entry");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw DataError("teacher posterior is not normalized (sum " + std::to_string(total) + ")");
  }
}

Vec log_softmax(std::span<const double> logits, double temperature) {
  double top = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("non-finite logit");
    top = std::max(top, z / temperature);
  }
  double total = 0.0;
  for (double z : logits) total += std::exp(z / temperature - top);
  const double lse = top + std::log(total);
  Vec out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] / temperature - lse;
  return out;
}

}  // namespace

double sense_loss(const ContextWindow& window, const Negatives& negatives,
                  const SenseModelParams& params, const WindowContext& ctx) {
  auto f = forward(window, params, ctx);
  return sense_terms(window, negatives, params, f, nullptr, 0.0, nullptr);
}

double sense_loss(const ContextWindow& window, const Negatives& negatives,
                  const SenseModelParams& params, ContextMode mode, IterContext iter) {
  return sense_loss(window, negatives, params, prepare_context(window, params, mode, iter));
}

double sense_loss_grad(const ContextWindow& window, const Negatives& negatives,
                       const SenseModelParams& params, const WindowContext& ctx,
                       GradientSet& grads, double scale) {
  auto f = forward(window, params, ctx);
  Vec dpost(params.senses(), 0.0);
  const double loss = sense_terms(window, negatives, params, f, &grads, scale, &dpost);
  double mean = 0.0;
  for (std::size_t k = 0; k < dpost.size(); ++k) mean += f.posterior[k] * dpost[k];
  Vec dz(dpost.size());
  for (std::size_t k = 0; k < dz.size(); ++k) dz[k] = f.posterior[k] * (dpost[k] - mean);
  backprop_logits(window, params, ctx, f, dz, grads, scale);
  return loss;
}

Vec soften_log(std::span<const double> teacher, double temperature) {
  if (!(temperature > 0.0)) throw NumericError("temperature must be positive");
  Vec a(teacher.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::log(std::max(teacher[k], kLogFloor));
  return log_softmax(a, temperature);
}

double distill_loss(std::span<const double> student_logits, std::span<const double> teacher,
                    double temperature, KdDirection direction) {
  if (student_logits.size() != teacher.size()) {
    throw DataError("student and teacher posteriors differ in length");
  }
  check_teacher(teacher);
  const auto log_q = soften_log(teacher, temperature);
  const auto log_p = log_softmax(student_logits, temperature);
  double sum = 0.0;
  for (std::size_t k = 0; k < log_q.size(); ++k) {
    if (direction == KdDirection::kPaper) {
      sum += std::exp(log_p[k]) * log_q[k];
    } else {
      sum += std::exp(log_q[k]) * log_p[k];
    }
  }
  return -temperature * temperature * sum;
}

Vec distill_loss_grad(std::span<const double> student_logits, std::span<const double> teacher,
                      double temperature, KdDirection direction) {
  if (student_logits.size() != teacher.size()) {
    throw DataError("student and teacher posteriors differ in length");
  }
  check_teacher(teacher);
  const auto log_q = soften_log(teacher, temperature);
  const auto p = softmax(student_logits, temperature);
  const std::size_t K = p.size();
  Vec grad(K);
  if (direction == KdDirection::kPaper) {
    double mean = 0.0;
    for (std::size_t k = 0; k < K; ++k) mean += p[k] * log_q[k];
    for (std::size_t k = 0; k < K; ++k) grad[k] = -temperature * p[k] * (log_q[k] - mean);
  } else {
    for (std::size_t k = 0; k < K; ++k) grad[k] = temperature * (p[k] - std::exp(log_q[k]));
  }
  return grad;
}

namespace {

std::span<const double> require_teacher(const ContextWindow& window,
                                        std::span<const double> teacher,
                                        const TrainConfig& config) {
  if (!config.distill) return {};
  if (teacher.empty()) {
    throw DataError("missing teacher posterior for window at " + to_string(window.position));
  }
  if (teacher.size() != config.senses) {
    throw DataError("teacher posterior has " + std::to_string(teacher.size()) +
                    " senses, model has " + std::to_string(config.senses));
  }
  return teacher;
}

}  // namespace

LossParts combined_loss(const ContextWindow& window, const Negatives& negatives,
                        const SenseModelParams& params, const WindowContext& ctx,
                        std::span<const double> teacher, const TrainConfig& config) {
  auto t = require_teacher(window, teacher, config);
  auto f = forward(window, params, ctx);
  LossParts parts;
  parts.sense = sense_terms(window, negatives, params, f, nullptr, 0.0, nullptr);
  if (config.distill) {
    parts.transfer = distill_loss(f.logits, t, config.temperature, config.kd_direction);
  }
  parts.total = parts.sense + config.alpha * parts.transfer;
  return parts;
}

LossParts combined_loss_grad(const ContextWindow& window, const Negatives& negatives,
                             const SenseModelParams& params, const WindowContext& ctx,
                             std::span<const double> teacher, const TrainConfig& config,
                             GradientSet& grads, double scale) {
  auto t = require_teacher(window, teacher, config);
  auto f = forward(window, params, ctx);
  const std::size_t K = params.senses();
  LossParts parts;
  Vec dpost(K, 0.0);
  parts.sense = sense_terms(window, negatives, params, f, &grads, scale, &dpost);
  double mean = 0.0;
  for (std::size_t k = 0; k < K; ++k) mean += f.posterior[k] * dpost[k];
  Vec dz(K);
  for (std::size_t k = 0; k < K; ++k) dz[k] = f.posterior[k] * (dpost[k] - mean);
  if (config.distill) {
    parts.transfer = distill_loss(f.logits, t, config.temperature, config.kd_direction);
    if (config.alpha != 0.0) {
      auto dt = distill_loss_grad(f.logits, t, config.temperature, config.kd_direction);
      for (std::size_t k = 0; k < K; ++k) dz[k] += config.alpha * dt[k];
    }
  }
  parts.total = parts.sense + config.alpha * parts.transfer;
  backprop_logits(window, params, ctx, f, dz, grads, scale);
  return parts;
}

// ---------------------------------------------------------------------------

std::string format_epoch_line(const EpochStats& stats) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu\t%.9g\t%.9g\t%zu", stats.epoch, stats.mean_loss,
                stats.mean_transfer, stats.windows);
  return buf;
}

namespace {

struct WindowRef {
  std::uint32_t paragraph;
  std::uint32_t offset;
};

struct BatchItem {
  ContextWindow window;
  Negatives negatives;
  std::span<const double> teacher;
};

LossParts batch_gradient(std::span<const BatchItem> items, const SenseModelParams& params,
                         const TrainConfig& config, GradientSet& grads, double scale) {
  LossParts sum;
  for (const auto& item : items) {
    auto ctx = prepare_context(item.window, params, config.context, config.iter_context);
    auto parts = combined_loss_grad(item.window, item.negatives, params, ctx, item.teacher,
                                    config, grads, scale);
    sum.total += parts.total;
    sum.sense += parts.sense;
    sum.transfer += parts.transfer;
  }
  return sum;
}

}  // namespace

TrainResult train(const std::vector<EncodedParagraph>& corpus, const Vocabulary& vocab,
                  const TrainConfig& config, const PosteriorStore* teacher,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (config.distill) {
    if (teacher == nullptr) throw DataError("distillation requires a teacher posterior store");
    if (teacher->senses() != config.senses) {
      throw DataError("posterior store has " + std::to_string(teacher->senses()) +
                      " senses, model has " + std::to_string(config.senses));
    }
  }
  std::vector<WindowRef> refs;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    if (corpus[p].ids.size() < 2) continue;
    for (std::size_t i = 0; i < corpus[p].ids.size(); ++i) {
      if (corpus[p].ids[i] >= vocab.size()) throw DataError("corpus id outside vocabulary");
      refs.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(i)});
    }
  }
  if (refs.empty()) throw DataError("train: corpus has no windows");

  TrainResult result{init_params(vocab.size(), config.senses, config.dim, config.seed), {}};
  auto& params = result.params;
  AdamState adam = AdamState::for_params(params);
  NegativeSampler sampler(vocab.counts(), config.negative_exponent);
  Rng rng(config.seed ^ 0x5851f42d4c957f2dULL);
  const bool neighborhoods = config.context == ContextMode::kIterative &&
                             config.iter_context == IterContext::kWordCentered;
  const unsigned threads = config.threads;

  GradientSet grads(config.senses, config.dim);
  std::vector<GradientSet> shard_grads;
  for (unsigned t = 0; t < threads; ++t) shard_grads.emplace_back(config.senses, config.dim);
  std::vector<BatchItem> batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = refs.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(refs[i - 1], refs[j]);
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    double loss_sum = 0.0;
    double transfer_sum = 0.0;

    for (std::size_t start = 0; start < refs.size(); start += config.batch_size) {
      const std::size_t end = std::min(refs.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t r = start; r < end; ++r) {
        const auto& para = corpus[refs[r].paragraph];
        BatchItem item;
        item.window =
            make_window(para.ids, refs[r].offset, config.window, para.base, neighborhoods);
        item.negatives.reserve(item.window.context.size());
        for (WordId ctx_word : item.window.context) {
          item.negatives.push_back(draw_negatives(sampler, config.negatives, ctx_word, rng));
        }
        if (config.distill) {
          item.teacher = teacher->find(item.window.position.key());
          if (item.teacher.empty()) {
            throw DataError("missing teacher posterior for window at " +
                            to_string(item.window.position));
          }
        }
        batch.push_back(std::move(item));
      }
      const double scale = 1.0 / static_cast<double>(batch.size());
      grads.clear();
      LossParts parts;
      if (threads == 1 || batch.size() < 2 * threads) {
        parts = batch_gradient(batch, params, config, grads, scale);
      } else {
        std::vector<LossParts> shard_parts(threads);
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        const std::size_t per = (batch.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
          pool.emplace_back([&, t] {
            try {
              shard_grads[t].clear();
              const std::size_t lo = std::min(batch.size(), t * per);
              const std::size_t hi = std::min(batch.size(), lo + per);
              shard_parts[t] = batch_gradient(std::span(batch).subspan(lo, hi - lo), params,
                                              config, shard_grads[t], scale);
            } catch (...) {
              errors[t] = std::current_exception();
            }
          });
        }
        for (auto& th : pool) th.join();
        for (unsigned t = 0; t < threads; ++t) {
          if (errors[t]) std::rethrow_exception(errors[t]);
          grads.add(shard_grads[t]);
          parts.total += shard_parts[t].total;
          parts.transfer += shard_parts[t].transfer;
        }
      }
      loss_sum += parts.total;
      transfer_sum += parts.transfer;
      stats.windows += batch.size();
      adam_step(params, grads, adam, config.lr);
    }
    stats.mean_loss = loss_sum / static_cast<double>(stats.windows);
    stats.mean_transfer = transfer_sum / static_cast<double>(stats.windows);
    if (!std::isfinite(stats.mean_loss) || !params.all_finite()) {
      throw NumericError("training diverged in epoch " + std::to_string(epoch));
    }
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats, params);
  }
  return result;
}

}  // namespace sensekit
