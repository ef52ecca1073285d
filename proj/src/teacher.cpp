#include "sensekit/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sensekit/error.hpp"

namespace sensekit {

namespace {

constexpr std::string_view kRecordMagic = "TSE1";
constexpr std::string_view kPosteriorMagic = "TPO1";
constexpr std::string_view kTeacherParamsMagic = "TSP1";
constexpr std::uint32_t kTeacherParamsVersion = 1;

// u64 key + u32 center + u8 m
constexpr std::size_t kRecordFixedBytes = 8 + 4 + 1;

using Kind = FormatError::Kind;

FormatError record_error(Kind kind, const std::string& source, std::uint64_t index,
                         const std::string& what) {
  return FormatError(kind, source + ": record " + std::to_string(index) + ": " + what, index);
}

}  // namespace

const TeacherVector& TeacherRecord::center_vector() const {
  for (const auto& v : vectors) {
    if (v.offset == 0) return v;
  }
  throw DataError("teacher record " + std::to_string(key) + " has no center vector");
}

// ---------------------------------------------------------------------------

std::string encode_teacher_records(const TeacherRecordStore& store) {
  const auto& h = store.header;
  ByteWriter w;
  w.put_bytes(kRecordMagic);
  w.put<std::uint32_t>(h.version);
  w.put<std::uint32_t>(h.dim);
  w.put<std::uint32_t>(h.window);
  w.put<std::uint64_t>(store.records.size());
  w.put_bytes(h.vocab_digest);
  for (const auto& r : store.records) {
    if (r.vectors.empty() || r.vectors.size() > 255) {
      throw DataError("teacher record " + std::to_string(r.key) + ": vector count out of range");
    }
    w.put<std::uint64_t>(r.key);
    w.put<std::uint32_t>(r.center);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(r.vectors.size()));
    for (const auto& v : r.vectors) {
      if (v.values.size() != h.dim) {
        throw DataError("teacher record " + std::to_string(r.key) + ": vector length " +
                        std::to_string(v.values.size()) + " != Dt " + std::to_string(h.dim));
      }
      w.put<std::int8_t>(v.offset);
      w.put<std::uint32_t>(v.word);
      for (float x : v.values) w.put<float>(x);
    }
  }
  return w.bytes();
}

void write_teacher_records(const TeacherRecordStore& store, const std::filesystem::path& path) {
  write_file_atomic(path, encode_teacher_records(store));
}

TeacherRecordStore parse_teacher_records(std::string_view bytes, const std::string& source,
                                         const Vocabulary* vocab) {
  ByteReader r(bytes, source);
  if (r.remaining() < kTeacherHeaderBytes) {
    throw FormatError(Kind::kTruncated, source + ": truncated header");
  }
  if (r.get_bytes(4) != kRecordMagic) throw FormatError(Kind::kBadMagic, source + ": bad magic");
  TeacherRecordStore store;
  auto& h = store.header;
  h.version = r.get<std::uint32_t>();
  if (h.version != TeacherFileHeader::kVersion) {
    throw FormatError(Kind::kBadVersion,
                      source + ": unsupported version " + std::to_string(h.version));
  }
  h.dim = r.get<std::uint32_t>();
  h.window = r.get<std::uint32_t>();
  h.count = r.get<std::uint64_t>();
  h.vocab_digest = r.get_array<16>();
  if (h.dim == 0) throw FormatError(Kind::kShape, source + ": Dt is zero");
  if (h.window == 0 || h.window > 127) {
    throw FormatError(Kind::kShape, source + ": window out of range");
  }
  if (vocab != nullptr && h.vocab_digest != vocab->digest()) {
    throw FormatError(Kind::kDigestMismatch, source + ": vocabulary digest mismatch");
  }
  const std::size_t vector_bytes = 1 + 4 + std::size_t{h.dim} * 4;
  // The count is untrusted: reserve only what the remaining bytes could hold
  // and let the record loop report where the data runs out.
  store.records.reserve(std::min<std::uint64_t>(h.count, r.remaining() / (kRecordFixedBytes + vector_bytes)));
  const int delta = static_cast<int>(h.window);
  for (std::uint64_t i = 0; i < h.count; ++i) {
    TeacherRecord rec;
    try {
      rec.key = r.get<std::uint64_t>();
      rec.center = r.get<std::uint32_t>();
      const auto m = r.get<std::uint8_t>();
      if (m == 0) throw record_error(Kind::kShape, source, i, "no vectors");
      r.require(m * vector_bytes);
      rec.vectors.reserve(m);
      bool has_center = false;
      for (unsigned j = 0; j < m; ++j) {
        TeacherVector v;
        v.offset = r.get<std::int8_t>();
        v.word = r.get<std::uint32_t>();
        if (v.offset < -delta || v.offset > delta) {
          throw record_error(Kind::kValue, source, i, "offset out of range");
        }
        if (v.offset == 0) {
          if (has_center) throw record_error(Kind::kValue, source, i, "two center vectors");
          if (v.word != rec.center) {
            throw record_error(Kind::kValue, source, i, "center vector word differs from center");
          }
          has_center = true;
        }
        if (vocab != nullptr && v.word >= vocab->size()) {
          throw record_error(Kind::kValue, source, i, "word id out of vocabulary");
        }
        v.values.resize(h.dim);
        for (auto& x : v.values) {
          x = r.get<float>();
          if (!std::isfinite(x)) throw record_error(Kind::kValue, source, i, "non-finite value");
        }
        rec.vectors.push_back(std::move(v));
      }
      if (!has_center) throw record_error(Kind::kValue, source, i, "no center vector");
    } catch (const FormatError& e) {
      if (e.kind() == Kind::kTruncated) {
        throw record_error(Kind::kTruncated, source, i, "truncated");
      }
      throw;
    }
    store.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw FormatError(Kind::kShape, source + ": " + std::to_string(r.remaining()) +
                                        " trailing bytes after last record");
  }
  return store;
}

TeacherRecordStore read_teacher_records(const std::filesystem::path& path,
                                        const Vocabulary* vocab) {
  auto bytes = read_file(path);
  return parse_teacher_records(bytes, path.string(), vocab);
}

RecordValidation validate_teacher_records(const std::filesystem::path& path,
                                          const Vocabulary& vocab) {
  RecordValidation report;
  try {
    auto store = read_teacher_records(path, &vocab);
    report.ok = true;
    report.records = store.records.size();
    report.message = "ok";
  } catch (const FormatError& e) {
    report.message = e.what();
    report.first_bad_record = e.record();
    report.records = e.record().value_or(0);
  } catch (const std::exception& e) {
    report.message = e.what();
  }
  return report;
}

// ---------------------------------------------------------------------------

TeacherSenseParams::TeacherSenseParams(std::size_t vocab_size, std::size_t senses,
                                       std::size_t dim)
    : vocab_(vocab_size),
      senses_(senses),
      dim_(dim),
      u_(vocab_size * senses * dim, 0.0),
      d_(vocab_size * senses * dim, 0.0) {
  if (vocab_size == 0 || senses == 0 || dim == 0) {
    throw DataError("teacher dimensions must be >= 1");
  }
}

TeacherSenseParams init_teacher_params(std::size_t vocab_size, std::size_t senses,
                                       std::size_t dim, std::uint64_t seed) {
  TeacherSenseParams params(vocab_size, senses, dim);
  Rng rng(seed);
  const double bound = 1.0 / static_cast<double>(dim);
  for (auto& x : params.sense_data()) x = (2.0 * uniform01(rng) - 1.0) * bound;
  for (auto& x : params.disamb_data()) x = (2.0 * uniform01(rng) - 1.0) * bound;
  return params;
}

void save_teacher_params(const TeacherSenseParams& params, const Vocabulary& vocab,
                         const std::filesystem::path& path, unsigned float_width) {
  if (float_width != 4 && float_width != 8) throw DataError("float width must be 4 or 8");
  if (params.vocab_size() != vocab.size()) {
    throw DataError("teacher params do not match vocabulary size");
  }
  ByteWriter w;
  w.put_bytes(kTeacherParamsMagic);
  w.put<std::uint32_t>(kTeacherParamsVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.vocab_size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.senses()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.dim()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(float_width));
  w.put_bytes(vocab.digest());
  for (const auto* table : {&params.sense_data(), &params.disamb_data()}) {
    for (double x : *table) {
      if (float_width == 4) {
        w.put<float>(static_cast<float>(x));
      } else {
        w.put<double>(x);
      }
    }
  }
  write_file_atomic(path, w.bytes());
}

TeacherSenseParams load_teacher_params(const std::filesystem::path& path,
                                       const Vocabulary& vocab) {
  auto bytes = read_file(path);
  const auto source = path.string();
  ByteReader r(bytes, source);
  if (r.remaining() < 4 || r.get_bytes(4) != kTeacherParamsMagic) {
    throw FormatError(Kind::kBadMagic, source + ": bad magic");
  }
  if (r.get<std::uint32_t>() != kTeacherParamsVersion) {
    throw FormatError(Kind::kBadVersion, source + ": unsupported version");
  }
  const auto V = r.get<std::uint32_t>();
  const auto K = r.get<std::uint32_t>();
  const auto D = r.get<std::uint32_t>();
  const auto width = r.get<std::uint8_t>();
  auto digest = r.get_array<16>();
  if (width != 4 && width != 8) throw FormatError(Kind::kShape, source + ": bad float width");
  if (digest != vocab.digest()) {
    throw FormatError(Kind::kDigestMismatch, source + ": vocabulary digest mismatch");
  }
  if (V != vocab.size() || K == 0 || D == 0) {
    throw FormatError(Kind::kShape, source + ": shape does not match vocabulary");
  }
  const std::uint64_t n = std::uint64_t{V} * K * D;
  if (r.remaining() != 2 * n * width) {
    throw FormatError(Kind::kTruncated, source + ": payload length mismatch");
  }
  TeacherSenseParams params(V, K, D);
  for (auto* table : {&params.sense_data(), &params.disamb_data()}) {
    for (auto& x : *table) x = width == 4 ? static_cast<double>(r.get<float>()) : r.get<double>();
  }
  return params;
}

// ---------------------------------------------------------------------------

Vec teacher_context_embedding(const TeacherRecord& record) {
  if (record.vectors.empty()) throw DataError("teacher context embedding of an empty record");
  const std::size_t dim = record.vectors.front().values.size();
  Vec c(dim, 0.0);
  for (const auto& v : record.vectors) {
    if (v.values.size() != dim) throw DataError("teacher record has mixed vector lengths");
    for (std::size_t i = 0; i < dim; ++i) c[i] += v.values[i];
  }
  const double inv = 1.0 / static_cast<double>(record.vectors.size());
  for (auto& x : c) x *= inv;
  return c;
}

namespace {

Vec teacher_logits(WordId center, std::span<const double> context,
                   const TeacherSenseParams& params) {
  if (center >= params.vocab_size()) throw DataError("teacher record center outside vocabulary");
  if (context.size() != params.dim()) {
    throw DataError("teacher record dimension " + std::to_string(context.size()) +
                    " != teacher Dt " + std::to_string(params.dim()));
  }
  Vec z(params.senses());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = dot(params.disamb(center, k), context);
  return z;
}

}  // namespace

SensePosterior teacher_sense_posterior(WordId center, const TeacherRecord& record,
                                       const TeacherSenseParams& params, double temperature) {
  auto c = teacher_context_embedding(record);
  return SensePosterior{softmax(teacher_logits(center, c, params), temperature)};
}

double bert_sense_loss(const TeacherRecord& record, const TeacherSenseParams& params) {
  const auto& b = record.center_vector().values;
  auto post = teacher_sense_posterior(record.center, record, params);
  double loss = 0.0;
  for (std::size_t i = 0; i < params.dim(); ++i) {
    double recon = 0.0;
    for (std::size_t k = 0; k < params.senses(); ++k) {
      recon += post.probs[k] * params.sense(record.center, k)[i];
    }
    const double diff = recon - b[i];
    loss += diff * diff;
  }
  return loss;
}

double bert_sense_loss_grad(const TeacherRecord& record, const TeacherSenseParams& params,
                            TeacherGradient& grads, double scale) {
  const std::size_t K = params.senses();
  const std::size_t D = params.dim();
  const WordId w = record.center;
  const auto& b = record.center_vector().values;
  auto c = teacher_context_embedding(record);
  auto p = softmax(teacher_logits(w, c, params));

  Vec residual(D, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    auto u = params.sense(w, k);
    for (std::size_t i = 0; i < D; ++i) residual[i] += p[k] * u[i];
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    residual[i] -= b[i];
    loss += residual[i] * residual[i];
  }

  // dL/dp_k = 2 <u^k, r>; softmax backward gives dL/dz.
  Vec dp(K);
  double mean = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    dp[k] = 2.0 * dot(params.sense(w, k), residual);
    mean += p[k] * dp[k];
  }
  auto gu = grads.sense.row(w);
  auto gd = grads.disamb.row(w);
  for (std::size_t k = 0; k < K; ++k) {
    const double dz = p[k] * (dp[k] - mean);
    for (std::size_t i = 0; i < D; ++i) {
      gu[k * D + i] += scale * 2.0 * p[k] * residual[i];
      gd[k * D + i] += scale * dz * c[i];
    }
  }
  return loss;
}

TeacherFitResult fit_teacher(const TeacherRecordStore& store, std::size_t vocab_size,
                             const TeacherFitConfig& config,
                             const std::function<void(std::size_t, double)>& on_epoch) {
  if (store.records.empty()) throw DataError("fit_teacher: empty record store");
  const std::size_t dim = store.header.dim;
  if (config.expected_dim && *config.expected_dim != dim) {
    throw DataError("fit_teacher: record Dt " + std::to_string(dim) + " != expected " +
                    std::to_string(*config.expected_dim));
  }
  for (const auto& rec : store.records) {
    if (rec.center >= vocab_size) throw DataError("fit_teacher: center id outside vocabulary");
    for (const auto& v : rec.vectors) {
      if (v.values.size() != dim) {
        throw DataError("fit_teacher: record " + std::to_string(rec.key) +
                        " vector length != header Dt " + std::to_string(dim));
      }
    }
    (void)rec.center_vector();
  }
  if (config.batch_size == 0 || config.senses == 0) {
    throw DataError("fit_teacher: batch size and senses must be positive");
  }

  TeacherFitResult result{init_teacher_params(vocab_size, config.senses, dim, config.seed), {}};
  auto& params = result.params;
  AdamMoments mu(params.sense_data().size());
  AdamMoments md(params.disamb_data().size());
  AdamConfig adam;
  std::uint64_t step = 0;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(store.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TeacherGradient grads(config.senses, dim);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[j]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.sense.clear();
      grads.disamb.clear();
      for (std::size_t i = start; i < end; ++i) {
        total += bert_sense_loss_grad(store.records[order[i]], params, grads, scale);
      }
      if (!grads.sense.all_finite() || !grads.disamb.all_finite()) {
        throw NumericError("fit_teacher: non-finite gradient");
      }
      ++step;
      adam_update_rows(params.sense_data(), mu, grads.sense, config.lr, step, adam);
      adam_update_rows(params.disamb_data(), md, grads.disamb, config.lr, step, adam);
    }
    const double mean = total / static_cast<double>(order.size());
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

// ---------------------------------------------------------------------------

void PosteriorStore::insert(std::uint64_t key, std::span<const double> probs) {
  if (probs.size() != senses_) {
    throw DataError("posterior for key " + std::to_string(key) + " has " +
                    std::to_string(probs.size()) + " entries, expected " +
                    std::to_string(senses_));
  }
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw DataError("posterior for key " + std::to_string(key) + " has an invalid entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kTolerance) {
    throw DataError("posterior for key " + std::to_string(key) + " sums to " +
                    std::to_string(total));
  }
  if (!index_.emplace(key, keys_.size()).second) {
    throw DataError("duplicate posterior key " + std::to_string(key));
  }
  keys_.push_back(key);
  probs_.insert(probs_.end(), probs.begin(), probs.end());
}

std::span<const double> PosteriorStore::find(std::uint64_t key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return {};
  return probs_at(it->second);
}

PosteriorStore export_posteriors(const TeacherRecordStore& store,
                                 const TeacherSenseParams& params, double temperature) {
  PosteriorStore out(params.senses());
  for (const auto& rec : store.records) {
    out.insert(rec.key, teacher_sense_posterior(rec.center, rec, params, temperature).probs);
  }
  return out;
}

std::string encode_posteriors(const PosteriorStore& store) {
  ByteWriter w;
  w.put_bytes(kPosteriorMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.senses()));
  w.put<std::uint64_t>(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    w.put<std::uint64_t>(store.key_at(i));
    for (double p : store.probs_at(i)) w.put<float>(static_cast<float>(p));
  }
  return w.bytes();
}

void write_posteriors(const PosteriorStore& store, const std::filesystem::path& path) {
  write_file_atomic(path, encode_posteriors(store));
}

PosteriorStore parse_posteriors(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.remaining() < 4 + 4 + 8) throw FormatError(Kind::kTruncated, source + ": truncated header");
  if (r.get_bytes(4) != kPosteriorMagic) throw FormatError(Kind::kBadMagic, source + ": bad magic");
  const auto K = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (K == 0) throw FormatError(Kind::kShape, source + ": zero senses");
  const std::uint64_t entry = 8 + 4ULL * K;
  if (count > r.remaining() / entry || count * entry != r.remaining()) {
    throw FormatError(Kind::kTruncated, source + ": payload length does not match count");
  }
  PosteriorStore store(K);
  Vec probs(K);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto key = r.get<std::uint64_t>();
    for (auto& p : probs) p = r.get<float>();
    try {
      store.insert(key, probs);
    } catch (const DataError& e) {
      throw FormatError(Kind::kValue, source + ": entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return store;
}

PosteriorStore read_posteriors(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return parse_posteriors(bytes, path.string());
}

}  // namespace sensekit
