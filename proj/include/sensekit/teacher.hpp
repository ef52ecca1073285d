#pragma once

// Teacher sense model: sense vectors in contextual-encoder space whose
// posterior-weighted sum reconstructs the encoder's output vector for the
// center word. Its posteriors are exported for distillation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sensekit/binary.hpp"
#include "sensekit/corpus.hpp"
#include "sensekit/model.hpp"
#include "sensekit/optim.hpp"

namespace sensekit {

// ---------------------------------------------------------------------------
// Records (TSE1)

struct TeacherVector {
  std::int8_t offset = 0;  // relative to the center, in [-delta, delta]
  WordId word = 0;
  std::vector<float> values;
};

/// Pooled encoder vectors for one window. The center is the vector at offset 0.
struct TeacherRecord {
  std::uint64_t key = 0;
  WordId center = 0;
  std::vector<TeacherVector> vectors;

  /// Throws DataError when no offset-0 vector is present.
  const TeacherVector& center_vector() const;
};

struct TeacherFileHeader {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::uint32_t dim = 0;
  std::uint32_t window = 0;
  std::uint64_t count = 0;
  Digest vocab_digest{};
};

inline constexpr std::size_t kTeacherHeaderBytes = 4 + 4 + 4 + 4 + 8 + 16;

struct TeacherRecordStore {
  TeacherFileHeader header;
  std::vector<TeacherRecord> records;
};

/// Header count is taken from records.size().
std::string encode_teacher_records(const TeacherRecordStore& store);
void write_teacher_records(const TeacherRecordStore& store, const std::filesystem::path& path);

/// Full structural validation. With a vocabulary, also checks the digest and
/// word ids. Throws FormatError; messages name the offending record index.
TeacherRecordStore parse_teacher_records(std::string_view bytes, const std::string& source,
                                         const Vocabulary* vocab = nullptr);
TeacherRecordStore read_teacher_records(const std::filesystem::path& path,
                                        const Vocabulary* vocab = nullptr);

struct RecordValidation {
  bool ok = false;
  std::uint64_t records = 0;
  std::optional<std::uint64_t> first_bad_record;
  std::string message;
};

/// Non-throwing form of read_teacher_records for the format checker.
RecordValidation validate_teacher_records(const std::filesystem::path& path,
                                          const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Teacher parameters

class TeacherSenseParams {
 public:
  TeacherSenseParams() = default;
  TeacherSenseParams(std::size_t vocab_size, std::size_t senses, std::size_t dim);

  std::size_t vocab_size() const { return vocab_; }
  std::size_t senses() const { return senses_; }
  std::size_t dim() const { return dim_; }

  std::span<double> sense(WordId w, std::size_t k) { return {u_.data() + row(w, k), dim_}; }
  std::span<const double> sense(WordId w, std::size_t k) const {
    return {u_.data() + row(w, k), dim_};
  }
  std::span<double> disamb(WordId w, std::size_t k) { return {d_.data() + row(w, k), dim_}; }
  std::span<const double> disamb(WordId w, std::size_t k) const {
    return {d_.data() + row(w, k), dim_};
  }

  std::vector<double>& sense_data() { return u_; }
  const std::vector<double>& sense_data() const { return u_; }
  std::vector<double>& disamb_data() { return d_; }
  const std::vector<double>& disamb_data() const { return d_; }

  friend bool operator==(const TeacherSenseParams&, const TeacherSenseParams&) = default;

 private:
  std::size_t row(WordId w, std::size_t k) const { return (w * senses_ + k) * dim_; }

  std::size_t vocab_ = 0;
  std::size_t senses_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> u_;
  std::vector<double> d_;
};

TeacherSenseParams init_teacher_params(std::size_t vocab_size, std::size_t senses,
                                       std::size_t dim, std::uint64_t seed);

/// TSP1: magic, u32 version, u32 V, u32 K, u32 Dt, u8 float width,
/// 16-byte vocabulary digest, then u and dt tables.
void save_teacher_params(const TeacherSenseParams& params, const Vocabulary& vocab,
                         const std::filesystem::path& path, unsigned float_width = 4);
TeacherSenseParams load_teacher_params(const std::filesystem::path& path,
                                       const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Forward, loss, fit

/// Mean of every vector in the record, center included.
Vec teacher_context_embedding(const TeacherRecord& record);

SensePosterior teacher_sense_posterior(WordId center, const TeacherRecord& record,
                                       const TeacherSenseParams& params,
                                       double temperature = 1.0);

/// || sum_k p(k) u_center^k - b_center ||^2 with the T=1 posterior.
double bert_sense_loss(const TeacherRecord& record, const TeacherSenseParams& params);

struct TeacherGradient {
  SparseRows sense;
  SparseRows disamb;

  TeacherGradient(std::size_t senses, std::size_t dim)
      : sense(senses * dim), disamb(senses * dim) {}
};

/// Adds scale * dL/dtheta into `grads` and returns the loss.
double bert_sense_loss_grad(const TeacherRecord& record, const TeacherSenseParams& params,
                            TeacherGradient& grads, double scale = 1.0);

struct TeacherFitConfig {
  std::size_t senses = 3;
  std::size_t epochs = 5;
  double lr = 0.001;
  std::uint64_t seed = 1;
  std::size_t batch_size = 64;
  /// When set, the record dimension must equal this value.
  std::optional<std::size_t> expected_dim;
};

struct TeacherFitResult {
  TeacherSenseParams params;
  std::vector<double> epoch_losses;
};

/// Minimizes the mean reconstruction loss with Adam over shuffled batches.
TeacherFitResult fit_teacher(const TeacherRecordStore& store, std::size_t vocab_size,
                             const TeacherFitConfig& config,
                             const std::function<void(std::size_t, double)>& on_epoch = {});

// ---------------------------------------------------------------------------
// Posterior store (TPO1)

class PosteriorStore {
 public:
  static constexpr double kTolerance = 1e-6;

  explicit PosteriorStore(std::size_t senses = 0) : senses_(senses) {}

  std::size_t senses() const { return senses_; }
  std::size_t size() const { return keys_.size(); }

  /// Throws DataError when probs is not a K-simplex within kTolerance, or the
  /// key is already present.
  void insert(std::uint64_t key, std::span<const double> probs);

  /// Empty span when absent.
  std::span<const double> find(std::uint64_t key) const;

  std::uint64_t key_at(std::size_t i) const { return keys_[i]; }
  std::span<const double> probs_at(std::size_t i) const {
    return {probs_.data() + i * senses_, senses_};
  }

 private:
  std::size_t senses_;
  std::vector<std::uint64_t> keys_;
  std::vector<double> probs_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// One temperature-T posterior per record, keyed by the record's window key.
PosteriorStore export_posteriors(const TeacherRecordStore& store,
                                 const TeacherSenseParams& params, double temperature);

std::string encode_posteriors(const PosteriorStore& store);
void write_posteriors(const PosteriorStore& store, const std::filesystem::path& path);
PosteriorStore parse_posteriors(std::string_view bytes, const std::string& source);
PosteriorStore read_posteriors(const std::filesystem::path& path);

}  // namespace sensekit
