#pragma once

// Row-sparse gradients and the Adam update shared by the student trainer and
// the teacher fit.

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "sensekit/corpus.hpp"

namespace sensekit {

/// Gradient rows keyed by word id. Iteration follows first-touch order so
/// accumulation is deterministic.
class SparseRows {
 public:
  explicit SparseRows(std::size_t width = 0) : width_(width) {}

  std::size_t width() const { return width_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  /// Row for `id`, zero-initialized on first touch.
  std::span<double> row(WordId id);
  /// Empty span when `id` was never touched.
  std::span<const double> find(WordId id) const;

  WordId id_at(std::size_t slot) const { return ids_[slot]; }
  std::span<const double> row_at(std::size_t slot) const {
    return {data_.data() + slot * width_, width_};
  }
  const std::vector<WordId>& ids() const { return ids_; }

  void add(const SparseRows& other, double scale = 1.0);
  void scale(double factor);
  void clear();
  bool all_finite() const;

 private:
  std::size_t width_;
  std::vector<WordId> ids_;
  std::vector<double> data_;
  std::unordered_map<WordId, std::size_t> slot_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments for one dense parameter table.
struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;

  explicit AdamMoments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}
};

/// Bias-corrected Adam applied to the touched rows only. `step` is the
/// already-incremented step counter (>= 1).
void adam_update_rows(std::span<double> table, AdamMoments& moments, const SparseRows& grads,
                      double lr, std::uint64_t step, const AdamConfig& config);

}  // namespace sensekit
