#include "sensekit/optim.hpp"

#include <algorithm>
#include <cmath>

#include "sensekit/error.hpp"

namespace sensekit {

std::span<double> SparseRows::row(WordId id) {
  auto [it, inserted] = slot_.try_emplace(id, ids_.size());
  if (inserted) {
    ids_.push_back(id);
    data_.resize(data_.size() + width_, 0.0);
  }
  return {data_.data() + it->second * width_, width_};
}

std::span<const double> SparseRows::find(WordId id) const {
  auto it = slot_.find(id);
  if (it == slot_.end()) return {};
  return {data_.data() + it->second * width_, width_};
}

void SparseRows::add(const SparseRows& other, double scale) {
  if (other.width_ != width_) throw DataError("SparseRows::add: width mismatch");
  for (std::size_t s = 0; s < other.ids_.size(); ++s) {
    auto dst = row(other.ids_[s]);
    auto src = other.row_at(s);
    for (std::size_t i = 0; i < width_; ++i) dst[i] += scale * src[i];
  }
}

void SparseRows::scale(double factor) {
  for (auto& x : data_) x *= factor;
}

void SparseRows::clear() {
  ids_.clear();
  data_.clear();
  slot_.clear();
}

bool SparseRows::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void adam_update_rows(std::span<double> table, AdamMoments& moments, const SparseRows& grads,
                      double lr, std::uint64_t step, const AdamConfig& config) {
  const std::size_t width = grads.width();
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t s = 0; s < grads.size(); ++s) {
    const std::size_t base = static_cast<std::size_t>(grads.id_at(s)) * width;
    if (base + width > table.size()) throw DataError("adam: gradient row outside parameter table");
    auto g = grads.row_at(s);
    for (std::size_t i = 0; i < width; ++i) {
      double& m = moments.first[base + i];
      double& v = moments.second[base + i];
      m = config.beta1 * m + (1.0 - config.beta1) * g[i];
      v = config.beta2 * v + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      table[base + i] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

}  // namespace sensekit
