#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace sensekit {

/// Malformed input data: corpus, vocabulary, datasets, binary files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or other numeric breakdowns.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary file errors. Each failure mode gets its own kind so callers can
/// distinguish a truncated payload from a vocabulary mismatch.
class FormatError : public DataError {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kTruncated, kDigestMismatch, kShape, kValue };

  FormatError(Kind kind, const std::string& what, std::optional<std::uint64_t> record = {})
      : DataError(what), kind_(kind), record_(record) {}

  Kind kind() const noexcept { return kind_; }
  /// Index of the offending record, for formats made of records.
  std::optional<std::uint64_t> record() const noexcept { return record_; }

 private:
  Kind kind_;
  std::optional<std::uint64_t> record_;
};

}  // namespace sensekit
