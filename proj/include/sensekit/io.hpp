#pragma once

// Model persistence. Binary layout (little-endian):
//   "SNS1" | u32 version | u32 V | u32 K | u32 D | u8 float width | 16-byte vocab digest
//   g rows, then v rows (word-major, sense-minor), then d rows.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "sensekit/corpus.hpp"
#include "sensekit/model.hpp"

namespace sensekit {

struct ModelFileHeader {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kBytes = 4 + 4 + 4 + 4 + 4 + 1 + 16;

  std::uint32_t version = kVersion;
  std::uint32_t vocab_size = 0;
  std::uint32_t senses = 0;
  std::uint32_t dim = 0;
  std::uint8_t float_width = 4;
  Digest vocab_digest{};
};

std::string encode_model(const SenseModelParams& params, const Vocabulary& vocab,
                         unsigned float_width = 4);

/// Validates magic, version, shape and payload length against the byte count
/// before allocating, then the digest against `vocab`.
SenseModelParams decode_model(std::string_view bytes, const Vocabulary& vocab,
                              const std::string& source = "<model>",
                              ModelFileHeader* header = nullptr);

void save_model(const SenseModelParams& params, const Vocabulary& vocab,
                const std::filesystem::path& path, unsigned float_width = 4);
SenseModelParams load_model(const std::filesystem::path& path, const Vocabulary& vocab,
                            ModelFileHeader* header = nullptr);

/// word2vec-style text: `V*(K+1) D`, then `word` (global) and `word#k`
/// (sense k) lines with 9 significant digits.
void export_text(const SenseModelParams& params, const Vocabulary& vocab,
                 const std::filesystem::path& path);
std::string format_text(const SenseModelParams& params, const Vocabulary& vocab);

/// Reads a text export back into label -> vector.
std::map<std::string, std::vector<double>> parse_text_embeddings(std::string_view text);

}  // namespace sensekit
