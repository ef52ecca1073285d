#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sensekit/binary.hpp"

namespace sensekit {

using WordId = std::uint32_t;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Tokenization

/// Splits on whitespace, peels leading and trailing punctuation off each chunk
/// as separate tokens, lowercases ASCII, and drops tokens without any
/// alphanumeric character. Internal punctuation ("lo-fi", "u.s") is kept.
/// Bytes >= 0x80 count as alphanumeric so UTF-8 words survive.
std::vector<std::string> tokenize(std::string_view text);

/// Same as tokenize, but blank lines separate paragraphs. Paragraphs that
/// contain no surviving token are kept as empty entries so paragraph indices
/// follow the text.
std::vector<std::vector<std::string>> tokenize_paragraphs(std::string_view text);

struct Document {
  std::vector<std::vector<std::string>> paragraphs;
};

inline constexpr std::string_view kDocSeparator = "<<<DOC>>>";

/// Splits text on `<<<DOC>>>` lines and tokenizes each document.
std::vector<Document> parse_corpus(std::string_view text);

/// A directory is read as one document per regular file (sorted by name);
/// a file is parsed with parse_corpus.
std::vector<Document> read_corpus(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts);

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  std::optional<WordId> id_of(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  std::uint64_t count(WordId id) const { return counts_.at(id); }

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  /// MD5 over the words in id order, each followed by '\n'. Counts do not
  /// participate: the digest binds ids, not frequencies.
  Digest digest() const;

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, WordId> index_;
};

/// Words with count >= min_count, ordered by descending count then bytewise.
Vocabulary build_vocab(std::span<const std::string> tokens, std::uint64_t min_count);
Vocabulary build_vocab(const std::vector<Document>& docs, std::uint64_t min_count);

/// Keeps exactly `words` in the given order; unseen words get count 0.
Vocabulary build_vocab_fixed(std::span<const std::string> tokens, std::vector<std::string> words);
Vocabulary build_vocab_fixed(const std::vector<Document>& docs, std::vector<std::string> words);

/// `word<TAB>count` per line, line order defines ids.
void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);
std::string format_vocab(const Vocabulary& vocab);

/// Word list file for fixed-list mode: first tab-separated field of each
/// non-empty line.
std::vector<std::string> load_word_list(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Windows

/// Location of a window's center token. Offset counts in-vocabulary tokens
/// of the paragraph (OOV tokens are removed before windowing).
struct WindowPosition {
  std::uint32_t doc = 0;
  std::uint32_t paragraph = 0;
  std::uint32_t offset = 0;

  static constexpr unsigned kDocBits = 24;
  static constexpr unsigned kParagraphBits = 20;
  static constexpr unsigned kOffsetBits = 20;

  /// doc << 40 | paragraph << 20 | offset. Throws DataError on overflow.
  std::uint64_t key() const;
  static WindowPosition from_key(std::uint64_t key);

  friend bool operator==(const WindowPosition&, const WindowPosition&) = default;
};

std::string to_string(const WindowPosition& pos);

struct ContextWindow {
  WordId center = 0;
  std::vector<WordId> context;
  WindowPosition position;
  /// Only filled when requested: for each context word, the ids within
  /// distance delta of that word's own paragraph position (itself excluded).
  std::vector<std::vector<WordId>> neighborhoods;
};

/// Window centered at `index`; context empty when no neighbors survive.
ContextWindow make_window(std::span<const WordId> ids, std::size_t index, int delta,
                          WindowPosition base = {}, bool with_neighborhoods = false);

/// One window per position with at least one context word. `base` gives the
/// doc and paragraph; each window's offset is its index within `ids`.
std::vector<ContextWindow> iter_windows(std::span<const WordId> ids, int delta,
                                        WindowPosition base = {},
                                        bool with_neighborhoods = false);

struct EncodedParagraph {
  WindowPosition base;  // offset is always 0
  std::vector<WordId> ids;
};

/// Maps tokens to ids dropping OOV, one entry per paragraph with >= 2 ids.
std::vector<EncodedParagraph> encode_corpus(const std::vector<Document>& docs,
                                            const Vocabulary& vocab);

/// Visits every window of the encoded corpus in order.
void for_each_window(const std::vector<EncodedParagraph>& paragraphs, int delta,
                     bool with_neighborhoods,
                     const std::function<void(const ContextWindow&)>& visit);

std::size_t count_windows(const std::vector<EncodedParagraph>& paragraphs, int delta);

// ---------------------------------------------------------------------------
// Negative sampling

/// Uniform double in [0, 1) from the top 53 bits; identical across stdlibs.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class NegativeSampler {
 public:
  NegativeSampler() = default;
  NegativeSampler(std::span<const std::uint64_t> counts, double exponent = 0.75);
  explicit NegativeSampler(const Vocabulary& vocab, double exponent = 0.75)
      : NegativeSampler(vocab.counts(), exponent) {}

  std::size_t size() const { return probs_.size(); }
  double exponent() const { return exponent_; }
  double probability(WordId id) const { return probs_.at(id); }

  WordId draw(Rng& rng) const;

 private:
  std::vector<double> probs_;
  std::vector<double> cumulative_;
  double exponent_ = 0.75;
};

/// n i.i.d. draws, redrawing any sample equal to `exclude`.
std::vector<WordId> draw_negatives(const NegativeSampler& sampler, std::size_t n, WordId exclude,
                                   Rng& rng);

}  // namespace sensekit
