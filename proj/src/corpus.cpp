#include "sensekit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "sensekit/error.hpp"

namespace sensekit {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

void append_tokens(std::string_view text, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t end = i;
    while (end < text.size() && !is_space(static_cast<unsigned char>(text[end]))) ++end;
    auto chunk = text.substr(i, end - i);
    i = end;
    // Leading and trailing punctuation runs become their own tokens, which
    // carry no alphanumeric character and are dropped.
    std::size_t first = 0;
    while (first < chunk.size() && !is_alnum(static_cast<unsigned char>(chunk[first]))) ++first;
    if (first == chunk.size()) continue;
    std::size_t last = chunk.size();
    while (!is_alnum(static_cast<unsigned char>(chunk[last - 1]))) --last;
    std::string token(chunk.substr(first, last - first));
    for (auto& c : token) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    out.push_back(std::move(token));
  }
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return is_space(static_cast<unsigned char>(c)); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) fn(text.substr(start));
      break;
    }
    fn(text.substr(start, nl - start));
    start = nl + 1;
  }
}

Document make_document(std::string_view text) { return Document{tokenize_paragraphs(text)}; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  append_tokens(text, out);
  return out;
}

std::vector<std::vector<std::string>> tokenize_paragraphs(std::string_view text) {
  std::vector<std::vector<std::string>> paragraphs;
  bool in_paragraph = false;
  for_each_line(text, [&](std::string_view line) {
    if (is_blank(line)) {
      in_paragraph = false;
      return;
    }
    if (!in_paragraph) {
      paragraphs.emplace_back();
      in_paragraph = true;
    }
    append_tokens(line, paragraphs.back());
  });
  return paragraphs;
}

std::vector<Document> parse_corpus(std::string_view text) {
  std::vector<Document> docs;
  std::size_t seg_start = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line_end = nl == std::string_view::npos ? text.size() : nl;
    if (trim(text.substr(pos, line_end - pos)) == kDocSeparator) {
      docs.push_back(make_document(text.substr(seg_start, pos - seg_start)));
      seg_start = nl == std::string_view::npos ? text.size() : nl + 1;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  docs.push_back(make_document(text.substr(seg_start)));
  return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    docs.reserve(files.size());
    for (const auto& f : files) docs.push_back(make_document(read_file(f)));
    return docs;
  }
  return parse_corpus(read_file(path));
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts)
    : words_(std::move(words)), counts_(std::move(counts)) {
  if (words_.size() != counts_.size()) {
    throw DataError("vocabulary: words and counts differ in length");
  }
  if (words_.size() > std::numeric_limits<WordId>::max()) {
    throw DataError("vocabulary: too many words");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) throw DataError("vocabulary: empty word at id " + std::to_string(i));
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second) {
      throw DataError("vocabulary: duplicate word '" + words_[i] + "'");
    }
  }
}

std::optional<WordId> Vocabulary::id_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Digest Vocabulary::digest() const {
  std::string joined;
  for (const auto& w : words_) {
    joined += w;
    joined += '\n';
  }
  return md5(joined);
}

namespace {

std::map<std::string, std::uint64_t> tally(std::span<const std::string> tokens) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

std::vector<std::string> flatten(const std::vector<Document>& docs) {
  std::vector<std::string> tokens;
  for (const auto& d : docs) {
    for (const auto& p : d.paragraphs) tokens.insert(tokens.end(), p.begin(), p.end());
  }
  return tokens;
}

}  // namespace

Vocabulary build_vocab(std::span<const std::string> tokens, std::uint64_t min_count) {
  auto counts = tally(tokens);
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : counts) {
    if (c >= std::max<std::uint64_t>(min_count, 1)) kept.emplace_back(w, c);
  }
  if (kept.empty()) throw DataError("build_vocab: empty vocabulary");
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  std::vector<std::uint64_t> cs;
  for (auto& [w, c] : kept) {
    words.push_back(w);
    cs.push_back(c);
  }
  return Vocabulary(std::move(words), std::move(cs));
}

Vocabulary build_vocab(const std::vector<Document>& docs, std::uint64_t min_count) {
  auto tokens = flatten(docs);
  return build_vocab(tokens, min_count);
}

Vocabulary build_vocab_fixed(std::span<const std::string> tokens, std::vector<std::string> words) {
  if (words.empty()) throw DataError("build_vocab: empty vocabulary");
  auto counts = tally(tokens);
  std::vector<std::uint64_t> cs;
  cs.reserve(words.size());
  for (const auto& w : words) {
    auto it = counts.find(w);
    cs.push_back(it == counts.end() ? 0 : it->second);
  }
  return Vocabulary(std::move(words), std::move(cs));
}

Vocabulary build_vocab_fixed(const std::vector<Document>& docs, std::vector<std::string> words) {
  auto tokens = flatten(docs);
  return build_vocab_fixed(tokens, std::move(words));
}

std::string format_vocab(const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out += vocab.words()[i];
    out += '\t';
    out += std::to_string(vocab.counts()[i]);
    out += '\n';
  }
  return out;
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  write_file_atomic(path, format_vocab(vocab));
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  auto text = read_file(path);
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  std::size_t lineno = 0;
  for_each_line(text, [&](std::string_view line) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) return;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>count");
    }
    std::string count_str(line.substr(tab + 1));
    std::uint64_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoull(count_str, &used);
      if (used != count_str.size()) throw std::invalid_argument(count_str);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad count '" + count_str +
                      "'");
    }
    words.emplace_back(line.substr(0, tab));
    counts.push_back(count);
  });
  if (words.empty()) throw DataError(path.string() + ": empty vocabulary");
  return Vocabulary(std::move(words), std::move(counts));
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  auto text = read_file(path);
  std::vector<std::string> words;
  for_each_line(text, [&](std::string_view line) {
    auto w = trim(line.substr(0, line.find('\t')));
    if (!w.empty()) words.emplace_back(w);
  });
  return words;
}

// ---------------------------------------------------------------------------

std::uint64_t WindowPosition::key() const {
  if (doc >= (1u << kDocBits) || paragraph >= (1u << kParagraphBits) ||
      offset >= (1u << kOffsetBits)) {
    throw DataError("window position out of key range: " + to_string(*this));
  }
  return (static_cast<std::uint64_t>(doc) << (kParagraphBits + kOffsetBits)) |
         (static_cast<std::uint64_t>(paragraph) << kOffsetBits) | offset;
}

WindowPosition WindowPosition::from_key(std::uint64_t key) {
  WindowPosition p;
  p.offset = static_cast<std::uint32_t>(key & ((1u << kOffsetBits) - 1));
  p.paragraph = static_cast<std::uint32_t>((key >> kOffsetBits) & ((1u << kParagraphBits) - 1));
  p.doc = static_cast<std::uint32_t>(key >> (kOffsetBits + kParagraphBits));
  return p;
}

std::string to_string(const WindowPosition& pos) {
  return "doc " + std::to_string(pos.doc) + ", paragraph " + std::to_string(pos.paragraph) +
         ", offset " + std::to_string(pos.offset);
}

namespace {

void neighbors_of(std::span<const WordId> ids, std::size_t index, int delta,
                  std::vector<WordId>& out) {
  out.clear();
  const auto d = static_cast<std::size_t>(delta);
  const std::size_t lo = index >= d ? index - d : 0;
  const std::size_t hi = std::min(ids.size(), index + d + 1);
  for (std::size_t j = lo; j < hi; ++j) {
    if (j != index) out.push_back(ids[j]);
  }
}

}  // namespace

ContextWindow make_window(std::span<const WordId> ids, std::size_t index, int delta,
                          WindowPosition base, bool with_neighborhoods) {
  if (delta < 1) throw DataError("window size must be >= 1");
  ContextWindow w;
  w.center = ids[index];
  w.position = base;
  w.position.offset = static_cast<std::uint32_t>(index);
  neighbors_of(ids, index, delta, w.context);
  if (with_neighborhoods) {
    const auto d = static_cast<std::size_t>(delta);
    const std::size_t lo = index >= d ? index - d : 0;
    const std::size_t hi = std::min(ids.size(), index + d + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (j == index) continue;
      w.neighborhoods.emplace_back();
      neighbors_of(ids, j, delta, w.neighborhoods.back());
    }
  }
  return w;
}

std::vector<ContextWindow> iter_windows(std::span<const WordId> ids, int delta,
                                        WindowPosition base, bool with_neighborhoods) {
  std::vector<ContextWindow> out;
  if (delta < 1) throw DataError("window size must be >= 1");
  if (ids.size() < 2) return out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back(make_window(ids, i, delta, base, with_neighborhoods));
  }
  return out;
}

std::vector<EncodedParagraph> encode_corpus(const std::vector<Document>& docs,
                                            const Vocabulary& vocab) {
  std::vector<EncodedParagraph> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (std::size_t p = 0; p < docs[d].paragraphs.size(); ++p) {
      EncodedParagraph para;
      para.base.doc = static_cast<std::uint32_t>(d);
      para.base.paragraph = static_cast<std::uint32_t>(p);
      for (const auto& tok : docs[d].paragraphs[p]) {
        if (auto id = vocab.id_of(tok)) para.ids.push_back(*id);
      }
      if (para.ids.size() >= 2) out.push_back(std::move(para));
    }
  }
  return out;
}

void for_each_window(const std::vector<EncodedParagraph>& paragraphs, int delta,
                     bool with_neighborhoods,
                     const std::function<void(const ContextWindow&)>& visit) {
  for (const auto& para : paragraphs) {
    if (para.ids.size() < 2) continue;
    for (std::size_t i = 0; i < para.ids.size(); ++i) {
      visit(make_window(para.ids, i, delta, para.base, with_neighborhoods));
    }
  }
}

std::size_t count_windows(const std::vector<EncodedParagraph>& paragraphs, int delta) {
  if (delta < 1) throw DataError("window size must be >= 1");
  std::size_t n = 0;
  for (const auto& p : paragraphs) {
    if (p.ids.size() >= 2) n += p.ids.size();
  }
  return n;
}

// ---------------------------------------------------------------------------

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, double exponent)
    : exponent_(exponent) {
  if (counts.size() < 2) throw DataError("negative sampling needs a vocabulary of at least 2");
  probs_.resize(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    probs_[i] = counts[i] == 0 ? 0.0 : std::pow(static_cast<double>(counts[i]), exponent);
    total += probs_[i];
  }
  if (!(total > 0.0)) throw DataError("negative sampling: all counts are zero");
  cumulative_.resize(counts.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    probs_[i] /= total;
    acc += probs_[i];
    cumulative_[i] = acc;
  }
  // Guard against rounding leaving the last bucket unreachable.
  for (std::size_t i = cumulative_.size(); i-- > 0;) {
    if (probs_[i] > 0.0) {
      for (std::size_t j = i; j < cumulative_.size(); ++j) cumulative_[j] = 1.0;
      break;
    }
  }
}

WordId NegativeSampler::draw(Rng& rng) const {
  const double u = uniform01(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return static_cast<WordId>(it - cumulative_.begin());
}

std::vector<WordId> draw_negatives(const NegativeSampler& sampler, std::size_t n, WordId exclude,
                                   Rng& rng) {
  if (sampler.size() < 2) throw DataError("negative sampling needs a vocabulary of at least 2");
  if (exclude < sampler.size() && sampler.probability(exclude) >= 1.0) {
    throw DataError("negative sampling: no candidate other than the excluded word");
  }
  std::vector<WordId> out;
  out.reserve(n);
  while (out.size() < n) {
    auto id = sampler.draw(rng);
    if (id != exclude) out.push_back(id);
  }
  return out;
}

}  // namespace sensekit
