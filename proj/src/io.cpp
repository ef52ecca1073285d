#include "sensekit/io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "sensekit/error.hpp"

namespace sensekit {

namespace {

constexpr std::string_view kModelMagic = "SNS1";
using Kind = FormatError::Kind;

}  // namespace

std::string encode_model(const SenseModelParams& params, const Vocabulary& vocab,
                         unsigned float_width) {
  if (float_width != 4 && float_width != 8) throw DataError("float width must be 4 or 8");
  if (params.vocab_size() != vocab.size()) {
    throw DataError("model has " + std::to_string(params.vocab_size()) +
                    " rows but vocabulary has " + std::to_string(vocab.size()) + " words");
  }
  ByteWriter w;
  const std::size_t values =
      params.global_data().size() + params.sense_data().size() + params.disamb_data().size();
  w.reserve(ModelFileHeader::kBytes + values * float_width);
  w.put_bytes(kModelMagic);
  w.put<std::uint32_t>(ModelFileHeader::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.vocab_size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.senses()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.dim()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(float_width));
  w.put_bytes(vocab.digest());
  for (const auto* table : {&params.global_data(), &params.sense_data(), &params.disamb_data()}) {
    for (double x : *table) {
      if (float_width == 4) {
        w.put<float>(static_cast<float>(x));
      } else {
        w.put<double>(x);
      }
    }
  }
  return w.bytes();
}

SenseModelParams decode_model(std::string_view bytes, const Vocabulary& vocab,
                              const std::string& source, ModelFileHeader* header_out) {
  ByteReader r(bytes, source);
  if (r.remaining() < ModelFileHeader::kBytes) {
    throw FormatError(Kind::kTruncated, source + ": truncated header (" +
                                            std::to_string(bytes.size()) + " bytes)");
  }
  if (r.get_bytes(4) != kModelMagic) throw FormatError(Kind::kBadMagic, source + ": bad magic");
  ModelFileHeader h;
  h.version = r.get<std::uint32_t>();
  if (h.version != ModelFileHeader::kVersion) {
    throw FormatError(Kind::kBadVersion,
                      source + ": unsupported version " + std::to_string(h.version));
  }
  h.vocab_size = r.get<std::uint32_t>();
  h.senses = r.get<std::uint32_t>();
  h.dim = r.get<std::uint32_t>();
  h.float_width = r.get<std::uint8_t>();
  h.vocab_digest = r.get_array<16>();
  if (h.float_width != 4 && h.float_width != 8) {
    throw FormatError(Kind::kShape, source + ": bad float width " + std::to_string(h.float_width));
  }
  if (h.vocab_size == 0 || h.senses == 0 || h.dim == 0) {
    throw FormatError(Kind::kShape, source + ": zero dimension in header");
  }
  // Expected payload in 128-bit-safe arithmetic: all factors < 2^32.
  const unsigned __int128 expected = static_cast<unsigned __int128>(h.vocab_size) * h.dim *
                                     (1 + 2 * static_cast<unsigned __int128>(h.senses)) *
                                     h.float_width;
  if (expected != r.remaining()) {
    throw FormatError(expected > r.remaining() ? Kind::kTruncated : Kind::kShape,
                      source + ": payload is " + std::to_string(r.remaining()) +
                          " bytes, header implies " +
                          std::to_string(static_cast<std::uint64_t>(expected)));
  }
  if (h.vocab_digest != vocab.digest()) {
    throw FormatError(Kind::kDigestMismatch,
                      source + ": vocabulary digest mismatch (file " + to_hex(h.vocab_digest) +
                          ", vocabulary " + to_hex(vocab.digest()) + ")");
  }
  if (h.vocab_size != vocab.size()) {
    throw FormatError(Kind::kShape, source + ": V does not match vocabulary");
  }
  SenseModelParams params(h.vocab_size, h.senses, h.dim);
  for (auto* table : {&params.global_data(), &params.sense_data(), &params.disamb_data()}) {
    for (auto& x : *table) {
      x = h.float_width == 4 ? static_cast<double>(r.get<float>()) : r.get<double>();
    }
  }
  if (header_out != nullptr) *header_out = h;
  return params;
}

void save_model(const SenseModelParams& params, const Vocabulary& vocab,
                const std::filesystem::path& path, unsigned float_width) {
  write_file_atomic(path, encode_model(params, vocab, float_width));
}

SenseModelParams load_model(const std::filesystem::path& path, const Vocabulary& vocab,
                            ModelFileHeader* header) {
  auto bytes = read_file(path);
  return decode_model(bytes, vocab, path.string(), header);
}

std::string format_text(const SenseModelParams& params, const Vocabulary& vocab) {
  if (params.vocab_size() != vocab.size()) throw DataError("model and vocabulary differ in size");
  std::string out;
  char buf[32];
  auto put_row = [&](const std::string& label, std::span<const double> row) {
    out += label;
    for (double x : row) {
      std::snprintf(buf, sizeof(buf), " %.9g", x);
      out += buf;
    }
    out += '\n';
  };
  out += std::to_string(params.vocab_size() * (params.senses() + 1)) + " " +
         std::to_string(params.dim()) + "\n";
  for (std::size_t w = 0; w < params.vocab_size(); ++w) {
    const auto id = static_cast<WordId>(w);
    put_row(vocab.word(id), params.global(id));
    for (std::size_t k = 0; k < params.senses(); ++k) {
      put_row(vocab.word(id) + "#" + std::to_string(k), params.sense(id, k));
    }
  }
  return out;
}

void export_text(const SenseModelParams& params, const Vocabulary& vocab,
                 const std::filesystem::path& path) {
  write_file_atomic(path, format_text(params, vocab));
}

std::map<std::string, std::vector<double>> parse_text_embeddings(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t rows = 0, dim = 0;
  if (!(in >> rows >> dim)) throw DataError("text embeddings: bad header line");
  std::map<std::string, std::vector<double>> out;
  for (std::size_t r = 0; r < rows; ++r) {
    std::string label;
    if (!(in >> label)) throw DataError("text embeddings: missing row " + std::to_string(r));
    std::vector<double> v(dim);
    for (auto& x : v) {
      if (!(in >> x)) throw DataError("text embeddings: short row '" + label + "'");
    }
    out.emplace(std::move(label), std::move(v));
  }
  return out;
}

}  // namespace sensekit
