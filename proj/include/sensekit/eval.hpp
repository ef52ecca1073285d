#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sensekit/corpus.hpp"
#include "sensekit/model.hpp"

namespace sensekit {

// ---------------------------------------------------------------------------
// Clustering and rank metrics

/// Adjusted Rand index from the contingency table. Returns 1 when both
/// labelings are trivial and identical (the index is undefined there).
double ari(std::span<const std::size_t> a, std::span<const std::size_t> b);
double ari(std::span<const std::string> a, std::span<const std::string> b);

/// Maps arbitrary labels to 0..n-1 in first-seen order.
std::vector<std::size_t> relabel(std::span<const std::string> labels);

/// 1-based ranks, ties get the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of average ranks. Throws DataError on length mismatch,
/// fewer than 2 points, non-finite input or zero rank variance.
double spearman(std::span<const double> xs, std::span<const double> ys);

// ---------------------------------------------------------------------------
// Sense assignment

/// A word occurrence in running text, reduced to in-vocabulary ids.
struct ContextQuery {
  std::vector<WordId> ids;
  std::size_t target = 0;  // index into ids
};

/// Maps tokens to ids (dropping OOV) and locates the first occurrence of
/// `word`. Throws DataError when the word is not among the tokens.
ContextQuery make_query(std::span<const std::string> tokens, WordId word,
                        const Vocabulary& vocab);

struct SenseContextOptions {
  int window = 5;
  bool full_context = false;  ///< use the whole query instead of +-window
  IterContext iter = IterContext::kSharedWindow;
};

/// Posterior of the target word from the iterative context embedding.
/// Throws DataError when no in-vocabulary word surrounds the target.
SensePosterior contextual_posterior(const ContextQuery& query, const SenseModelParams& params,
                                    const SenseContextOptions& options = {});

struct WsiInstance {
  WordId target = 0;
  std::vector<std::string> context;
  std::string gold;
};

/// Most probable sense of the target in its context; ties go to the lowest
/// index.
std::size_t assign_sense(const WsiInstance& instance, const Vocabulary& vocab,
                         const SenseModelParams& params,
                         const SenseContextOptions& options = {});

struct WordScore {
  WordId word = 0;
  double ari = 0.0;
  std::size_t instances = 0;
};

struct WsiResult {
  std::vector<WordScore> per_word;
  double mean = 0.0;            // unweighted over scored words
  std::size_t skipped_words = 0;      // fewer than 2 usable instances
  std::size_t skipped_instances = 0;  // no in-vocabulary context
};

/// Groups by target word and scores model senses against gold labels.
WsiResult eval_wsi(std::span<const WsiInstance> instances, const Vocabulary& vocab,
                   const SenseModelParams& params, const SenseContextOptions& options = {});

// ---------------------------------------------------------------------------
// Contextual similarity

struct ScwsPair {
  WordId word1 = 0;
  ContextQuery context1;
  WordId word2 = 0;
  ContextQuery context2;
  double score = 0.0;
};

/// (1/K^2) sum_ij p(i|C1) p(j|C2) cos(v1^i, v2^j).
double avg_simc(const ScwsPair& pair, const SenseModelParams& params,
                const SenseContextOptions& options = {});

/// cos(v1^i*, v2^j*) for the per-context argmax senses.
double max_simc(const ScwsPair& pair, const SenseModelParams& params,
                const SenseContextOptions& options = {});

// ---------------------------------------------------------------------------
// Nearest neighbours

struct Neighbor {
  WordId word = 0;
  double cosine = 0.0;
};

struct NeighborResult {
  std::size_t sense = 0;
  double probability = 0.0;
  std::vector<Neighbor> neighbors;
};

/// Picks the most probable sense of `word` in `context` and ranks every
/// vocabulary word by cos(v_word^k, g_other). The query word is not excluded.
/// When `word` does not occur in `context`, all context tokens form its context.
NeighborResult nearest_neighbors(WordId word, std::span<const std::string> context,
                                 const Vocabulary& vocab, const SenseModelParams& params,
                                 std::size_t top_n, const SenseContextOptions& options = {});

// ---------------------------------------------------------------------------
// Dataset files

struct WsiDataset {
  std::vector<WsiInstance> instances;
  std::size_t skipped_oov = 0;
};

/// `target<TAB>gold_label<TAB>context...` per line.
WsiDataset load_wsi(const std::filesystem::path& path, const Vocabulary& vocab);

struct ScwsDataset {
  std::vector<ScwsPair> pairs;
  std::size_t skipped_oov = 0;
};

/// `word1<TAB>word2<TAB>score<TAB>context1<TAB>context2`, each context with
/// the target wrapped in <b>...</b>.
ScwsDataset load_scws(const std::filesystem::path& path, const Vocabulary& vocab);

/// Parses one SCWS line; std::nullopt when a target is out of vocabulary.
std::optional<ScwsPair> parse_scws_line(std::string_view line, const Vocabulary& vocab);

struct ScwsResult {
  double rho = 0.0;
  std::size_t scored = 0;
  std::size_t skipped = 0;  // OOV plus pairs without in-vocabulary context
};

enum class SimMetric { kAvgSimC, kMaxSimC };

ScwsResult eval_scws(const ScwsDataset& data, const SenseModelParams& params, SimMetric metric,
                     const SenseContextOptions& options = {});

}  // namespace sensekit
