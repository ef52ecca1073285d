#include "sensekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "sensekit/error.hpp"

namespace sensekit {

namespace {

double comb2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double ari(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) {
    throw DataError("ari: label lists differ in length (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw DataError("ari: need at least 2 points");
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> cells;
  std::map<std::size_t, std::size_t> rows;
  std::map<std::size_t, std::size_t> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cells[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  double index = 0.0;
  for (const auto& [_, n] : cells) index += comb2(static_cast<double>(n));
  double sum_a = 0.0;
  for (const auto& [_, n] : rows) sum_a += comb2(static_cast<double>(n));
  double sum_b = 0.0;
  for (const auto& [_, n] : cols) sum_b += comb2(static_cast<double>(n));
  const double total = comb2(static_cast<double>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  // Only reachable when both labelings are all-one-cluster or all-singletons,
  // i.e. identical up to relabeling.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<std::size_t> relabel(std::span<const std::string> labels) {
  std::unordered_map<std::string, std::size_t> ids;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(ids.try_emplace(l, ids.size()).first->second);
  return out;
}

double ari(std::span<const std::string> a, std::span<const std::string> b) {
  auto la = relabel(a);
  auto lb = relabel(b);
  return ari(la, lb);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DataError("spearman: inputs differ in length");
  if (xs.size() < 2) throw DataError("spearman: need at least 2 points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw DataError("spearman: non-finite input");
    }
  }
  auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("spearman: zero rank variance");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------

ContextQuery make_query(std::span<const std::string> tokens, WordId word,
                        const Vocabulary& vocab) {
  ContextQuery q;
  bool found = false;
  for (const auto& tok : tokens) {
    auto id = vocab.id_of(tok);
    if (!id) continue;
    if (!found && *id == word) {
      q.target = q.ids.size();
      found = true;
    }
    q.ids.push_back(*id);
  }
  if (!found) {
    throw DataError("target word '" + vocab.word(word) + "' does not occur in its context");
  }
  return q;
}

namespace {

ContextWindow query_window(const ContextQuery& query, const SenseContextOptions& options) {
  if (query.target >= query.ids.size()) throw DataError("query target out of range");
  const bool word_centered = options.iter == IterContext::kWordCentered;
  if (!options.full_context) {
    return make_window(query.ids, query.target, options.window, {}, word_centered);
  }
  ContextWindow w;
  w.center = query.ids[query.target];
  for (std::size_t j = 0; j < query.ids.size(); ++j) {
    if (j == query.target) continue;
    w.context.push_back(query.ids[j]);
    if (word_centered) {
      w.neighborhoods.push_back(make_window(query.ids, j, options.window).context);
    }
  }
  return w;
}

}  // namespace

SensePosterior contextual_posterior(const ContextQuery& query, const SenseModelParams& params,
                                    const SenseContextOptions& options) {
  auto window = query_window(query, options);
  if (window.context.empty()) throw DataError("no in-vocabulary context around the target");
  auto c = context_embedding_iterative(window, params, options.iter);
  return sense_posterior(window.center, c, params);
}

std::size_t assign_sense(const WsiInstance& instance, const Vocabulary& vocab,
                         const SenseModelParams& params, const SenseContextOptions& options) {
  auto query = make_query(instance.context, instance.target, vocab);
  return contextual_posterior(query, params, options).argmax();
}

WsiResult eval_wsi(std::span<const WsiInstance> instances, const Vocabulary& vocab,
                   const SenseModelParams& params, const SenseContextOptions& options) {
  std::vector<WordId> order;
  std::unordered_map<WordId, std::pair<std::vector<std::size_t>, std::vector<std::string>>> groups;
  WsiResult result;
  for (const auto& inst : instances) {
    std::size_t sense = 0;
    try {
      auto query = make_query(inst.context, inst.target, vocab);
      sense = contextual_posterior(query, params, options).argmax();
    } catch (const DataError&) {
      ++result.skipped_instances;
      continue;
    }
    auto [it, inserted] = groups.try_emplace(inst.target);
    if (inserted) order.push_back(inst.target);
    it->second.first.push_back(sense);
    it->second.second.push_back(inst.gold);
  }
  double total = 0.0;
  for (WordId w : order) {
    const auto& [model, gold] = groups.at(w);
    if (model.size() < 2) {
      ++result.skipped_words;
      continue;
    }
    auto gold_ids = relabel(gold);
    WordScore score{w, ari(model, gold_ids), model.size()};
    total += score.ari;
    result.per_word.push_back(score);
  }
  if (result.per_word.empty()) throw DataError("eval_wsi: no word has 2 or more usable instances");
  result.mean = total / static_cast<double>(result.per_word.size());
  return result;
}

// ---------------------------------------------------------------------------

double avg_simc(const ScwsPair& pair, const SenseModelParams& params,
                const SenseContextOptions& options) {
  auto p1 = contextual_posterior(pair.context1, params, options);
  auto p2 = contextual_posterior(pair.context2, params, options);
  const std::size_t K = params.senses();
  double sum = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      sum += p1.probs[i] * p2.probs[j] *
             cosine(params.sense(pair.word1, i), params.sense(pair.word2, j));
    }
  }
  return sum / static_cast<double>(K * K);
}

double max_simc(const ScwsPair& pair, const SenseModelParams& params,
                const SenseContextOptions& options) {
  auto i = contextual_posterior(pair.context1, params, options).argmax();
  auto j = contextual_posterior(pair.context2, params, options).argmax();
  return cosine(params.sense(pair.word1, i), params.sense(pair.word2, j));
}

ScwsResult eval_scws(const ScwsDataset& data, const SenseModelParams& params, SimMetric metric,
                     const SenseContextOptions& options) {
  ScwsResult result;
  result.skipped = data.skipped_oov;
  std::vector<double> model, human;
  for (const auto& pair : data.pairs) {
    double sim = 0.0;
    try {
      sim = metric == SimMetric::kAvgSimC ? avg_simc(pair, params, options)
                                          : max_simc(pair, params, options);
    } catch (const DataError&) {
      ++result.skipped;
      continue;
    }
    model.push_back(sim);
    human.push_back(pair.score);
  }
  result.scored = model.size();
  result.rho = spearman(model, human);
  return result;
}

// ---------------------------------------------------------------------------

NeighborResult nearest_neighbors(WordId word, std::span<const std::string> context,
                                 const Vocabulary& vocab, const SenseModelParams& params,
                                 std::size_t top_n, const SenseContextOptions& options) {
  if (word >= params.vocab_size()) throw DataError("nearest_neighbors: word outside vocabulary");
  ContextQuery query;
  SenseContextOptions opts = options;
  const bool present = std::any_of(context.begin(), context.end(), [&](const std::string& t) {
    auto id = vocab.id_of(t);
    return id && *id == word;
  });
  if (present) {
    query = make_query(context, word, vocab);
  } else {
    for (const auto& tok : context) {
      if (auto id = vocab.id_of(tok)) query.ids.push_back(*id);
    }
    query.target = query.ids.size();
    query.ids.push_back(word);
    opts.full_context = true;
  }
  auto post = contextual_posterior(query, params, opts);
  NeighborResult result;
  result.sense = post.argmax();
  result.probability = post.probs[result.sense];
  auto v = params.sense(word, result.sense);
  std::vector<Neighbor> all(params.vocab_size());
  for (std::size_t x = 0; x < all.size(); ++x) {
    all[x] = {static_cast<WordId>(x), cosine(v, params.global(static_cast<WordId>(x)))};
  }
  const std::size_t n = std::min(top_n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      if (a.cosine != b.cosine) return a.cosine > b.cosine;
                      return a.word < b.word;
                    });
  all.resize(n);
  result.neighbors = std::move(all);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

template <typename Fn>
void for_each_data_line(const std::string& text, Fn&& fn) {
  std::size_t start = 0;
  std::size_t lineno = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    auto end = nl == std::string::npos ? text.size() : nl;
    std::string_view line(text.data() + start, end - start);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line, lineno);
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
}

/// Normalizes a dataset word with the corpus tokenizer.
std::optional<WordId> lookup_word(std::string_view raw, const Vocabulary& vocab) {
  auto toks = tokenize(raw);
  if (toks.size() != 1) return std::nullopt;
  return vocab.id_of(toks.front());
}

/// Context with the target wrapped in <b>...</b>; the target is `word`.
ContextQuery marked_query(std::string_view text, WordId word, const Vocabulary& vocab) {
  auto open = text.find("<b>");
  auto close = open == std::string_view::npos ? open : text.find("</b>", open + 3);
  if (close == std::string_view::npos) throw DataError("context lacks a <b>...</b> target marker");
  ContextQuery q;
  for (const auto& tok : tokenize(text.substr(0, open))) {
    if (auto id = vocab.id_of(tok)) q.ids.push_back(*id);
  }
  q.target = q.ids.size();
  q.ids.push_back(word);
  for (const auto& tok : tokenize(text.substr(close + 4))) {
    if (auto id = vocab.id_of(tok)) q.ids.push_back(*id);
  }
  return q;
}

}  // namespace

WsiDataset load_wsi(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto text = read_file(path);
  WsiDataset data;
  for_each_data_line(text, [&](std::string_view line, std::size_t lineno) {
    auto fields = split_tabs(line);
    if (fields.size() < 3) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected target<TAB>gold<TAB>context");
    }
    auto target = lookup_word(fields[0], vocab);
    if (!target) {
      ++data.skipped_oov;
      return;
    }
    WsiInstance inst;
    inst.target = *target;
    inst.gold = std::string(fields[1]);
    for (std::size_t f = 2; f < fields.size(); ++f) {
      auto toks = tokenize(fields[f]);
      inst.context.insert(inst.context.end(), toks.begin(), toks.end());
    }
    if (inst.context.empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty context");
    }
    data.instances.push_back(std::move(inst));
  });
  return data;
}

std::optional<ScwsPair> parse_scws_line(std::string_view line, const Vocabulary& vocab) {
  auto fields = split_tabs(line);
  if (fields.size() != 5) {
    throw DataError("expected word1<TAB>word2<TAB>score<TAB>context1<TAB>context2");
  }
  ScwsPair pair;
  try {
    std::size_t used = 0;
    std::string s(fields[2]);
    pair.score = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(pair.score)) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw DataError("bad score '" + std::string(fields[2]) + "'");
  }
  auto w1 = lookup_word(fields[0], vocab);
  auto w2 = lookup_word(fields[1], vocab);
  if (!w1 || !w2) return std::nullopt;
  pair.word1 = *w1;
  pair.word2 = *w2;
  pair.context1 = marked_query(fields[3], *w1, vocab);
  pair.context2 = marked_query(fields[4], *w2, vocab);
  return pair;
}

ScwsDataset load_scws(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto text = read_file(path);
  ScwsDataset data;
  for_each_data_line(text, [&](std::string_view line, std::size_t lineno) {
    try {
      auto pair = parse_scws_line(line, vocab);
      if (pair) {
        data.pairs.push_back(std::move(*pair));
      } else {
        ++data.skipped_oov;
      }
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return data;
}

}  // namespace sensekit
