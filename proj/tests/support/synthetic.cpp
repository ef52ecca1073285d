#include "support/synthetic.hpp"

#include <cmath>
#include <map>
#include <string>

namespace sensekit::testing {

namespace {

std::size_t pick(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

double gaussian(Rng& rng) {
  // Box-Muller; 1 - u keeps the log argument positive.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct Occurrence {
  std::size_t pseudo;
  std::size_t sense;
  std::vector<std::string> tokens;
};

Occurrence make_occurrence(const PolysemyConfig& cfg, std::size_t pseudo, std::size_t sense,
                           Rng& rng) {
  Occurrence occ{pseudo, sense, {}};
  const auto slots = static_cast<std::size_t>(2 * cfg.window);
  for (std::size_t s = 0; s < slots; ++s) {
    if (s == static_cast<std::size_t>(cfg.window)) {
      occ.tokens.push_back("pw" + std::to_string(pseudo));
    }
    if (cfg.shared_noise > 0.0 && uniform01(rng) < cfg.shared_noise) {
      occ.tokens.push_back("shared" + std::to_string(pick(rng, cfg.shared_words)));
    } else {
      occ.tokens.push_back("c" + std::to_string(pseudo) + "s" + std::to_string(sense) + "w" +
                           std::to_string(pick(rng, cfg.context_words_per_sense)));
    }
  }
  return occ;
}

}  // namespace

SyntheticCorpus make_polysemy_corpus(const PolysemyConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<Occurrence> train;
  for (std::size_t p = 0; p < cfg.pseudowords; ++p) {
    for (std::size_t s = 0; s < cfg.senses; ++s) {
      for (std::size_t o = 0; o < cfg.occurrences_per_sense; ++o) {
        train.push_back(make_occurrence(cfg, p, s, rng));
      }
    }
  }
  for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[pick(rng, i)]);

  Document doc;
  std::vector<std::string> all_tokens;
  for (const auto& occ : train) {
    doc.paragraphs.push_back(occ.tokens);
    all_tokens.insert(all_tokens.end(), occ.tokens.begin(), occ.tokens.end());
  }
  SyntheticCorpus out;
  out.vocab = build_vocab(all_tokens, 1);
  out.train = encode_corpus({doc}, out.vocab);
  for (const auto& occ : train) out.train_sense.push_back(occ.sense);
  for (std::size_t p = 0; p < cfg.pseudowords; ++p) {
    out.pseudowords.push_back(*out.vocab.id_of("pw" + std::to_string(p)));
  }

  for (std::size_t p = 0; p < cfg.pseudowords; ++p) {
    for (std::size_t s = 0; s < cfg.senses; ++s) {
      for (std::size_t o = 0; o < cfg.heldout_per_sense; ++o) {
        auto occ = make_occurrence(cfg, p, s, rng);
        HeldOutOccurrence h;
        h.pseudoword = p;
        h.word = out.pseudowords[p];
        h.sense = s;
        h.query = make_query(occ.tokens, h.word, out.vocab);
        out.heldout.push_back(std::move(h));
      }
    }
  }
  return out;
}

PosteriorStore oracle_posteriors(const SyntheticCorpus& corpus, std::size_t senses) {
  PosteriorStore store(senses);
  std::vector<double> onehot(senses);
  std::map<WordId, bool> is_pseudo;
  for (WordId w : corpus.pseudowords) is_pseudo[w] = true;
  for (std::size_t p = 0; p < corpus.train.size(); ++p) {
    const auto& para = corpus.train[p];
    for (std::size_t i = 0; i < para.ids.size(); ++i) {
      std::fill(onehot.begin(), onehot.end(), 0.0);
      onehot[is_pseudo.count(para.ids[i]) ? corpus.train_sense[p] : 0] = 1.0;
      WindowPosition pos = para.base;
      pos.offset = static_cast<std::uint32_t>(i);
      store.insert(pos.key(), onehot);
    }
  }
  return store;
}

double heldout_ari(const SyntheticCorpus& corpus, const SenseModelParams& params,
                   const SenseContextOptions& options) {
  std::vector<std::vector<std::size_t>> model(corpus.pseudowords.size());
  std::vector<std::vector<std::size_t>> truth(corpus.pseudowords.size());
  for (const auto& h : corpus.heldout) {
    model[h.pseudoword].push_back(contextual_posterior(h.query, params, options).argmax());
    truth[h.pseudoword].push_back(h.sense);
  }
  double total = 0.0;
  for (std::size_t p = 0; p < model.size(); ++p) total += ari(model[p], truth[p]);
  return total / static_cast<double>(model.size());
}

double heldout_agreement(const SyntheticCorpus& corpus, const SenseModelParams& params,
                         const SenseContextOptions& options) {
  std::size_t hits = 0;
  for (const auto& h : corpus.heldout) {
    hits += contextual_posterior(h.query, params, options).argmax() == h.sense ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(corpus.heldout.size());
}

ClusterRecords make_cluster_records(std::size_t words, std::size_t clusters, std::size_t dim,
                                    std::size_t records_per_cluster, std::size_t neighbors,
                                    double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> names;
  for (std::size_t w = 0; w < words; ++w) names.push_back("w" + std::to_string(w));
  Vocabulary vocab(names, std::vector<std::uint64_t>(words, 1));

  ClusterRecords out;
  out.store.header.dim = static_cast<std::uint32_t>(dim);
  out.store.header.window = 5;
  out.store.header.vocab_digest = vocab.digest();
  out.center_mean.assign(words, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> per_word(words, 0);

  auto sample = [&](const std::vector<double>& mu) {
    std::vector<float> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<float>(mu[i] + noise * gaussian(rng));
    return v;
  };

  std::uint64_t key = 0;
  for (std::size_t w = 0; w < words; ++w) {
    std::vector<std::vector<double>> centers(clusters, std::vector<double>(dim));
    for (auto& c : centers) {
      for (auto& x : c) x = gaussian(rng);
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      for (std::size_t r = 0; r < records_per_cluster; ++r) {
        TeacherRecord rec;
        rec.key = key++;
        rec.center = static_cast<WordId>(w);
        TeacherVector center{0, rec.center, sample(centers[c])};
        for (std::size_t i = 0; i < dim; ++i) out.center_mean[w][i] += center.values[i];
        ++per_word[w];
        rec.vectors.push_back(std::move(center));
        for (std::size_t n = 0; n < neighbors; ++n) {
          const auto offset = static_cast<std::int8_t>(n % 2 == 0 ? -(1 + n / 2) : 1 + n / 2);
          rec.vectors.push_back({offset, static_cast<WordId>(pick(rng, words)), sample(centers[c])});
        }
        out.store.records.push_back(std::move(rec));
        out.cluster.push_back(c);
      }
    }
  }
  for (std::size_t w = 0; w < words; ++w) {
    for (auto& x : out.center_mean[w]) x /= static_cast<double>(per_word[w]);
  }
  out.store.header.count = out.store.records.size();
  return out;
}

}  // namespace sensekit::testing
