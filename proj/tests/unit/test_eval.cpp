#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sensekit/error.hpp"
#include "sensekit/eval.hpp"
#include "support/oracles.hpp"

using namespace sensekit;

namespace {

using Labels = std::vector<std::size_t>;

Labels random_labels(Rng& rng, std::size_t n, std::size_t k) {
  Labels out(n);
  for (auto& x : out) x = rng() % k;
  return out;
}

Vocabulary vocab_of(std::initializer_list<const char*> ws) {
  std::vector<std::string> words(ws.begin(), ws.end());
  return Vocabulary(words, std::vector<std::uint64_t>(words.size(), 1));
}

std::vector<std::string> toks(std::initializer_list<const char*> ws) { return {ws.begin(), ws.end()}; }

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "sensekit_eval";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Word 0 has two senses keyed by the global vectors of words 1 and 2.
SenseModelParams rigged_model() {
  SenseModelParams p(4, 2, 2);
  p.global(1)[0] = 1.0;
  p.global(2)[1] = 1.0;
  p.global(3)[0] = 0.5;
  p.global(3)[1] = 0.5;
  p.disamb(0, 0)[0] = 20.0;
  p.disamb(0, 1)[1] = 20.0;
  p.sense(0, 0)[0] = 1.0;
  p.sense(0, 1)[1] = 1.0;
  // Context words carry their global vector in both senses.
  for (WordId w = 1; w < 4; ++w) {
    for (std::size_t k = 0; k < 2; ++k) std::copy_n(p.global(w).begin(), 2, p.sense(w, k).begin());
  }
  return p;
}

}  // namespace

TEST_CASE("ari examples") {
  Labels a = {0, 0, 1, 1}, b = {0, 1, 0, 1};
  CHECK(ari(a, b) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(ari(a, a) == 1.0);
  Labels relabeled = {7, 7, 3, 3};
  CHECK(ari(a, relabeled) == 1.0);
  Labels constant = {0, 0, 0, 0};
  Labels gold = {0, 1, 1, 2};
  CHECK(ari(constant, gold) == 0.0);
  CHECK(ari(constant, constant) == 1.0);
  Labels singletons = {0, 1, 2, 3};
  CHECK(ari(singletons, Labels{3, 2, 1, 0}) == 1.0);
  CHECK_THROWS_AS(ari(a, Labels{0, 1}), DataError);
  CHECK_THROWS_AS(ari(Labels{0}, Labels{0}), DataError);
}

TEST_CASE("ari matches pair counting") {
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + rng() % 11;
    auto a = random_labels(rng, n, 1 + rng() % 4);
    auto b = random_labels(rng, n, 1 + rng() % 4);
    const double ref = testing::ari_pairs(a, b);
    CHECK(std::abs(ari(a, b) - ref) < 1e-12);
    CHECK(std::abs(ari(b, a) - ref) < 1e-12);
    Labels permuted = a;
    for (auto& x : permuted) x = (x * 5 + 3) % 17;
    CHECK(std::abs(ari(permuted, b) - ref) < 1e-12);
  }
}

TEST_CASE("string labels") {
  std::vector<std::string> a = {"x", "x", "y", "y"}, b = {"p", "q", "p", "q"};
  CHECK(ari(a, b) == doctest::Approx(-0.5));
  CHECK(relabel(b) == Labels{0, 1, 0, 1});
}

TEST_CASE("spearman examples") {
  std::vector<double> x = {1, 2, 3, 4, 5}, up = {2, 4, 8, 16, 32}, down = {5, 4, 3, 2, 1};
  CHECK(spearman(x, up) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, down) == doctest::Approx(-1.0).epsilon(1e-15));
  std::vector<double> xs = {1, 2, 2, 4}, ys = {1, 3, 2, 4};
  CHECK(std::abs(spearman(xs, ys) - testing::spearman_oracle(xs, ys)) < 1e-12);
  CHECK(average_ranks(xs) == std::vector<double>{1, 2.5, 2.5, 4});
  std::vector<double> flat = {3, 3, 3, 3};
  CHECK_THROWS_AS(spearman(flat, ys), DataError);
  std::vector<double> nan = {1, std::nan(""), 2, 3};
  CHECK_THROWS_AS(spearman(nan, ys), DataError);
  CHECK_THROWS_AS(spearman(x, ys), DataError);
}

TEST_CASE("spearman matches rank-then-pearson and is monotone invariant") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 3 + rng() % 20;
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng() % 6);
    for (auto& v : y) v = static_cast<double>(rng() % 6);
    x[0] = 0;
    x[1] = 5;
    y[0] = 1;
    y[1] = 4;
    const double ref = testing::spearman_oracle(x, y);
    CHECK(std::abs(spearman(x, y) - ref) < 1e-12);
    std::vector<double> tx(n);
    for (std::size_t j = 0; j < n; ++j) tx[j] = std::exp(x[j]) - 3.0;
    CHECK(std::abs(spearman(tx, y) - ref) < 1e-12);
  }
}

TEST_CASE("make_query locates the first occurrence") {
  auto v = vocab_of({"a", "b", "c"});
  auto q = make_query(toks({"zz", "b", "a", "zz", "a"}), 0, v);
  CHECK(q.ids == std::vector<WordId>{1, 0, 0});
  CHECK(q.target == 1);
  CHECK_THROWS_AS(make_query(toks({"b", "c"}), 0, v), DataError);
}

TEST_CASE("sense assignment") {
  auto p = rigged_model();
  auto v = vocab_of({"amb", "left", "right", "mid"});
  CHECK(assign_sense({0, toks({"left", "amb", "left"}), "g"}, v, p) == 0);
  CHECK(assign_sense({0, toks({"right", "amb"}), "g"}, v, p) == 1);

  SenseModelParams k1 = init_params(4, 1, 3, 5);
  CHECK(assign_sense({0, toks({"right", "amb", "mid"}), "g"}, v, k1) == 0);

  SenseModelParams huge = p;
  huge.disamb(0, 0)[0] = 1e6;
  huge.disamb(0, 0)[1] = 1e6;
  CHECK(assign_sense({0, toks({"right", "amb"}), "g"}, v, huge) == 0);

  CHECK_THROWS_AS(assign_sense({0, toks({"left", "right"}), "g"}, v, p), DataError);
}

TEST_CASE("assignment is invariant to rescaling the context") {
  auto p = init_params(10, 3, 5, 6);
  for (auto& x : p.disamb_data()) x *= 100;
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    Vec c(5);
    for (auto& x : c) x = 2 * uniform01(rng) - 1;
    Vec scaled = c;
    const double s = 0.1 + 10 * uniform01(rng);
    for (auto& x : scaled) x *= s;
    const auto w = static_cast<WordId>(rng() % 10);
    CHECK(sense_posterior(w, c, p).argmax() == sense_posterior(w, scaled, p).argmax());
  }
}

TEST_CASE("eval_wsi groups by word and skips thin words") {
  auto p = rigged_model();
  auto v = vocab_of({"amb", "left", "right", "mid"});
  std::vector<WsiInstance> inst = {
      {0, toks({"left", "amb"}), "s1"},  {0, toks({"amb", "right"}), "s2"},
      {0, toks({"left", "amb"}), "s1"},  {0, toks({"right", "amb"}), "s2"},
      {3, toks({"mid", "left"}), "only"}, {1, toks({"zzz", "left"}), "x"},
  };
  auto r = eval_wsi(inst, v, p);
  REQUIRE(r.per_word.size() == 1);
  CHECK(r.per_word[0].word == 0);
  CHECK(r.mean == 1.0);
  CHECK(r.skipped_words == 1);
  CHECK(r.skipped_instances == 1);
  std::vector<WsiInstance> none = {{3, toks({"mid", "left"}), "only"}};
  CHECK_THROWS_AS(eval_wsi(none, v, p), DataError);
}

TEST_CASE("avg_simc and max_simc") {
  auto v = vocab_of({"amb", "left", "right", "mid"});
  SenseModelParams k1 = init_params(4, 1, 3, 5);
  ScwsPair pair{0, make_query(toks({"left", "amb"}), 0, v), 3, make_query(toks({"mid", "right"}), 3, v), 5.0};
  const double cos = cosine(k1.sense(0, 0), k1.sense(3, 0));
  CHECK(avg_simc(pair, k1) == cos);
  CHECK(max_simc(pair, k1) == cos);

  // Identical sense vectors: every cosine is 1 and the weights sum to 1/K^2.
  SenseModelParams same = init_params(4, 2, 3, 5);
  for (WordId w = 0; w < 4; ++w) {
    for (std::size_t k = 0; k < 2; ++k) {
      same.sense(w, k)[0] = 1.0;
      same.sense(w, k)[1] = 2.0;
      same.sense(w, k)[2] = -1.0;
    }
  }
  CHECK(avg_simc(pair, same) == doctest::Approx(0.25).epsilon(1e-14));

  // Hand-built K=2 pair against the four-term sum.
  auto p = rigged_model();
  p.sense(3, 0)[0] = 0.3;
  p.sense(3, 0)[1] = -1.0;
  p.disamb(3, 0)[0] = 0.4;
  p.disamb(3, 1)[1] = -0.2;
  ScwsPair hp{0, make_query(toks({"mid", "amb", "left"}), 0, v), 3, make_query(toks({"right", "mid", "amb"}), 3, v), 1.0};
  auto p1 = contextual_posterior(hp.context1, p).probs;
  auto p2 = contextual_posterior(hp.context2, p).probs;
  double sum = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) sum += p1[i] * p2[j] * cosine(p.sense(0, i), p.sense(3, j));
  }
  CHECK(avg_simc(hp, p) == doctest::Approx(sum / 4).epsilon(1e-14));
  ScwsPair swapped{hp.word2, hp.context2, hp.word1, hp.context1, hp.score};
  CHECK(avg_simc(swapped, p) == doctest::Approx(avg_simc(hp, p)).epsilon(1e-14));
  CHECK(max_simc(swapped, p) == max_simc(hp, p));
  CHECK(std::abs(avg_simc(hp, p)) <= 1.0);

  // One-hot posteriors: the weighted sum keeps a single term.
  p.sense(0, 1)[0] = 0.6;
  p.sense(0, 1)[1] = 0.8;
  ScwsPair sharp{0, make_query(toks({"left", "amb"}), 0, v), 0, make_query(toks({"amb", "right"}), 0, v), 1.0};
  CHECK(avg_simc(sharp, p) == doctest::Approx(max_simc(sharp, p) / 4).epsilon(1e-6));
}

TEST_CASE("nearest neighbours") {
  auto p = rigged_model();
  auto v = vocab_of({"amb", "left", "right", "mid"});
  auto r = nearest_neighbors(0, toks({"left", "amb"}), v, p, 2);
  CHECK(r.sense == 0);
  CHECK(r.probability > 0.99);
  REQUIRE(r.neighbors.size() == 2);
  CHECK(r.neighbors[0].word == 1);
  CHECK(r.neighbors[0].cosine == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.neighbors[1].word == 3);

  auto all = nearest_neighbors(0, toks({"right"}), v, p, 10);
  CHECK(all.sense == 1);
  REQUIRE(all.neighbors.size() == 4);
  std::vector<bool> seen(4, false);
  for (const auto& n : all.neighbors) seen[n.word] = true;
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  CHECK(all.neighbors[0].word == 2);

  SenseModelParams self = p;
  self.global(0)[0] = 3.0;
  self.global(0)[1] = 0.0;
  auto sr = nearest_neighbors(0, toks({"left", "amb"}), v, self, 4);
  CHECK((sr.neighbors[0].word == 0 || sr.neighbors[1].word == 0));
  CHECK_THROWS_AS(nearest_neighbors(9, toks({"left"}), v, p, 3), DataError);
}

TEST_CASE("wsi dataset file") {
  auto v = vocab_of({"amb", "left", "right", "mid"});
  std::ofstream(scratch("wsi.tsv")) << "amb\ts1\tLeft amb ,mid\nAMB\ts2\tright\tamb\n"
                                    << "unknown\ts1\tleft\n\n";
  auto data = load_wsi(scratch("wsi.tsv"), v);
  REQUIRE(data.instances.size() == 2);
  CHECK(data.skipped_oov == 1);
  CHECK(data.instances[0].context == toks({"left", "amb", "mid"}));
  CHECK(data.instances[1].context == toks({"right", "amb"}));
  CHECK(data.instances[1].gold == "s2");
  std::ofstream(scratch("bad.tsv")) << "amb\tonly-two\n";
  CHECK_THROWS_AS(load_wsi(scratch("bad.tsv"), v), DataError);
  CHECK_THROWS_AS(load_wsi(scratch("none.tsv"), v), DataError);
}

TEST_CASE("scws dataset file") {
  auto v = vocab_of({"amb", "left", "right", "mid"});
  auto pair = parse_scws_line("amb\tmid\t7.5\tleft <b>amb</b> right\tthe <b>Mid</b> left", v);
  REQUIRE(pair.has_value());
  CHECK(pair->score == 7.5);
  CHECK(pair->context1.ids == std::vector<WordId>{1, 0, 2});
  CHECK(pair->context1.target == 1);
  CHECK(pair->context2.ids == std::vector<WordId>{3, 1});
  CHECK(pair->context2.target == 0);
  CHECK_FALSE(parse_scws_line("amb\tzebra\t1\t<b>amb</b>\t<b>zebra</b>", v).has_value());
  CHECK_THROWS_AS(parse_scws_line("amb\tmid\tx\t<b>amb</b>\t<b>mid</b>", v), DataError);
  CHECK_THROWS_AS(parse_scws_line("amb\tmid\t1\tamb\t<b>mid</b>", v), DataError);
}

TEST_CASE("eval_scws ranks pairs") {
  auto v = vocab_of({"amb", "left", "right", "mid"});
  auto p = rigged_model();
  std::ofstream(scratch("scws.tsv"))
      << "amb\tleft\t9\tleft <b>amb</b>\t<b>left</b> mid\n"
      << "amb\tleft\t2\tright <b>amb</b>\t<b>left</b> mid\n"
      << "amb\tzebra\t5\t<b>amb</b>\t<b>zebra</b>\n";
  auto data = load_scws(scratch("scws.tsv"), v);
  CHECK(data.skipped_oov == 1);
  auto r = eval_scws(data, p, SimMetric::kMaxSimC);
  CHECK(r.scored == 2);
  CHECK(r.skipped == 1);
  CHECK(r.rho == doctest::Approx(1.0));
  CHECK(eval_scws(data, p, SimMetric::kAvgSimC).rho == doctest::Approx(1.0));
}
