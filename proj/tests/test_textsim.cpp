#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "ivpipe/textsim.hpp"

using namespace ivpipe;
using textsim::Vector;

TEST_CASE("edit distance on classic fixtures") {
  CHECK(textsim::edit_distance("", "") == 0);
  CHECK(textsim::edit_distance("", "abc") == 3);
  CHECK(textsim::edit_distance("abc", "") == 3);
  CHECK(textsim::edit_distance("kitten", "sitting") == 3);
  CHECK(textsim::edit_distance("flaw", "lawn") == 2);
}

TEST_CASE("lev_similarity works on normalized text") {
  CHECK(textsim::lev_similarity("Hello, World!", "hello world") == 1.0);
  CHECK(textsim::lev_similarity("", "") == 1.0);
  CHECK(textsim::lev_similarity("", "abc") == 0.0);
  CHECK(textsim::lev_similarity("abc", "axc") == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("cosine basics") {
  CHECK(textsim::cosine({1, 0}, {0, 1}) == 0.0);
  CHECK(textsim::cosine({2, 0}, {5, 0}) == 1.0);
  CHECK(textsim::cosine({0, 0}, {1, 1}) == 0.0);
  CHECK_THROWS_AS(textsim::cosine({1}, {1, 2}), DimensionMismatch);
}

TEST_CASE("hash embeddings are unit bags of words") {
  textsim::HashEmbeddingProvider p(512);
  CHECK(p.dimension() == 512);
  CHECK(p.id() == "local-hash-512");
  CHECK_THROWS_AS(textsim::HashEmbeddingProvider(0), ConfigError);

  const auto vecs = p.embed({"alpha beta gamma", "gamma alpha beta", "alpha beta gamma"});
  REQUIRE(vecs.size() == 3);
  // word order is invisible to a bag of words
  CHECK(textsim::cosine(vecs[0], vecs[1]) == Catch::Approx(1.0));
  CHECK(vecs[0] == vecs[2]);
  double norm = 0.0;
  for (double x : vecs[0]) norm += x * x;
  CHECK(norm == Catch::Approx(1.0));

  const auto empty = p.embed({""});
  for (double x : empty[0]) CHECK(x == 0.0);
}

namespace {

class CountingProvider final : public textsim::EmbeddingProvider {
 public:
  std::vector<Vector> embed(const std::vector<std::string>& texts) override {
    calls += texts.size();
    return inner.embed(texts);
  }
  std::size_t dimension() const override { return inner.dimension(); }
  std::string id() const override { return inner.id(); }

  textsim::HashEmbeddingProvider inner{64};
  std::size_t calls = 0;
};

}  // namespace

TEST_CASE("caching provider hits the backend once per distinct text") {
  auto counting = std::make_shared<CountingProvider>();
  textsim::CachingEmbeddingProvider cache(counting);

  const auto first = cache.embed({"a", "b", "a"});
  CHECK(counting->calls == 3);  // misses are positional, so the repeat still goes through
  CHECK(cache.cache_size() == 2);

  const auto second = cache.embed({"b", "a", "c"});
  CHECK(counting->calls == 4);  // only "c" was new
  CHECK(cache.cache_size() == 3);
  CHECK(first[0] == second[1]);
  CHECK(first[1] == second[0]);
}

TEST_CASE("similarity_matrix shapes and channels") {
  textsim::HashEmbeddingProvider p(256);
  const std::vector<std::string> left = {"how are you", "fine thanks"};
  const std::vector<std::string> right = {"how are you"};

  const auto e = textsim::similarity_matrix(left, right, textsim::Channel::embedding, &p);
  REQUIRE(e.rows == 2);
  REQUIRE(e.cols == 1);
  CHECK(e.at(0, 0) == Catch::Approx(1.0));
  CHECK(e.at(1, 0) < 0.5);
  CHECK(e.column_maxima() == std::vector<double>{e.at(0, 0)});

  const auto l = textsim::similarity_matrix(left, right, textsim::Channel::levenshtein, nullptr);
  CHECK(l.at(0, 0) == 1.0);

  CHECK_THROWS_AS(textsim::similarity_matrix(left, right, textsim::Channel::embedding, nullptr),
                  ConfigError);

  const auto empty = textsim::similarity_matrix({}, right, textsim::Channel::embedding, &p);
  CHECK(empty.rows == 0);
  CHECK(empty.cells.empty());
}
