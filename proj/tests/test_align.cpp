#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "ivpipe/align.hpp"

using namespace ivpipe;
using testutil::make_timed_transcript;
using testutil::make_transcript;

TEST_CASE("align_words finds the monotone common subsequence") {
  const auto wa = align::align_words({"a", "b", "c"}, {"b", "c", "d"});
  REQUIRE(wa.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}, {2, 1}});
  CHECK(wa.unmatched_left == std::vector<std::size_t>{0});
  CHECK(wa.unmatched_right == std::vector<std::size_t>{2});
}

TEST_CASE("align_words never matches empty normalized words") {
  const auto wa = align::align_words({"", "x"}, {"", "x"});
  REQUIRE(wa.pairs.size() == 1);
  CHECK(wa.pairs[0] == std::pair<std::size_t, std::size_t>{1, 1});
}

TEST_CASE("merge keeps diarized speakers and verbatim words") {
  const auto diarized = make_transcript(
      "iv-m", {{"Interviewer", "hello there friend"}, {"Patient", "doing well today"}},
      corpus::Source::diarized);
  const auto verbatim = make_timed_transcript(
      "iv-m", {{"", "hello there friend doing well today"}});

  const auto out = align::merge_transcripts(diarized, verbatim);
  REQUIRE(out.ok);
  CHECK(out.dropped_utterances == 0);
  const auto& m = out.transcript;
  CHECK(m.source == corpus::Source::merged);
  REQUIRE(m.utterances.size() == 2);
  CHECK(m.utterances[0].speaker == "Interviewer");
  CHECK(m.utterances[0].text == "hello there friend");
  CHECK(m.utterances[1].speaker == "Patient");
  CHECK(m.utterances[1].text == "doing well today");
  CHECK(m.utterances[0].id == 0);
  CHECK(m.utterances[1].id == 1);
  // timings ride along from the verbatim side
  REQUIRE(m.utterances[1].words.size() == 3);
  CHECK(m.utterances[1].words[0].start_ms == 3 * 400);
}

TEST_CASE("merge without timestamps hands orphan words to the preceding turn") {
  const auto diarized = make_transcript(
      "iv-m", {{"A", "alpha beta"}, {"B", "gamma delta"}}, corpus::Source::diarized);
  const auto verbatim = make_transcript("iv-m", {{"", "alpha beta um uh gamma delta"}},
                                        corpus::Source::verbatim);
  const auto out = align::merge_transcripts(diarized, verbatim);
  REQUIRE(out.ok);
  CHECK(out.transcript.utterances[0].text == "alpha beta um uh");
  CHECK(out.transcript.utterances[1].text == "gamma delta");
}

TEST_CASE("merge with timestamps lets an orphan choose the closer turn") {
  corpus::Transcript verbatim;
  verbatim.interview_id = "iv-m";
  verbatim.source = corpus::Source::verbatim;
  corpus::Utterance u;
  u.id = 0;
  u.text = "alpha beta zz gamma delta";
  const std::vector<std::pair<std::int64_t, std::int64_t>> times = {
      {0, 100}, {100, 200}, {950, 1000}, {1000, 1100}, {1100, 1200}};
  const auto toks = text::split_ws(u.text);
  for (std::size_t i = 0; i < toks.size(); ++i)
    u.words.push_back({toks[i], times[i].first, times[i].second});
  verbatim.utterances.push_back(std::move(u));

  const auto diarized = make_transcript(
      "iv-m", {{"A", "alpha beta"}, {"B", "gamma delta"}}, corpus::Source::diarized);
  const auto out = align::merge_transcripts(diarized, verbatim);
  REQUIRE(out.ok);
  CHECK(out.transcript.utterances[0].text == "alpha beta");
  CHECK(out.transcript.utterances[1].text == "zz gamma delta");
}

TEST_CASE("merge drops diarized turns that align nowhere") {
  const auto diarized = make_transcript(
      "iv-m", {{"A", "alpha"}, {"B", "qqq"}, {"C", "beta"}}, corpus::Source::diarized);
  const auto verbatim = make_transcript("iv-m", {{"", "alpha beta"}}, corpus::Source::verbatim);
  const auto out = align::merge_transcripts(diarized, verbatim);
  REQUIRE(out.ok);
  CHECK(out.dropped_utterances == 1);
  REQUIRE(out.transcript.utterances.size() == 2);
  CHECK(out.transcript.utterances[0].speaker == "A");
  CHECK(out.transcript.utterances[1].speaker == "C");
}

TEST_CASE("merge reports total alignment failure instead of throwing") {
  const auto diarized = make_transcript("iv-m", {{"A", "xyz"}}, corpus::Source::diarized);
  const auto verbatim = make_transcript("iv-m", {{"", "abc"}}, corpus::Source::verbatim);
  const auto out = align::merge_transcripts(diarized, verbatim);
  CHECK_FALSE(out.ok);
  CHECK_FALSE(out.error.empty());
}

TEST_CASE("word error rate fixtures") {
  CHECK(align::wer({"a", "b", "c"}, {"a", "b", "c"}) == 0.0);
  CHECK(align::wer({"a", "b", "c"}, {"a", "x", "c"}) == Catch::Approx(1.0 / 3.0));
  CHECK(align::wer({"a", "b", "c", "d"}, {"a", "c", "d", "e"}) == 0.5);
  const std::vector<std::string> one = {"a"};
  const std::vector<std::string> none;
  CHECK(align::wer(one, none) == 1.0);
  CHECK_THROWS_AS(align::wer(none, one), EmptyReference);

  const auto ref = make_transcript("r", {{"A", "Hello, world!"}});
  const auto hyp = make_transcript("h", {{"B", "hello world"}});
  CHECK(align::wer(ref, hyp) == 0.0);  // scored on normalized tokens
}

TEST_CASE("tder is zero on self and invariant to speaker relabeling") {
  const auto ref = make_transcript("r", {{"A", "one two"}, {"B", "three four"}});
  CHECK(align::tder(ref, ref) == 0.0);

  const auto relabeled = make_transcript("h", {{"X", "one two"}, {"Y", "three four"}});
  CHECK(align::tder(ref, relabeled) == 0.0);

  const auto swapped = make_transcript("h", {{"B", "one two"}, {"A", "three four"}});
  CHECK(align::tder(ref, swapped) == 0.0);
}

TEST_CASE("tder counts confusions and unmatched words over reference words") {
  const auto ref = make_transcript("r", {{"A", "one two"}, {"B", "three four"}});

  const auto collapsed = make_transcript("h", {{"A", "one two three four"}});
  CHECK(align::tder(ref, collapsed) == 0.5);

  const auto truncated = make_transcript("h", {{"A", "one two"}, {"B", "three"}});
  CHECK(align::tder(ref, truncated) == 0.25);

  const auto padded = make_transcript("h", {{"A", "one two extra"}, {"B", "three four"}});
  CHECK(align::tder(ref, padded) == 0.25);

  CHECK_THROWS_AS(align::tder(make_transcript("r", {}), ref), EmptyReference);
}

TEST_CASE("tder refuses unreasonably many speaker labels") {
  std::vector<std::pair<std::string, std::string>> many;
  for (int i = 0; i < 9; ++i) many.push_back({"spk" + std::to_string(i), "word" + std::to_string(i)});
  const auto wide = make_transcript("r", many);
  CHECK_THROWS_AS(align::tder(wide, wide), Error);
}
