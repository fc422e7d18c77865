#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "helpers.hpp"
#include "ivpipe/corpus.hpp"

using namespace ivpipe;

namespace {

Json minimal_transcript_json() {
  return Json::parse(R"({
    "interview_id": "iv-1",
    "source": "merged",
    "utterances": [
      {"id": 0, "speaker": "Interviewer", "text": "How are you today?"},
      {"id": 1, "speaker": "Patient", "text": "Doing fine.",
       "words": [{"text": "Doing", "start_ms": 0, "end_ms": 400},
                 {"text": "fine.", "start_ms": 400, "end_ms": 800}]}
    ]
  })");
}

schema::Schema tiny_schema() {
  return corpus::parse_question_sets(testutil::data_path("schema/demo_schema.json"));
}

}  // namespace

TEST_CASE("transcript decoding and the word fallback") {
  const auto t = corpus::transcript_from_json(minimal_transcript_json(), "test");
  CHECK(t.interview_id == "iv-1");
  CHECK(t.source == corpus::Source::merged);
  REQUIRE(t.utterances.size() == 2);
  // no words supplied: whitespace tokens fill in, without timings
  REQUIRE(t.utterances[0].words.size() == 4);
  CHECK(t.utterances[0].words[0].text == "How");
  CHECK_FALSE(t.utterances[0].words[0].start_ms.has_value());
  // words supplied: taken verbatim with timings
  REQUIRE(t.utterances[1].words.size() == 2);
  CHECK(t.utterances[1].words[1].start_ms == 400);
}

TEST_CASE("transcript ids must be dense and ascending") {
  Json j = minimal_transcript_json();
  j["utterances"][1]["id"] = 5;
  CHECK_THROWS_AS(corpus::transcript_from_json(j, "test"), SchemaError);

  Json missing = minimal_transcript_json();
  missing.erase("source");
  CHECK_THROWS_AS(corpus::transcript_from_json(missing, "test"), SchemaError);

  Json bad_source = minimal_transcript_json();
  bad_source["source"] = "telepathic";
  CHECK_THROWS_AS(corpus::transcript_from_json(bad_source, "test"), SchemaError);
}

TEST_CASE("transcript round trip preserves content") {
  const auto t = corpus::transcript_from_json(minimal_transcript_json(), "test");
  const auto back = corpus::transcript_from_json(corpus::transcript_to_json(t), "again");
  CHECK(back.interview_id == t.interview_id);
  REQUIRE(back.utterances.size() == t.utterances.size());
  CHECK(back.utterances[1].text == t.utterances[1].text);
  CHECK(back.utterances[1].words[0].end_ms == t.utterances[1].words[0].end_ms);
}

TEST_CASE("gold values are validated against the variable type") {
  const auto sch = tiny_schema();

  auto gold = [&](const char* body) {
    return corpus::detail::gold_from_json(Json::parse(body), sch, "test");
  };

  const auto ok = gold(R"({"interview_id": "iv-1", "values": {
    "thh_mood": 3,
    "lbi_a1": 2,
    "lbi_hours": 37.5,
    "critaprobenotes": "slept poorly, appetite stable",
    "thh_risk": 4
  }})");
  CHECK(std::get<std::int64_t>(ok.values.at("thh_mood")) == 3);
  CHECK(std::get<double>(ok.values.at("lbi_hours")) == 37.5);

  // category labels resolve to their code, modulo normalization
  const auto labeled =
      gold(R"({"interview_id": "iv-1", "values": {"lbi_a1": "Retired"}})");
  CHECK(std::holds_alternative<std::int64_t>(labeled.values.at("lbi_a1")));

  CHECK_THROWS_AS(gold(R"({"interview_id": "x", "values": {"thh_mood": 9}})"), SchemaError);
  CHECK_THROWS_AS(gold(R"({"interview_id": "x", "values": {"thh_mood": "often"}})"), SchemaError);
  CHECK_THROWS_AS(gold(R"({"interview_id": "x", "values": {"lbi_a1": "Astronaut"}})"), SchemaError);
  CHECK_THROWS_AS(gold(R"({"interview_id": "x", "values": {"no_such_var": 1}})"), SchemaError);
  CHECK_THROWS_AS(gold(R"({"interview_id": "x", "values": {"critaprobenotes": 3}})"), SchemaError);
  CHECK_THROWS_AS(gold(R"({"interview_id": "x", "values": {"thh_risk": 17}})"), SchemaError);
}

TEST_CASE("question set files accept both top-level layouts") {
  const auto sch = tiny_schema();  // the shipped file wraps sections in an object
  CHECK(sch.sections().size() == 3);
  CHECK(sch.find_section("thh") != nullptr);
  CHECK(sch.find_variable("dsm5capscritb01trauma1") != nullptr);
  CHECK(sch.find_question("cap_q2") != nullptr);

  // a bare array of sections parses identically
  const Json doc = jsonio::load_file(testutil::data_path("schema/demo_schema.json"));
  const auto tmp = std::filesystem::temp_directory_path() / "ivpipe_sections_array.json";
  jsonio::save_file(tmp.string(), doc.at("sections"));
  const auto sch2 = corpus::parse_question_sets(tmp.string());
  CHECK(sch2.sections().size() == sch.sections().size());

  jsonio::save_file(tmp.string(), Json("just a string"));
  CHECK_THROWS_AS(corpus::parse_question_sets(tmp.string()), SchemaError);
  std::filesystem::remove(tmp);
}
