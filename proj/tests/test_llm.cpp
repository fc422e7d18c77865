#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>

#include "helpers.hpp"
#include "ivpipe/corpus.hpp"
#include "ivpipe/llm.hpp"

using namespace ivpipe;
using llm::AnswerClass;

namespace {

schema::Schema demo() {
  return corpus::parse_question_sets(testutil::data_path("schema/demo_schema.json"));
}

const schema::VariableSpec& var(const schema::Schema& sch, const std::string& id) {
  const auto* v = sch.find_variable(id);
  REQUIRE(v != nullptr);
  return *v;
}

llm::CompletionRequest request(const std::string& tag, std::string history = "hi") {
  llm::CompletionRequest req;
  req.tag = tag;
  req.payload.history = std::move(history);
  return req;
}

}  // namespace

TEST_CASE("decode presets") {
  const auto det = llm::DecodeParams::deterministic();
  CHECK(det.temperature == 0.0);
  CHECK(det.json_mode);
  const auto llama = llm::DecodeParams::llama();
  CHECK(llama.temperature == 0.3);
  CHECK(llama.top_p == 0.9);
  CHECK_FALSE(llama.json_mode);
  const Json j = det.to_json();
  CHECK(j.at("temperature") == 0.0);
  CHECK(j.at("seed") == 12345);
}

TEST_CASE("parse_answer: answered values per type") {
  const auto sch = demo();
  const auto& scale = var(sch, "thh_mood");
  const auto& category = var(sch, "lbi_a1");
  const auto& measure = var(sch, "lbi_hours");
  const auto& notes = var(sch, "critaprobenotes");

  auto parsed = llm::parse_answer(R"({"reason": "flat affect", "answer": 3})", scale);
  CHECK(parsed.cls == AnswerClass::answered);
  CHECK(std::get<std::int64_t>(parsed.value) == 3);
  CHECK(parsed.reason == "flat affect");

  // integral floats and digit strings coerce
  CHECK(std::get<std::int64_t>(llm::parse_answer(R"({"answer": 2.0})", scale).value) == 2);
  CHECK(std::get<std::int64_t>(llm::parse_answer(R"({"answer": " 4 "})", scale).value) == 4);

  // categories by code or by (normalized) label
  CHECK(std::get<std::int64_t>(llm::parse_answer(R"({"answer": 5})", category).value) == 5);
  CHECK(std::get<std::int64_t>(llm::parse_answer(R"({"answer": "retired"})", category).value) == 5);
  CHECK(std::get<std::int64_t>(
            llm::parse_answer(
                R"x({"answer": "Part-Time Gainful Employment (30 hours or less/week)"})x",
                category)
                .value) == 2);

  CHECK(std::get<std::int64_t>(llm::parse_answer(R"({"answer": 37})", measure).value) == 37);
  CHECK(std::get<double>(llm::parse_answer(R"({"answer": 37.5})", measure).value) == 37.5);
  CHECK(std::get<double>(llm::parse_answer(R"({"answer": "37.5"})", measure).value) == 37.5);

  CHECK(std::get<std::string>(llm::parse_answer(R"({"answer": "Yes"})", notes).value) == "yes");
  CHECK(std::get<std::string>(llm::parse_answer(R"({"answer": false})", notes).value) == "no");
  CHECK(std::get<std::string>(llm::parse_answer(R"({"answer": "true"})", notes).value) == "yes");
}

TEST_CASE("parse_answer: abstentions") {
  const auto sch = demo();
  const auto& scale = var(sch, "thh_mood");
  CHECK(llm::parse_answer(R"({"answer": null})", scale).cls == AnswerClass::abstained);
  CHECK(llm::parse_answer(R"({"answer": "N/A"})", scale).cls == AnswerClass::abstained);
  CHECK(llm::parse_answer(R"({"answer": " none "})", scale).cls == AnswerClass::abstained);
  CHECK(llm::parse_answer(R"({"answer": "null"})", scale).cls == AnswerClass::abstained);
}

TEST_CASE("parse_answer: prose wrapping and nested JSON still parse") {
  const auto sch = demo();
  const auto& scale = var(sch, "thh_mood");

  const auto wrapped = llm::parse_answer(R"(Sure! {"reason": "r", "answer": "2"} Hope that helps.)",
                                         scale);
  CHECK(wrapped.cls == AnswerClass::answered);
  CHECK(std::get<std::int64_t>(wrapped.value) == 2);

  const auto tricky = llm::parse_answer(
      R"(prefix {"reason": "said \"{fine}\" twice", "answer": {"nested": 1}} suffix)", scale);
  CHECK(tricky.cls == AnswerClass::invalid);  // object answers are not integers
  CHECK(tricky.reason == "said \"{fine}\" twice");
}

TEST_CASE("parse_answer: error classes") {
  const auto sch = demo();
  const auto& scale = var(sch, "thh_mood");
  const auto& category = var(sch, "lbi_a1");
  const auto& measure = var(sch, "lbi_hours");
  const auto& notes = var(sch, "critaprobenotes");

  CHECK(llm::parse_answer("total nonsense", scale).cls == AnswerClass::format_error);
  CHECK(llm::parse_answer("[1, 2, 3]", scale).cls == AnswerClass::format_error);
  CHECK(llm::parse_answer(R"({"reason": "no answer key"})", scale).cls ==
        AnswerClass::format_error);
  CHECK(llm::parse_answer("", scale).cls == AnswerClass::format_error);

  CHECK(llm::parse_answer(R"({"answer": 9})", scale).cls == AnswerClass::invalid);
  CHECK(llm::parse_answer(R"({"answer": 2.5})", scale).cls == AnswerClass::invalid);
  CHECK(llm::parse_answer(R"({"answer": "often"})", scale).cls == AnswerClass::invalid);
  CHECK(llm::parse_answer(R"({"answer": "Astronaut"})", category).cls == AnswerClass::invalid);
  CHECK(llm::parse_answer(R"({"answer": 777})", category).cls == AnswerClass::invalid);
  CHECK(llm::parse_answer(R"({"answer": "a lot"})", measure).cls == AnswerClass::invalid);
  CHECK(llm::parse_answer(R"({"answer": "maybe"})", notes).cls == AnswerClass::invalid);

  CHECK_THROWS_AS(llm::parse_answer("{}", var(sch, "thh_risk")), SchemaError);
}

TEST_CASE("mock provider: canned responses by tag, call log, default") {
  const std::map<std::string, std::string> canned = {{"iv/var", R"({"answer": 1})"}};
  llm::MockLlmProvider mock(canned);
  mock.add("iv/other", R"({"answer": 2})");

  CHECK(mock.complete_raw(request("iv/var")) == R"({"answer": 1})");
  CHECK(mock.complete_raw(request("iv/other")) == R"({"answer": 2})");
  CHECK(mock.complete_raw(request("iv/unknown")) ==
        "{\"reason\": \"no canned response\", \"answer\": null}");
  CHECK(mock.calls() == 3);
  CHECK(mock.called_tags() == std::vector<std::string>{"iv/var", "iv/other", "iv/unknown"});
}

TEST_CASE("load_canned keeps strings raw and serializes structured values") {
  const auto tmp = std::filesystem::temp_directory_path() / "ivpipe_canned.json";
  jsonio::save_file(tmp.string(),
                    Json::parse(R"({"a": "verbatim text", "b": {"reason": "r", "answer": 3}})"));
  const auto canned = llm::MockLlmProvider::load_canned(tmp.string());
  CHECK(canned.at("a") == "verbatim text");
  CHECK(Json::parse(canned.at("b")).at("answer") == 3);

  jsonio::save_file(tmp.string(), Json::parse("[1, 2]"));
  CHECK_THROWS_AS(llm::MockLlmProvider::load_canned(tmp.string()), SchemaError);
  std::filesystem::remove(tmp);
}

TEST_CASE("complete retries transient failures with backoff") {
  llm::MockLlmProvider mock;
  mock.add("iv/var", R"({"answer": 1})");
  llm::RetryPolicy retap{3, 1};

  mock.fail_next(2);
  CHECK(llm::complete(request("iv/var"), mock, 0, retap) == R"({"answer": 1})");
  CHECK(mock.calls() == 3);

  mock.fail_next(3);
  CHECK_THROWS_AS(llm::complete(request("iv/var"), mock, 0, retap), ProviderError);
  CHECK(mock.calls() == 6);
}

TEST_CASE("complete enforces the context budget before calling out") {
  llm::MockLlmProvider mock;
  auto req = request("iv/var", std::string(100, 'x'));
  CHECK_THROWS_AS(llm::complete(req, mock, 10), ContextOverflow);
  CHECK(mock.calls() == 0);
  CHECK_NOTHROW(llm::complete(req, mock, 100));
}

TEST_CASE("rate limiter validates and allows burst traffic through") {
  CHECK_THROWS_AS(llm::RateLimiter(0, 1), ConfigError);
  CHECK_THROWS_AS(llm::RateLimiter(60, 0), ConfigError);

  llm::MockLlmProvider mock;
  mock.add("iv/var", "ok");
  llm::ThrottledProvider throttled(mock, 600000.0, 5.0);  // 10 per ms: effectively free
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 20; ++i) CHECK(throttled.complete_raw(request("iv/var")) == "ok");
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed < std::chrono::seconds(5));
  CHECK(throttled.id() == "mock");
  CHECK(mock.calls() == 20);
}
