#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>

#include "helpers.hpp"
#include "ivpipe/assess.hpp"
#include "ivpipe/synth.hpp"

using namespace ivpipe;

namespace {

schema::Schema demo() {
  return corpus::parse_question_sets(testutil::data_path("schema/demo_schema.json"));
}

// Shared synthetic interview: clean rates so segmentation recovers the truth.
struct Fixture {
  schema::Schema sch = demo();
  synth::SynthSpec spec;
  synth::SynthResult gen;
  textsim::HashEmbeddingProvider embedder{4096};
  segment::SegmentedInterview seg;

  Fixture() {
    spec.seed = 7;
    spec.interview_id = "iv-assess";
    gen = synth::generate(spec, sch);
    seg = segment::segment_interview(gen.transcript, sch, &embedder, {});
  }

  void fill(llm::MockLlmProvider& m) const {
    for (auto it = gen.mock_answers.begin(); it != gen.mock_answers.end(); ++it)
      m.add(it.key(), it.value().is_string() ? it.value().get<std::string>() : it.value().dump());
  }

  assess::AssessSettings settings(std::size_t workers = 1) const {
    assess::AssessSettings s;
    s.parallelism = workers;
    return s;
  }
};

int count_tags(const std::vector<std::string>& tags, const std::string& needle) {
  return static_cast<int>(std::count(tags.begin(), tags.end(), needle));
}

}  // namespace

TEST_CASE("predict_variable answers from canned responses") {
  Fixture fx;
  llm::MockLlmProvider mock;
  fx.fill(mock);
  const auto* var = fx.sch.find_variable("thh_mood");
  REQUIRE(var != nullptr);

  const auto p =
      assess::predict_variable(*var, fx.sch, fx.seg, fx.gen.transcript, mock, fx.settings());
  CHECK(p.interview_id == "iv-assess");
  CHECK(p.var_id == "thh_mood");
  CHECK(p.status == "answered");
  CHECK(p.has_value);
  CHECK_FALSE(p.sessions_used.empty());
  CHECK(p.provenance.provider == "mock");
  CHECK(p.provenance.setting == "zero");
  CHECK(p.provenance.timestamp.empty());
  CHECK(mock.called_tags() == std::vector<std::string>{"iv-assess/thh_mood"});
}

TEST_CASE("predict_variable abstains without sessions and rejects wrong types") {
  Fixture fx;
  llm::MockLlmProvider mock;
  fx.fill(mock);
  const auto* var = fx.sch.find_variable("thh_mood");

  segment::SegmentedInterview empty_seg;
  empty_seg.interview_id = "iv-assess";
  const auto p =
      assess::predict_variable(*var, fx.sch, empty_seg, fx.gen.transcript, mock, fx.settings());
  CHECK(p.status == "abstained");
  CHECK(p.reason == "no interview sessions cover this variable");
  CHECK(mock.calls() == 0);

  const auto* rule = fx.sch.find_variable("thh_risk");
  CHECK_THROWS_AS(
      assess::predict_variable(*rule, fx.sch, fx.seg, fx.gen.transcript, mock, fx.settings()),
      SchemaError);
}

TEST_CASE("predict_variable surfaces provider failures as prediction status") {
  Fixture fx;
  llm::MockLlmProvider mock;  // nothing canned
  mock.fail_next(5);
  const auto* var = fx.sch.find_variable("thh_mood");
  auto settings = fx.settings();
  settings.retry = llm::RetryPolicy{2, 1};

  const auto p =
      assess::predict_variable(*var, fx.sch, fx.seg, fx.gen.transcript, mock, settings);
  CHECK(p.status == "provider_error");
  CHECK_FALSE(p.error.empty());

  settings.context_budget = 1;  // any prompt overflows
  llm::MockLlmProvider mock2;
  const auto q =
      assess::predict_variable(*var, fx.sch, fx.seg, fx.gen.transcript, mock2, settings);
  CHECK(q.status == "context_overflow");
  CHECK(mock2.calls() == 0);
}

TEST_CASE("induce_slot_schema runs generate, merge, then optional override") {
  const auto sch = demo();
  const auto* notes = sch.find_variable("critaprobenotes");
  REQUIRE(notes != nullptr);

  llm::MockLlmProvider mock;
  mock.add("critaprobenotes/nsg",
           R"([{"slot": "Sleep Quality"}, "work history", {"slot": "sleep quality"}])");
  mock.add("critaprobenotes/nsm", R"({"sleep_quality": ["Sleep Quality"], "work_history": []})");

  const auto merged = assess::induce_slot_schema(*notes, {"note a", "note b"}, mock);
  CHECK(merged.notes_var_id == "critaprobenotes");
  CHECK(merged.origin == assess::SlotSchema::Origin::merged);
  CHECK(merged.slots == std::vector<std::string>{"sleep_quality", "work_history"});
  CHECK(mock.called_tags() ==
        std::vector<std::string>{"critaprobenotes/nsg", "critaprobenotes/nsm"});

  const auto tmp = std::filesystem::temp_directory_path() / "ivpipe_slots.json";
  jsonio::save_file(tmp.string(), Json::parse(R"(["Custom Slot", "other"])"));
  const auto refined = assess::induce_slot_schema(*notes, {"note a"}, mock, tmp.string());
  CHECK(refined.origin == assess::SlotSchema::Origin::refined);
  CHECK(refined.slots == std::vector<std::string>{"custom_slot", "other"});
  std::filesystem::remove(tmp);

  CHECK_THROWS_AS(assess::induce_slot_schema(*notes, {}, mock), EmptyInput);
  const auto* scale = sch.find_variable("thh_mood");
  CHECK_THROWS_AS(assess::induce_slot_schema(*scale, {"n"}, mock), SchemaError);
}

TEST_CASE("assess_notes_variable compares gold and predicted slot presence") {
  Fixture fx;
  const auto* notes = fx.sch.find_variable("critaprobenotes");
  assess::SlotSchema slots;
  slots.notes_var_id = "critaprobenotes";
  slots.slots = {"alpha", "beta", "gamma"};

  llm::MockLlmProvider mock;
  mock.add("iv-assess/critaprobenotes/nsf_gold",
           R"({"alpha": "present", "beta": "  ", "extra": "ignored"})");
  mock.add("iv-assess/critaprobenotes/nsf_pred", "alpha: reported nightmares");
  mock.add("iv-assess/critaprobenotes/slot/alpha", R"({"answer": "yes"})");
  mock.add("iv-assess/critaprobenotes/slot/beta", R"({"answer": "no"})");
  mock.add("iv-assess/critaprobenotes/slot/gamma", R"({"answer": null})");

  const auto cmp = assess::assess_notes_variable(*notes, fx.sch, fx.seg, fx.gen.transcript,
                                                 "gold note text", slots, mock, fx.settings());
  REQUIRE(cmp.cells.size() == 3);
  CHECK(cmp.cells[0].slot == "alpha");
  CHECK(cmp.cells[0].gold_present);
  CHECK(cmp.cells[0].predicted_present);
  CHECK(cmp.cells[0].error.empty());
  CHECK_FALSE(cmp.cells[1].gold_present);  // whitespace-only fill
  CHECK_FALSE(cmp.cells[1].predicted_present);
  CHECK_FALSE(cmp.cells[2].gold_present);  // unlisted slot
  CHECK_FALSE(cmp.cells[2].predicted_present);
  CHECK(cmp.cells[2].error == "abstained");

  const auto& tags = mock.called_tags();
  REQUIRE(tags.size() == 5);
  CHECK(tags[0] == "iv-assess/critaprobenotes/nsf_gold");
  CHECK(tags[1] == "iv-assess/critaprobenotes/nsf_pred");
  CHECK(tags[2] == "iv-assess/critaprobenotes/slot/alpha");
}

TEST_CASE("assess_notes_variable records a gold fill failure on every cell") {
  Fixture fx;
  const auto* notes = fx.sch.find_variable("critaprobenotes");
  assess::SlotSchema slots;
  slots.notes_var_id = "critaprobenotes";
  slots.slots = {"alpha", "beta"};

  llm::MockLlmProvider mock;
  mock.add("iv-assess/critaprobenotes/nsf_gold", "[]");  // not an object
  const auto cmp = assess::assess_notes_variable(*notes, fx.sch, fx.seg, fx.gen.transcript,
                                                 "gold", slots, mock, fx.settings());
  CHECK(mock.calls() == 1);  // stops before the predicted side
  for (const auto& cell : cmp.cells) {
    CHECK_FALSE(cell.gold_present);
    CHECK_THAT(cell.error, Catch::Matchers::StartsWith("gold fill failed"));
  }
}

TEST_CASE("assess_interview orders output, evaluates rules, and tags notes gaps") {
  Fixture fx;
  llm::MockLlmProvider mock;
  fx.fill(mock);

  corpus::GoldAssessment gold;
  gold.interview_id = "iv-assess";
  gold.values = fx.gen.gold.values;

  const auto report =
      assess::assess_interview(fx.gen.transcript, fx.sch, &gold, mock, fx.embedder, fx.settings());
  CHECK(report.interview_id == "iv-assess");
  REQUIRE(report.predictions.size() == fx.sch.variables().size());

  // Section order lbi, thh, cap; var_id order inside a section.
  std::vector<std::string> ids;
  for (const auto& p : report.predictions) ids.push_back(p.var_id);
  CHECK(ids == std::vector<std::string>{"lbi_a1", "lbi_hours", "lbi_residence_months",
                                        "thh_alcohol", "thh_appetite", "thh_mood",
                                        "thh_risk", "thh_sleep_hours", "critaprobenotes",
                                        "dsm5capscritb01trauma1",
                                        "dsm5capscritb01trauma1_distress",
                                        "dsm5capscritb01trauma1_num"});

  // Rules come from answered inputs, never from the provider.
  CHECK(count_tags(mock.called_tags(), "iv-assess/thh_risk") == 0);
  for (const auto& p : report.predictions) {
    if (p.var_id != "thh_risk" && p.var_id != "dsm5capscritb01trauma1") continue;
    CHECK(p.provenance.provider == "rule");
    CHECK((p.status == "answered" || p.status == "missing_dependency"));
  }

  // The notes variable ran the slot pipeline against its declared slots.
  const auto& notes_pred = *std::find_if(report.predictions.begin(), report.predictions.end(),
                                         [](const auto& p) { return p.var_id == "critaprobenotes"; });
  REQUIRE(notes_pred.slots.has_value());
  CHECK(notes_pred.slots->cells.size() == 6);

  // Without gold the notes variable abstains with a stated reason.
  llm::MockLlmProvider mock2;
  fx.fill(mock2);
  const auto no_gold = assess::assess_interview(fx.gen.transcript, fx.sch, nullptr, mock2,
                                                fx.embedder, fx.settings());
  const auto& ng = *std::find_if(no_gold.predictions.begin(), no_gold.predictions.end(),
                                 [](const auto& p) { return p.var_id == "critaprobenotes"; });
  CHECK(ng.status == "abstained");
  CHECK(ng.reason == "no gold note available");
  CHECK(count_tags(mock2.called_tags(), "iv-assess/critaprobenotes/nsf_gold") == 0);
}

TEST_CASE("assess_interview abstains when a notes variable declares no slots") {
  // Strip the declared slots from the schema copy on disk.
  Json doc = jsonio::load_file(testutil::data_path("schema/demo_schema.json"));
  for (Json& sec : doc.at("sections"))
    for (Json& var : sec.at("variables"))
      if (var.at("var_id") == "critaprobenotes") var.at("prompt_fields").erase("slots");
  const auto tmp = std::filesystem::temp_directory_path() / "ivpipe_noslots.json";
  jsonio::save_file(tmp.string(), doc);
  const auto sch = corpus::parse_question_sets(tmp.string());
  std::filesystem::remove(tmp);

  synth::SynthSpec spec;
  spec.seed = 7;
  spec.interview_id = "iv-assess";
  auto gen = synth::generate(spec, sch);
  textsim::HashEmbeddingProvider embedder{4096};

  llm::MockLlmProvider mock;
  for (auto it = gen.mock_answers.begin(); it != gen.mock_answers.end(); ++it)
    mock.add(it.key(), it.value().is_string() ? it.value().get<std::string>() : it.value().dump());

  corpus::GoldAssessment gold;
  gold.interview_id = "iv-assess";
  gold.values = gen.gold.values;

  assess::AssessSettings settings;
  const auto report =
      assess::assess_interview(gen.transcript, sch, &gold, mock, embedder, settings);
  const auto& p = *std::find_if(report.predictions.begin(), report.predictions.end(),
                                [](const auto& q) { return q.var_id == "critaprobenotes"; });
  CHECK(p.status == "abstained");
  CHECK(p.reason == "no slot schema available");

  // An override in the settings takes priority over declared slots.
  assess::AssessSettings with_override;
  assess::SlotSchema ss;
  ss.notes_var_id = "critaprobenotes";
  ss.slots = {"alpha"};
  with_override.slot_schemas["critaprobenotes"] = ss;
  mock.add("iv-assess/critaprobenotes/nsf_gold", R"({"alpha": "x"})");
  mock.add("iv-assess/critaprobenotes/nsf_pred", "text");
  mock.add("iv-assess/critaprobenotes/slot/alpha", R"({"answer": "yes"})");
  const auto report2 =
      assess::assess_interview(gen.transcript, sch, &gold, mock, embedder, with_override);
  const auto& p2 = *std::find_if(report2.predictions.begin(), report2.predictions.end(),
                                 [](const auto& q) { return q.var_id == "critaprobenotes"; });
  CHECK(p2.status == "answered");
  REQUIRE(p2.slots.has_value());
  REQUIRE(p2.slots->cells.size() == 1);
  CHECK(p2.slots->cells[0].gold_present);
}

TEST_CASE("reports are byte-stable across worker counts and round trip") {
  Fixture fx;
  corpus::GoldAssessment gold;
  gold.interview_id = "iv-assess";
  gold.values = fx.gen.gold.values;

  llm::MockLlmProvider m1;
  fx.fill(m1);
  llm::MockLlmProvider m4;
  fx.fill(m4);
  const auto r1 =
      assess::assess_interview(fx.gen.transcript, fx.sch, &gold, m1, fx.embedder, fx.settings(1));
  const auto r4 =
      assess::assess_interview(fx.gen.transcript, fx.sch, &gold, m4, fx.embedder, fx.settings(4));
  const std::string d1 = assess::report_to_json(r1).dump(2);
  const std::string d4 = assess::report_to_json(r4).dump(2);
  CHECK(d1 == d4);

  const auto back = assess::report_from_json(Json::parse(d1), "report");
  CHECK(assess::report_to_json(back).dump(2) == d1);
}
