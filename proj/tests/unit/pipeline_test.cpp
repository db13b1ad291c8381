#include <doctest.h>

#include <random>
#include <set>

#include "parsejargon/error.hpp"
#include "parsejargon/gateway.hpp"
#include "parsejargon/pipeline.hpp"
#include "support.hpp"

using namespace parsejargon;
using testing::error_code;
using testing::FnProvider;
using json = nlohmann::json;

namespace {

TranscriptSegment seg(int64_t seq, std::string text) {
  return {"s1", seq, std::move(text), seq * 1000, seq * 1000 + 500};
}

Gateway gateway_of(std::shared_ptr<FnProvider> provider) {
  RetryPolicy retry;
  retry.retry_max = 0;
  return Gateway(std::move(provider), {}, retry, [](auto) {});
}

std::shared_ptr<FnProvider> scripted(std::vector<std::string> identify,
                                     std::string filter = "") {
  auto i = std::make_shared<std::size_t>(0);
  return std::make_shared<FnProvider>(
      [identify = std::move(identify), filter, i](const Messages& m) -> std::string {
        if (!testing::starts_with_transcript(m)) return filter;
        std::size_t n = std::min((*i)++, identify.size() - 1);
        return identify[n];
      });
}

SessionState fresh(std::string background = "") {
  SessionState s;
  s.session_id = "s1";
  s.profile.background_text = std::move(background);
  return s;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("normalize_term") {
  CHECK(normalize_term("Remote  Sensing ") == "remote sensing");
  CHECK(normalize_term("FNO") == "fno");
  CHECK(normalize_term("\tSelf-supervised\nLearning") == "self-supervised learning");
  CHECK(normalize_term("ÜBER Straße") == "über straße");
  CHECK(normalize_term("   ").empty());
}

TEST_CASE("mode follows the profile background") {
  CHECK(fresh().mode() == Mode::General);
  CHECK(fresh("  ").mode() == Mode::General);
  CHECK(fresh("I am a physicist.").mode() == Mode::Personalized);
}

TEST_CASE("a term is defined once per meeting") {
  auto provider = scripted({R"([{"remote sensing": "Collecting data about Earth from satellites or aircraft."}])",
                            R"([{"Remote Sensing": "again"}])"});
  auto gateway = gateway_of(provider);
  auto [s1, d1] = process_segment(fresh(), seg(0, "We use remote sensing."), gateway, 500);
  REQUIRE(d1.new_entries.size() == 1);
  CHECK(d1.new_entries[0].key == "remote sensing");
  CHECK(d1.new_entries[0].origin_seq == 0);
  CHECK(d1.new_entries[0].identified_at_ms == 500);
  CHECK(d1.highlights.size() == 1);

  auto [s2, d2] = process_segment(s1, seg(1, "Remote Sensing is everywhere."), gateway, 1500);
  CHECK(d2.new_entries.empty());
  CHECK(d2.candidates.empty());
  REQUIRE(d2.highlights.size() == 1);
  CHECK(d2.highlights[0] == HighlightSpan{1, 0, 14, "remote sensing"});
  CHECK(s2.glossary.size() == 1);
  CHECK(s2.next_seq_expected == 2);
  // the second identify call saw the defined term
  CHECK(provider->requests[1].user.find("Previously define terms: [\"remote sensing\"]") !=
        std::string::npos);
}

TEST_CASE("empty identification") {
  auto gateway = gateway_of(scripted({"[]"}));
  auto [s, d] = process_segment(fresh(), seg(0, "Hello everyone."), gateway, 0);
  CHECK(d.empty());
  CHECK(d.diagnostics.empty());
  CHECK(s.glossary.empty());
  CHECK(s.defined_keys.empty());
  CHECK(s.next_seq_expected == 1);
}

TEST_CASE("duplicates and blank entries inside one response are dropped") {
  auto gateway = gateway_of(scripted(
      {R"([{"FNO": "a"}, {"fno ": "b"}, {"": "c"}, {"qubit": "  "}, {"LLM": "d"}])"}));
  auto [s, d] = process_segment(fresh(), seg(0, "FNO and LLM."), gateway, 0);
  REQUIRE(s.glossary.size() == 2);
  CHECK(s.glossary[0].definition == "a");
  CHECK(s.glossary[1].key == "llm");
  CHECK(d.candidates.size() == 2);
}

TEST_CASE("sequence gap") {
  auto gateway = gateway_of(scripted({"[]"}));
  CHECK(error_code([&] { process_segment(fresh(), seg(1, "x"), gateway, 0); }) ==
        ErrorCode::SequenceGap);
}

TEST_CASE("personalized filtering keeps identification order") {
  auto provider = scripted(
      {R"([{"Pre-training": "p"}, {"Remote Sensing": "r"}, {"Satellite Data": "s"}])"},
      R"({"understood_terms": ["Pre-training"], "refined_glossary": [{"Satellite Data": "s"}, {"Remote Sensing": "r"}]})");
  auto gateway = gateway_of(provider);
  auto [s, d] = process_segment(fresh("I am an ML engineer."), seg(0, "x."), gateway, 0);
  REQUIRE(s.glossary.size() == 2);
  CHECK(s.glossary[0].term == "Remote Sensing");
  CHECK(s.glossary[1].term == "Satellite Data");
  CHECK(d.understood_dropped == std::vector<std::string>{"Pre-training"});
  CHECK(d.candidates.size() == 3);
  CHECK(s.defined_keys.count("pre-training") == 0);
  REQUIRE(provider->requests.size() == 2);
  CHECK(provider->requests[1].system.find("\"I am an ML engineer.\"") != std::string::npos);
}

TEST_CASE("no filter call without candidates") {
  auto provider = scripted({"[]"}, "unused");
  auto gateway = gateway_of(provider);
  process_segment(fresh("bg"), seg(0, "x."), gateway, 0);
  CHECK(gateway.filter_calls() == 0);
}

TEST_CASE("gateway failures leave state untouched") {
  auto failing = std::make_shared<FnProvider>([](const Messages&) -> std::string {
    throw ProviderError(ProviderErrorKind::Transport, "down");
  });
  auto gateway = gateway_of(failing);
  auto ok = gateway_of(scripted({R"([{"FNO": "op"}])"}));
  auto [s0, d0] = process_segment(fresh(), seg(0, "FNO."), ok, 0);

  auto [s1, d1] = process_segment(s0, seg(1, "FNO again."), gateway, 10);
  CHECK(s1.glossary == s0.glossary);
  CHECK(s1.defined_keys == s0.defined_keys);
  CHECK(s1.next_seq_expected == 2);
  CHECK(d1.empty());
  REQUIRE(d1.diagnostics.size() == 1);
  CHECK(d1.diagnostics[0].code == "provider_error");
  CHECK(d1.diagnostics[0].seq == 1);

  auto garbage = gateway_of(scripted({"I cannot help with that."}));
  auto [s2, d2] = process_segment(s1, seg(2, "x."), garbage, 20);
  REQUIRE(d2.diagnostics.size() == 1);
  CHECK(d2.diagnostics[0].code == "malformed_output");
  CHECK(s2.glossary == s0.glossary);

  // a failing filter also discards the identified terms
  auto bad_filter = gateway_of(scripted({R"([{"LLM": "d"}])"}, "not json"));
  auto [s3, d3] = process_segment(fresh("bg"), seg(0, "LLM."), bad_filter, 0);
  CHECK(s3.glossary.empty());
  CHECK(d3.diagnostics.at(0).code == "malformed_output");
}

TEST_CASE("feedback") {
  auto gateway = gateway_of(scripted({R"([{"FNO": "op"}])"}));
  auto [s, d] = process_segment(fresh(), seg(0, "FNO."), gateway, 0);

  auto liked = apply_feedback(s, {"fno", Verdict::Like, 1});
  CHECK(liked.profile.liked_terms == std::vector<std::string>{"fno"});
  auto flipped = apply_feedback(liked, {"FNO", Verdict::Dislike, 2});
  CHECK(flipped.profile.liked_terms.empty());
  CHECK(flipped.profile.disliked_terms == std::vector<std::string>{"fno"});
  CHECK(flipped.feedback_log.size() == 2);
  CHECK(flipped.glossary.size() == 1);  // disliked terms stay

  auto twice = apply_feedback(liked, {"fno", Verdict::Like, 3});
  CHECK(twice.profile == liked.profile);

  CHECK(error_code([&] { apply_feedback(s, {"qubit", Verdict::Like, 0}); }) ==
        ErrorCode::UnknownTerm);
  CHECK(flipped.profile.preference_summary() == "liked: []; disliked: [fno]");
}

TEST_CASE("preferences reach the next identification prompt") {
  auto provider = scripted({R"([{"FNO": "op"}])", "[]"});
  auto gateway = gateway_of(provider);
  auto [s, d] = process_segment(fresh(), seg(0, "FNO."), gateway, 0);
  s = apply_feedback(s, {"fno", Verdict::Like, 5});
  process_segment(s, seg(1, "More."), gateway, 10);
  CHECK(provider->requests.back().user ==
        "Transcript: More., Previously define terms: [\"FNO\"], User preference: "
        "liked: [fno]; disliked: []");
}

TEST_CASE("highlight_terms") {
  auto spans = highlight_terms("We use remote sensing data", {"remote sensing"});
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].start == 7);
  CHECK(spans[0].end == 21);

  spans = highlight_terms("We use remote sensing data", {"sensing", "remote sensing"});
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].key == "remote sensing");

  CHECK(highlight_terms("We use remote sensing data", {}).empty());
}

TEST_CASE("highlight_terms boundaries and offsets") {
  // word boundaries
  CHECK(highlight_terms("sensingly remote", {"sensing"}).empty());
  CHECK(highlight_terms("presensing", {"sensing"}).empty());
  CHECK(highlight_terms("(sensing)", {"sensing"}).size() == 1);
  // keys ending in punctuation still match
  CHECK(highlight_terms("we use C++ daily", {"c++"}).size() == 1);
  // case folding and repeated matches, sorted by start
  auto spans = highlight_terms("FNO beats fno and Fno", {"fno"}, 4);
  REQUIRE(spans.size() == 3);
  CHECK(spans[1] == HighlightSpan{4, 10, 13, "fno"});
  // code point offsets after non-ASCII text
  spans = highlight_terms("日本 über qubit", {"qubit", "über"});
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == HighlightSpan{0, 3, 7, "über"});
  CHECK(spans[1] == HighlightSpan{0, 8, 13, "qubit"});
  // offsets refer to the whitespace-normalized text
  spans = highlight_terms("  a   qubit", {"qubit"});
  CHECK(spans.at(0).start == 2);
  // overlapping keys: the longer claims the characters
  spans = highlight_terms("neural operator learning", {"neural operator", "operator learning"});
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == HighlightSpan{0, 7, 24, "operator learning"});
}

TEST_CASE("export_glossary") {
  CHECK(export_glossary(fresh()) == nlohmann::ordered_json::array());

  auto gateway = gateway_of(scripted({R"([{"FNO": "op"}])", R"([{"qubit": "unit"}])"}));
  auto [s0, d0] = process_segment(fresh(), seg(0, "FNO."), gateway, 100);
  auto [s1, d1] = process_segment(s0, seg(1, "qubit."), gateway, 200);
  // feedback for the later term arrives first
  auto s = apply_feedback(s1, {"qubit", Verdict::Dislike, 300});
  s = apply_feedback(s, {"fno", Verdict::Like, 400});
  s = apply_feedback(s, {"qubit", Verdict::Like, 500});
  s = apply_feedback(s, {"fno", Verdict::Dislike, 600});
  s = apply_feedback(s, {"fno", Verdict::Like, 700});

  auto doc = export_glossary(s);
  REQUIRE(doc.size() == 2);
  CHECK(doc[0].dump() ==
        R"({"term":"FNO","definition":"op","origin_seq":0,"identified_at_ms":100,"verdict":"like"})");
  CHECK(doc[1]["term"] == "qubit");
  CHECK(doc[1]["verdict"] == "like");

  auto one = apply_feedback(s1, {"fno", Verdict::Like, 1});
  auto doc2 = export_glossary(one);
  CHECK(doc2[0]["verdict"] == "like");
  CHECK(doc2[1]["verdict"].is_null());
}

TEST_CASE("identification times never decrease") {
  auto gateway = gateway_of(scripted({R"([{"a": "1"}])", R"([{"b": "2"}])"}));
  auto [s0, d0] = process_segment(fresh(), seg(0, "a."), gateway, 900);
  auto [s1, d1] = process_segment(s0, seg(1, "b."), gateway, 100);
  CHECK(s1.glossary[1].identified_at_ms == 900);
}

TEST_CASE("property: once-only, filter soundness and disjoint preferences") {
  const std::vector<std::string> pool = {
      "Remote Sensing", "remote  sensing", "REMOTE SENSING", "FNO", "fno",
      "Pre-training", "Self-supervised Learning", "qubit", "Qubit ", "LLM",
      "Satellite Data", "Benchmarking", "Foundation Models", "ablation"};
  int streams = 0;
  for (uint32_t seed = 0; seed < 1000; ++seed) {
    std::mt19937 rng(seed);
    const bool personalized = rng() % 2;
    std::vector<std::set<std::string>> identified_keys;

    auto provider = std::make_shared<FnProvider>([&](const Messages& m) -> std::string {
      int roll = rng() % 20;
      if (roll == 0) throw ProviderError(ProviderErrorKind::Timeout, "slow");
      if (roll == 1) return "garbage";
      if (testing::starts_with_transcript(m)) {
        json list = json::array();
        std::set<std::string> keys;
        for (int k = rng() % 5; k > 0; --k) {
          const auto& t = pool[rng() % pool.size()];
          list.push_back({{t, "definition of " + t}});
          keys.insert(normalize_term(t));
        }
        identified_keys.push_back(keys);
        return list.dump();
      }
      // filter: random subsets, supersets and rewrites
      auto user = json::parse(m.user);
      json understood = json::array(), refined = json::array();
      for (const auto& item : user) {
        for (const auto& [t, d] : item.items()) {
          int r = rng() % 4;
          if (r == 0) understood.push_back(t);
          else if (r == 1) refined.push_back({{t, "rewritten"}});
          else if (r == 2) refined.push_back(item);
        }
      }
      if (rng() % 3 == 0) refined.push_back({{"Invented Term", "x"}});
      return json{{"understood_terms", understood}, {"refined_glossary", refined}}.dump();
    });
    auto gateway = gateway_of(provider);

    SessionState state = fresh(personalized ? "I am an ML engineer." : "");
    int segments = 1 + rng() % 12;
    for (int i = 0; i < segments; ++i) {
      identified_keys.emplace_back();
      std::size_t mark = identified_keys.size();
      auto [next, delta] = process_segment(state, seg(i, "Sentence " + std::to_string(i) + "."),
                                           gateway, i * 100);
      std::set<std::string> this_segment;
      for (std::size_t j = mark; j < identified_keys.size(); ++j)
        this_segment.insert(identified_keys[j].begin(), identified_keys[j].end());
      for (const auto& e : delta.new_entries) {
        REQUIRE(this_segment.count(e.key));  // never invented
        REQUIRE(!state.defined_keys.count(e.key));
      }
      state = std::move(next);
      if (!state.glossary.empty() && rng() % 2) {
        const auto& key = state.glossary[rng() % state.glossary.size()].key;
        state = apply_feedback(state, {key, rng() % 2 ? Verdict::Like : Verdict::Dislike, i});
      }
    }

    std::set<std::string> keys;
    for (const auto& e : state.glossary) REQUIRE(keys.insert(e.key).second);
    REQUIRE(keys == state.defined_keys);
    for (const auto& k : state.profile.liked_terms)
      REQUIRE(std::find(state.profile.disliked_terms.begin(),
                        state.profile.disliked_terms.end(), k) ==
              state.profile.disliked_terms.end());
    ++streams;
  }
  CHECK(streams == 1000);
}

}  // TEST_SUITE
