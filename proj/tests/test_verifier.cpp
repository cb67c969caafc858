#include <doctest.h>

#include <random>

#include "rec/errors.hpp"
#include "rec/prompt_builder.hpp"
#include "rec/schema_io.hpp"
#include "rec/text.hpp"
#include "rec/verifier.hpp"
#include "support.hpp"

using namespace rec;

namespace {

ContextDocument gift_wrap_context() {
    const auto j = nlohmann::json::parse(testing::data("fixtures/gift_wrap/context.json"));
    return {std::nullopt,
            compose_task_context(j["task_prompt"].get<std::string>(), j["conversation"].get<std::string>()),
            SourceKind::TaskPrompt};
}

QualityEvalOutput worked_output() { return *parse_quality_output(testing::data("fixtures/gift_wrap/quality_output.json")).value; }

std::vector<ContextDocument> rag_chunks() {
    std::vector<ContextDocument> out;
    for (const auto& j : nlohmann::json::parse(testing::data("fixtures/rag/chunks.json")))
        out.push_back({j["context_id"].get<std::string>(), j["body"].get<std::string>(), SourceKind::RetrievedChunk});
    return out;
}

std::string rag_answer() {
    std::string a = testing::data("fixtures/rag/answer.txt");
    while (!a.empty() && a.back() == '\n') a.pop_back();
    return a;
}

}  // namespace

TEST_CASE("a conversation citation verifies against the context") {
    const auto r = verify_snippet("Agent: We offer gift wrapping but it cost $4.99 per item", gift_wrap_context(),
                                  MatchPolicy::normalized());
    CHECK(r.found);
    CHECK(r.occurrence_count == 1);
    REQUIRE(r.char_span.has_value());
    CHECK(text::slice(gift_wrap_context().body, *r.char_span) == "Agent: We offer gift wrapping but it cost $4.99 per item");
}

TEST_CASE("verify_snippet edge cases") {
    const ContextDocument ctx{std::nullopt, "héllo world", SourceKind::Document};
    CHECK_THROWS_AS(verify_snippet("", ctx, MatchPolicy::strict()), RecError);
    const auto whole = verify_snippet("héllo world", ctx, MatchPolicy::strict());
    CHECK(whole.found);
    CHECK(whole.char_span == CharSpan{0, 11});
    CHECK(whole.occurrence_count == 1);
    const auto miss = verify_snippet("hello", ctx, MatchPolicy::strict());
    CHECK_FALSE(miss.found);
    CHECK_FALSE(miss.char_span.has_value());
    CHECK(miss.occurrence_count == 0);
}

TEST_CASE("normalized matching tolerates reflowed whitespace and reports original spans") {
    const std::string ctx = "Alpha   beta\ngamma.  Delta.";
    CHECK_FALSE(find_verbatim("beta gamma.", ctx, MatchPolicy::strict()).found);
    const auto r = find_verbatim("beta gamma.", ctx, MatchPolicy::normalized());
    REQUIRE(r.found);
    CHECK(text::slice(ctx, *r.char_span) == "beta\ngamma.");
    // Decomposed e + combining acute in the context still matches the precomposed snippet.
    const auto nfc = find_verbatim("caf\xC3\xA9", "a cafe\xCC\x81 here", MatchPolicy::normalized());
    CHECK(nfc.found);
}

TEST_CASE("occurrences are counted with overlap and the first one is reported") {
    const auto r = find_verbatim("aa", "xaaay aa", MatchPolicy::strict());
    CHECK(r.found);
    CHECK(r.occurrence_count == 3);
    CHECK(r.char_span == CharSpan{1, 3});
}

TEST_CASE("the worked output verifies against its context") {
    const auto report = verify_quality_output(worked_output(), gift_wrap_context());
    CHECK(report.all_citations_verbatim);
    CHECK(report.per_citation.size() == 5);
    for (const auto& c : report.per_citation) CHECK(c.match.found);
    REQUIRE(report.statements_extractive.size() == 2);
    CHECK(report.statements_extractive[0].second);
    CHECK(report.statements_extractive[1].second);
    CHECK(report.warnings.empty());
}

TEST_CASE("a one-word mutation makes exactly that citation fail") {
    auto out = worked_output();
    out.statements[0].citations[1].snippet = "Customer: Is it possible to have my items gift boxed?";
    const auto report = verify_quality_output(out, gift_wrap_context());
    CHECK_FALSE(report.all_citations_verbatim);
    REQUIRE(report.per_citation.size() == 5);
    CHECK_FALSE(report.per_citation[1].match.found);
    CHECK(report.per_citation[1].statement == 0u);
    for (std::size_t i : {0u, 2u, 3u, 4u}) CHECK(report.per_citation[i].match.found);
}

TEST_CASE("empty statements verify vacuously and non-extractive statements only warn") {
    const QualityEvalOutput empty{YesNo::Yes, "No errors.", {}, {}};
    const auto r = verify_quality_output(empty, gift_wrap_context());
    CHECK(r.all_citations_verbatim);
    CHECK(r.per_citation.empty());
    CHECK(r.statements_extractive.empty());

    auto out = worked_output();
    out.statements[1].statement_string = "A sentence the feedback never says.";
    const auto w = verify_quality_output(out, gift_wrap_context());
    CHECK(w.all_citations_verbatim);
    CHECK_FALSE(w.statements_extractive[1].second);
    CHECK_FALSE(w.warnings.empty());
}

TEST_CASE("inline-with-snippet RAG output verifies; unknown ids throw; paraphrased claims fail") {
    const auto chunks = rag_chunks();
    const auto answer = rag_answer();
    const auto out = *parse_rag_output(testing::data("fixtures/rag/inline_snippet.json"),
                                       CitationMode::InlineWithSnippet).value;
    const auto ok = verify_rag_output(out, chunks, answer);
    CHECK(ok.all_citations_verbatim);
    CHECK(ok.claims_verbatim == true);
    REQUIRE(ok.per_citation.size() == 1);
    CHECK(ok.per_citation[0].context_id == std::string("1233"));

    auto unknown = out;
    unknown.citations[0].context_id = "9999";
    try {
        (void)verify_rag_output(unknown, chunks, answer);
        FAIL("expected UnknownContextId");
    } catch (const RecError& e) {
        CHECK(e.code() == ErrorCode::UnknownContextId);
    }

    auto paraphrase = out;
    paraphrase.citations[0].claim = "Photosynthesis turns CO2 and water into sugar.";
    const auto bad = verify_rag_output(paraphrase, chunks, answer);
    CHECK(bad.claims_verbatim == false);
    CHECK(bad.all_citations_verbatim);

    auto none = out;
    none.citations[0].context_id = "None";
    none.citations[0].snippet.reset();
    const auto skipped = verify_rag_output(none, chunks, answer);
    CHECK(skipped.all_citations_verbatim);
    CHECK(skipped.per_citation.empty());

    const auto postfix = *parse_rag_output(testing::data("fixtures/rag/postfix.json"), CitationMode::PostFix).value;
    const auto pf = verify_rag_output(postfix, chunks, answer);
    CHECK(pf.all_citations_verbatim);
    CHECK_FALSE(pf.claims_verbatim.has_value());
}

TEST_CASE("sentence segmentation") {
    const auto three = segment_sentences("A. B? C!");
    REQUIRE(three.size() == 3);
    CHECK(three[0].text == "A.");
    CHECK(three[1].text == "B?");
    CHECK(three[2].text == "C!");
    CHECK(three[2].span == CharSpan{6, 8});

    const auto dr = segment_sentences("Dr. Smith arrived.");
    REQUIRE(dr.size() == 2);
    CHECK(dr[0].text == "Dr.");
    CHECK(dr[1].text == "Smith arrived.");

    CHECK(segment_sentences("").empty());
    CHECK(segment_sentences("   \n ").empty());

    const auto lines = segment_sentences("Customer: hi\nAgent: hello there");
    REQUIRE(lines.size() == 2);
    CHECK(lines[1].text == "Agent: hello there");
    CHECK(segment_sentences("Price is 4.99 today.").size() == 1);
}

TEST_CASE("sentence snapping") {
    const std::string ctx = "First sentence here. Second one follows! Third is last.";
    CHECK(snap_to_sentences("one follows", ctx) == "Second one follows!");
    CHECK(snap_to_sentences("Second one follows!", ctx) == "Second one follows!");
    CHECK(snap_to_sentences("here. Second", ctx) == "First sentence here. Second one follows!");
    CHECK(snap_to_sentences("here.   Second", "First sentence here.   Second one follows!") ==
          "First sentence here.   Second one follows!");
    CHECK_THROWS_AS(snap_to_sentences("absent", ctx), RecError);
}

TEST_CASE("property: random substrings of random contexts verify with sound spans") {
    std::mt19937 rng(4242);
    for (int trial = 0; trial < 500; ++trial) {
        const std::string ctx = testing::random_text(rng, 1, 8);
        const std::u32string u = text::decode_utf8(ctx);
        std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
        std::size_t a = pick(rng), b = pick(rng);
        if (a > b) std::swap(a, b);
        const std::string needle = text::encode_utf8(u.substr(a, b - a + 1));

        const auto strict = find_verbatim(needle, ctx, MatchPolicy::strict());
        REQUIRE(strict.found);
        CHECK(text::slice(ctx, *strict.char_span) == needle);
        CHECK(strict.char_span->start <= a);

        if (text::normalize(std::string_view(needle)).empty()) continue;
        const auto norm = find_verbatim(needle, ctx, MatchPolicy::normalized());
        REQUIRE(norm.found);  // strict found implies normalized found
        CHECK(text::normalize(std::string_view(text::slice(ctx, *norm.char_span))) ==
              text::normalize(std::string_view(needle)));
    }
}

TEST_CASE("property: sentence spans partition the text and snapping is idempotent") {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        const std::string ctx = (rng() % 3 == 0 ? "  " : "") + testing::random_text(rng, 1, 7) +
                                (rng() % 3 == 0 ? " \n" : "");
        const std::u32string u = text::decode_utf8(ctx);
        const auto sentences = segment_sentences(ctx);
        std::size_t cursor = 0;
        for (const auto& s : sentences) {
            REQUIRE(s.span.start >= cursor);
            for (std::size_t i = cursor; i < s.span.start; ++i) CHECK(text::is_space(u[i]));
            CHECK(text::slice(u, s.span) == s.text);
            CHECK_FALSE(s.text.empty());
            cursor = s.span.end;
        }
        for (std::size_t i = cursor; i < u.size(); ++i) CHECK(text::is_space(u[i]));

        if (sentences.empty()) continue;
        const auto& s = sentences[rng() % sentences.size()];
        const std::u32string body = text::decode_utf8(s.text);
        const std::size_t len = 1 + rng() % body.size();
        const std::string fragment = text::encode_utf8(body.substr(0, len));
        if (text::normalize(std::string_view(fragment)).empty()) continue;
        const auto once = snap_to_sentences(fragment, ctx);
        CHECK(snap_to_sentences(once, ctx) == once);
        CHECK(text::normalize(std::string_view(once)).find(text::normalize(std::string_view(fragment))) != std::string::npos);
    }
}
