#include <doctest.h>

#include <random>
#include <regex>
#include <set>

#include "rec/errors.hpp"
#include "rec/prompt_builder.hpp"
#include "support.hpp"

using namespace rec;

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
    return s;
}

std::vector<ContextDocument> reference_chunks() {
    return {{"1233",
             "Photosynthesis is the process by which green plants and some other organisms utilize sunlight to "
             "synthesize their food. This remarkable process involves the conversion of carbon dioxide and water "
             "into glucose and oxygen, facilitated by chlorophyll. It serves as the foundation for energy production "
             "in these organisms and plays a crucial role in maintaining the balance of oxygen in our atmosphere.",
             SourceKind::RetrievedChunk},
            {"1422", "Cellular respiration refers to a series of metabolic reactions.", SourceKind::RetrievedChunk},
            {"4431", "DNA replication is the mechanism by which a cell duplicates its DNA.", SourceKind::RetrievedChunk}};
}

const std::string kAnswer =
    "Photosynthesis is a process that converts carbon dioxide and water into glucose and oxygen using sunlight and "
    "chlorophyll. This process occurs in green plants and certain other organisms.";

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

TEST_CASE("quality prompt reproduces the published template modulo layout whitespace") {
    const std::string task_prompt =
        "Summarize knowledge from transcripts after they've ended. Summarizing the key points of the conversation "
        "including customer issue and resolution.";
    const std::string convo = "Customer: Is it possible to have my items gift wrapped?\nAgent: Yes.";
    const std::string generation = "The customer asked about gift wrapping.";
    const auto& metric = catalog_metric(MetricName::Completeness);

    const auto prompt = build_quality_prompt(metric, task_prompt, generation, convo);
    std::string expected = testing::data("golden/quality_prompt_reference.txt");
    expected = replace_all(expected, "{metric_name}", std::string(display_name(metric.name)));
    expected = replace_all(expected, "{metric_scale}", metric.scale);
    expected = replace_all(expected, "{metric_description}", metric.description);
    expected = replace_all(expected, "{convo}", convo);
    expected = replace_all(expected, "{answer}", generation);
    CHECK(testing::squash(prompt.text) == testing::squash(expected));
    CHECK(prompt.template_id == TemplateId::QualityEval);
    CHECK(prompt.text.find("Evaluation criteria:") != std::string::npos);
    CHECK(prompt.text.find(convo) != std::string::npos);
    CHECK(ends_with(prompt.text, "### Response(JSON only):"));
    CHECK(prompt.slots_filled.at("generation") == generation);
}

TEST_CASE("quality prompt carries the chosen metric description and rejects empty inputs") {
    const auto& f = catalog_metric(MetricName::Faithfulness);
    const auto prompt = build_quality_prompt(f, "Summarize.", "Summary.");
    CHECK(prompt.text.find(f.description) != std::string::npos);
    CHECK(prompt.text.find("### Conversation:") == std::string::npos);
    CHECK_THROWS_AS(build_quality_prompt(f, "Summarize.", ""), RecError);
    CHECK_THROWS_AS(build_quality_prompt(f, "", "Summary."), RecError);
    try {
        (void)build_quality_prompt(f, "Summarize.", "");
    } catch (const RecError& e) {
        CHECK(e.code() == ErrorCode::EmptyRequired);
    }
}

TEST_CASE("inline RAG prompt reproduces the published prompt modulo layout whitespace") {
    const auto chunks = reference_chunks();
    const auto prompt = build_rag_cite_prompt(chunks, kAnswer, CitationMode::Inline);
    std::string expected = testing::data("golden/rag_inline_prompt_reference.txt");
    expected = replace_all(expected, "{retrieved_chunks}", render_chunks(chunks));
    expected = replace_all(expected, "{answer}", kAnswer);
    CHECK(testing::squash(prompt.text) == testing::squash(expected));
    CHECK(ends_with(prompt.text, "Response (JSON only):"));
}

TEST_CASE("RAG prompt lists chunks in input order and adapts to the mode") {
    const auto chunks = reference_chunks();
    const auto inline_prompt = build_rag_cite_prompt(chunks, kAnswer, CitationMode::Inline);
    const auto a = inline_prompt.text.find("ID 1233\n");
    const auto b = inline_prompt.text.find("ID 1422\n");
    const auto c = inline_prompt.text.find("ID 4431\n");
    REQUIRE(a != std::string::npos);
    CHECK(a < b);
    CHECK(b < c);

    const auto postfix = build_rag_cite_prompt(chunks, kAnswer, CitationMode::PostFix);
    CHECK(postfix.text.find("extract a set of claims") == std::string::npos);
    CHECK(postfix.text.find("\"claim\"") == std::string::npos);
    CHECK(postfix.text.find("\"snippet\"") == std::string::npos);

    const auto snippet = build_rag_cite_prompt(chunks, kAnswer, CitationMode::PostFixWithSnippet);
    CHECK(snippet.text.find("\"snippet\"") != std::string::npos);
    CHECK(snippet.text.find("\"claim\"") == std::string::npos);

    const auto both = build_rag_cite_prompt(chunks, kAnswer, CitationMode::InlineWithSnippet);
    CHECK(both.text.find("\"snippet\"") != std::string::npos);
    CHECK(both.text.find("\"claim\"") != std::string::npos);
    CHECK(both.text.find("VERBATIM") != std::string::npos);
}

TEST_CASE("RAG prompt preconditions") {
    auto chunks = reference_chunks();
    chunks.push_back({"1233", "duplicate", SourceKind::RetrievedChunk});
    try {
        (void)build_rag_cite_prompt(chunks, kAnswer, CitationMode::Inline);
        FAIL("expected DuplicateContextId");
    } catch (const RecError& e) {
        CHECK(e.code() == ErrorCode::DuplicateContextId);
    }
    CHECK_THROWS_AS(build_rag_cite_prompt(reference_chunks(), "", CitationMode::Inline), RecError);
    CHECK_THROWS_AS(build_rag_cite_prompt({}, kAnswer, CitationMode::Inline), RecError);
    CHECK_THROWS_AS(build_rag_cite_prompt({{std::nullopt, "x", SourceKind::RetrievedChunk}}, kAnswer,
                                          CitationMode::Inline),
                    RecError);
}

TEST_CASE("pointwise prompt matches the published faithfulness prompt") {
    const auto& f = catalog_metric(MetricName::Faithfulness);
    const auto prompt = build_pointwise_prompt(f, "Source {with braces}", "Answer text");
    std::string expected = testing::data("golden/pointwise_faithfulness_reference.txt");
    expected = replace_all(expected, "{query_with_context}", "Source {with braces}");
    expected = replace_all(expected, "{answer}", "Answer text");
    CHECK(testing::squash(prompt.text) == testing::squash(expected));
    CHECK(ends_with(prompt.text, "### Response(JSON Only):"));
    CHECK(prompt.text == build_pointwise_prompt(f, "Source {with braces}", "Answer text").text);
    CHECK_THROWS_AS(build_pointwise_prompt(f, "Source", ""), RecError);
}

TEST_CASE("grounding prompt") {
    const auto prompt = build_grounding_prompt("Line one.\nLine two.", "A claim.");
    std::string expected = testing::data("golden/grounding_reference.txt");
    expected = replace_all(expected, "{doc}", "Line one.\nLine two.");
    expected = replace_all(expected, "{claim}", "A claim.");
    CHECK(testing::squash(prompt.text) == testing::squash(expected));
    CHECK(prompt.text.find("Document: Line one.\nLine two.") != std::string::npos);
    CHECK(prompt.text.find("Claim: A claim.") != std::string::npos);
    CHECK(ends_with(prompt.text, "Answer (yes|no only):"));
    CHECK_THROWS_AS(build_grounding_prompt("doc", ""), RecError);
}

TEST_CASE("pairwise prompt labels both outputs and is symmetric under swapping") {
    const auto ab = build_pairwise_prompt("Write a haiku.", "FIRST RESPONSE", "SECOND RESPONSE");
    const auto ba = build_pairwise_prompt("Write a haiku.", "SECOND RESPONSE", "FIRST RESPONSE");
    CHECK(ab.text.find("# Output (a):\nFIRST RESPONSE") != std::string::npos);
    CHECK(ab.text.find("# Output (b):\nSECOND RESPONSE") != std::string::npos);
    CHECK(ba.text.find("# Output (a):\nSECOND RESPONSE") != std::string::npos);
    CHECK(replace_all(replace_all(replace_all(ab.text, "FIRST", "@"), "SECOND", "FIRST"), "@", "SECOND") == ba.text);
    CHECK(ab.text.find("order") != std::string::npos);
    CHECK(ends_with(ab.text, response_cue(TemplateId::PairwiseJudge)));
    CHECK(ab.text.find("#:") == std::string::npos);
    CHECK_THROWS_AS(build_pairwise_prompt("q", "", "b"), RecError);
}

TEST_CASE("every prompt ends with its response cue and leaves no slot unfilled") {
    const std::regex slot(R"(\{[A-Za-z_][A-Za-z0-9_]*\})");
    const auto& m = catalog_metric(MetricName::Coherence);
    const std::vector<PromptText> prompts{build_quality_prompt(m, "task", "gen"),
                                          build_rag_cite_prompt(reference_chunks(), kAnswer, CitationMode::PostFix),
                                          build_pointwise_prompt(m, "src", "ans"),
                                          build_grounding_prompt("doc", "claim"),
                                          build_pairwise_prompt("q", "a", "b")};
    for (const auto& p : prompts) {
        CHECK(ends_with(p.text, response_cue(p.template_id)));
        CHECK_FALSE(std::regex_search(p.text, slot));
    }
}

TEST_CASE("slot values are inserted literally and never rescanned") {
    CHECK(fill_template("a {x} b", {{"x", "{y}"}, {"y", "no"}}) == "a {y} b");
    CHECK(fill_template("{x}{x}", {{"x", "1"}}) == "11");
    CHECK(fill_template("json { \"k\": 1 }", {}) == "json { \"k\": 1 }");
    try {
        (void)fill_template("{missing}", {});
        FAIL("expected MissingSlot");
    } catch (const RecError& e) {
        CHECK(e.code() == ErrorCode::MissingSlot);
    }
}

TEST_CASE("template metadata lines are stripped") {
    CHECK(strip_template_metadata("#: note\n#: more\nBody {x}\n") == "Body {x}");
    CHECK(strip_template_metadata("Body\n#: not leading\n") == "Body\n#: not leading");
}

TEST_CASE("a template directory overrides individual built-in templates") {
    testing::TempDir dir;
    testing::spit(dir / "grounding.txt", "#: custom\nCHECK {doc} AGAINST {claim}\nAnswer (yes|no only):\n");
    const auto set = TemplateSet::from_directory(dir.path());
    const PromptBuilder builder(set);
    CHECK(builder.grounding("D", "C").text == "CHECK D AGAINST C\nAnswer (yes|no only):");
    const auto& m = catalog_metric(MetricName::Faithfulness);
    CHECK(builder.pointwise(m, "s", "a").text == build_pointwise_prompt(m, "s", "a").text);
    CHECK_THROWS_AS(TemplateSet::from_directory(dir / "does-not-exist"), RecError);
}

TEST_CASE("property: distinct chunk lists render distinct chunk sections") {
    std::mt19937 rng(7);
    std::set<std::string> seen;
    std::set<std::string> rendered;
    for (int i = 0; i < 300; ++i) {
        std::vector<ContextDocument> chunks;
        const int n = 1 + static_cast<int>(rng() % 3);
        std::string key;
        for (int k = 0; k < n; ++k) {
            ContextDocument d{std::to_string(rng() % 5), testing::random_text(rng, 1, 2), SourceKind::RetrievedChunk};
            key += *d.context_id + '\x1f' + d.body + '\x1e';
            chunks.push_back(std::move(d));
        }
        if (!seen.insert(key).second) continue;
        CHECK(rendered.insert(render_chunks(chunks)).second);
    }
}
