#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "json.hpp"

#include "tqa/promptgen.hpp"

#include "helpers.hpp"

using namespace tqa;

namespace {

std::string golden(const std::string& name) {
    return testutil::read_text(std::string(TQA_REPO_ROOT) + "/data/golden/" + name);
}

Question mc_question(std::string id, std::string stem,
                     std::vector<Option> options, std::string gold) {
    Question q;
    q.question_id = std::move(id);
    q.lesson_id = "L_0001";
    q.kind = options.size() == 2 && options[0].text == "true"
                 ? QuestionKind::TrueFalse
                 : QuestionKind::MultipleChoice;
    q.stem = std::move(stem);
    q.options = std::move(options);
    q.gold_label = std::move(gold);
    q.split = Split::Test;
    return q;
}

// One lesson with three topics of easily recognizable sizes.
Dataset context_corpus(std::size_t len1, std::size_t len2, std::size_t len3) {
    Lesson lesson;
    lesson.lesson_id = "L_0001";
    lesson.title = "lesson";
    lesson.split = Split::Test;
    std::vector<Topic> topics;
    const std::size_t lens[3] = {len1, len2, len3};
    for (int i = 0; i < 3; ++i) {
        Topic t;
        t.topic_id = "T_000" + std::to_string(i + 1);
        t.lesson_id = "L_0001";
        t.title = "topic";
        t.text = std::string(lens[i], static_cast<char>('a' + i));
        lesson.topic_ids.push_back(t.topic_id);
        topics.push_back(std::move(t));
    }
    std::vector<Question> questions;
    questions.push_back(mc_question("Q_0001", "what fills the budget?",
                                    {{"A", "padding"}, {"B", "text"}}, "A"));
    questions[0].lesson_id = "L_0001";
    return Dataset({lesson}, std::move(topics), std::move(questions));
}

RetrievedContext hits_for(std::vector<std::string> topic_ids) {
    RetrievedContext ctx;
    ctx.question_id = "Q_0001";
    std::size_t rank = 1;
    for (auto& id : topic_ids) {
        ctx.hits.push_back({id, "L_0001", 1.0 / static_cast<double>(rank), rank});
        ++rank;
    }
    return ctx;
}

std::size_t count_occurrences(const std::string& haystack,
                              const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

} // namespace

TEST_CASE("token estimate formula") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens(std::string(300, 'x')) == 100);
    CHECK(estimate_tokens(std::string(301, 'x')) == 101);
    CHECK(estimate_tokens(std::string(2, 'x')) == 1);
    CHECK(estimate_tokens(std::string(8, 'x'), 4) == 2);
    CHECK_THROWS_AS(estimate_tokens("x", 0), ConfigError);

    // subadditivity is what the context budget arithmetic leans on
    std::mt19937 rng(7);
    std::uniform_int_distribution<std::size_t> len(0, 50);
    for (int i = 0; i < 200; ++i) {
        std::string a(len(rng), 'a');
        std::string b(len(rng), 'b');
        CHECK(estimate_tokens(a + b) <= estimate_tokens(a) + estimate_tokens(b));
    }
}

TEST_CASE("context mode names") {
    for (auto mode : {ContextMode::NoContext, ContextMode::FullLesson,
                      ContextMode::RagOnly, ContextMode::RagPlusLesson}) {
        CHECK(context_mode_from_string(to_string(mode)) == mode);
    }
    CHECK(to_string(ContextMode::RagPlusLesson) == "rag_plus_lesson");
    CHECK_THROWS_AS(context_mode_from_string("rag"), ConfigError);
}

TEST_CASE("template matches the committed golden byte for byte") {
    std::string want = golden("prompt_template.txt");
    CHECK(prompt_template() == want);
    // exactly one slot each
    for (const char* slot : {"{context}", "{question}", "{options}", "{answer}"}) {
        CHECK(count_occurrences(want, slot) == 1);
    }
    CHECK(want.find(system_block()) != std::string::npos);
}

TEST_CASE("fixture prompts match their goldens") {
    SUBCASE("multiple choice with context") {
        Question q = mc_question(
            "NDQ_000201", "Gravity causes erosion by all of the following except",
            {{"A", "glaciers"},
             {"B", "moving air"},
             {"C", "flowing water"},
             {"D", "Mass movement"}},
            "B");
        std::string context =
            "Gravity pulls weathered material downhill. Glaciers, flowing "
            "water, and mass movement all shift rock and soil from high ground "
            "to low ground under the pull of gravity. Wind moves sediment "
            "without any help from gravity.";
        AssembledPrompt p = build_prompt(q, context);
        CHECK(p.text == golden("prompt_ndq000201.txt"));
        CHECK(p.context_chars == context.size());
        CHECK_FALSE(p.truncated);
        CHECK(render_options(q) ==
              "(A) glaciers (B) moving air (C) flowing water (D) Mass movement");
        CHECK(render_gold_answer(q) == "(B) moving air");
    }
    SUBCASE("true/false with empty context keeps the blank line") {
        Question q = mc_question("Q_TF", "Erosion only happens in deserts.",
                                 {{"A", "true"}, {"B", "false"}}, "B");
        AssembledPrompt p = build_prompt(q, "");
        CHECK(p.text == golden("prompt_tf_no_context.txt"));
        CHECK(p.text.find("Context:\n\nQuestion:") != std::string::npos);
        CHECK(p.context_chars == 0);
    }
    SUBCASE("training shape appends the gold option and closes with </s>") {
        Question q = mc_question(
            "Q_CORE", "Which layer of Earth is liquid?",
            {{"A", "inner core"}, {"B", "outer core"}, {"C", "crust"}}, "B");
        std::string context =
            "The outer core is the only fully liquid layer of Earth. It is "
            "made of molten iron and nickel.\n\nThe inner core stays solid "
            "because of the enormous pressure at the center of Earth.";
        AssembledPrompt p = build_prompt(q, context, std::string("B"));
        CHECK(p.text == golden("prompt_training_answer.txt"));
        CHECK(p.text.rfind("Answer:[/INST](B) outer core</s>") ==
              p.text.size() - std::string("Answer:[/INST](B) outer core</s>").size());
    }
}

TEST_CASE("build_prompt invariants") {
    Question q = mc_question("Q_X", "zephyr quill stem marker",
                             {{"A", "optalpha"}, {"B", "optbeta"}}, "A");
    AssembledPrompt p = build_prompt(q, "plain context");

    SUBCASE("stem and each option text appear exactly once") {
        CHECK(count_occurrences(p.text, "zephyr quill stem marker") == 1);
        CHECK(count_occurrences(p.text, "optalpha") == 1);
        CHECK(count_occurrences(p.text, "optbeta") == 1);
    }
    SUBCASE("rendering twice is byte-identical") {
        CHECK(build_prompt(q, "plain context").text == p.text);
    }
    SUBCASE("unknown gold label is rejected") {
        CHECK_THROWS_AS(build_prompt(q, "ctx", std::string("C")), UnknownIdError);
    }
    SUBCASE("est_tokens reflects the configured ratio") {
        TokenBudget four;
        four.chars_per_token = 4;
        AssembledPrompt p4 = build_prompt(q, "plain context", std::nullopt, four);
        CHECK(p4.est_tokens == estimate_tokens(p4.text, 4));
        CHECK(p.est_tokens == estimate_tokens(p.text, 3));
    }
}

TEST_CASE("assemble_context composes by mode") {
    Dataset ds = context_corpus(30, 20, 10);
    const Question& q = ds.questions()[0];
    std::string lesson = lesson_text(ds, "L_0001");
    TokenBudget roomy; // 4096 tokens: far more than these tiny texts need
    RetrievedContext two = hits_for({"T_0002", "T_0001"});

    SUBCASE("no context") {
        ContextResult r =
            assemble_context(ContextMode::NoContext, lesson, &two, ds, q, roomy);
        CHECK(r.context.empty());
        CHECK(r.chunks_used.empty());
        CHECK_FALSE(r.truncated);
    }
    SUBCASE("full lesson") {
        ContextResult r = assemble_context(ContextMode::FullLesson, lesson,
                                           nullptr, ds, q, roomy);
        CHECK(r.context == lesson);
        CHECK(r.chunks_used.empty());
        CHECK_FALSE(r.truncated);
    }
    SUBCASE("rag only, single hit, is exactly the topic text") {
        RetrievedContext one = hits_for({"T_0003"});
        ContextResult r =
            assemble_context(ContextMode::RagOnly, lesson, &one, ds, q, roomy);
        CHECK(r.context == ds.topic("T_0003").text);
        CHECK(r.chunks_used == std::vector<std::string>{"T_0003"});
    }
    SUBCASE("rag only preserves rank order") {
        ContextResult r =
            assemble_context(ContextMode::RagOnly, lesson, &two, ds, q, roomy);
        CHECK(r.context ==
              ds.topic("T_0002").text + "\n\n" + ds.topic("T_0001").text);
        CHECK(r.chunks_used == std::vector<std::string>{"T_0002", "T_0001"});
    }
    SUBCASE("rag plus lesson puts chunks first") {
        ContextResult r = assemble_context(ContextMode::RagPlusLesson, lesson,
                                           &two, ds, q, roomy);
        CHECK(r.context == ds.topic("T_0002").text + "\n\n" +
                               ds.topic("T_0001").text + "\n\n" + lesson);
        CHECK_FALSE(r.truncated);
    }
    SUBCASE("rag modes demand retrieval results") {
        CHECK_THROWS_AS(
            assemble_context(ContextMode::RagOnly, lesson, nullptr, ds, q, roomy),
            ConfigError);
        CHECK_THROWS_AS(assemble_context(ContextMode::RagPlusLesson, lesson,
                                         nullptr, ds, q, roomy),
                        ConfigError);
    }
    SUBCASE("budget validation") {
        TokenBudget bad;
        bad.reserved_for_answer = bad.max_tokens;
        CHECK_THROWS_AS(assemble_context(ContextMode::NoContext, lesson, nullptr,
                                         ds, q, bad),
                        ConfigError);
        bad = {};
        bad.chars_per_token = 0;
        CHECK_THROWS_AS(assemble_context(ContextMode::NoContext, lesson, nullptr,
                                         ds, q, bad),
                        ConfigError);
    }
}

TEST_CASE("truncation order: lesson tail, then chunks, then the top chunk") {
    Dataset ds = context_corpus(30, 20, 10);
    const Question& q = ds.questions()[0];
    std::string lesson = lesson_text(ds, "L_0001"); // 30+2+20+2+10 = 64 chars
    RetrievedContext two = hits_for({"T_0002", "T_0001"}); // 20 + 2 + 30 = 52

    // budget with exactly `spare` tokens (3*spare chars) left for context
    auto budget_with = [&](int spare) {
        TokenBudget b;
        int overhead = estimate_tokens(build_prompt(q, "").text);
        b.max_tokens = overhead + b.reserved_for_answer + spare;
        return b;
    };

    SUBCASE("everything fits at the exact boundary") {
        // chunks (52) + joiner (2) + lesson (64) = 118 chars = 40 tokens
        ContextResult r = assemble_context(ContextMode::RagPlusLesson, lesson,
                                           &two, ds, q, budget_with(40));
        CHECK_FALSE(r.truncated);
        CHECK(r.context.size() == 118);
    }
    SUBCASE("one char over: lesson tail goes first, chunks stay whole") {
        TokenBudget b = budget_with(39); // 117 chars available
        ContextResult r =
            assemble_context(ContextMode::RagPlusLesson, lesson, &two, ds, q, b);
        CHECK(r.truncated);
        CHECK(r.context.size() == 117);
        CHECK(r.chunks_used == std::vector<std::string>{"T_0002", "T_0001"});
        // both chunks intact, lesson cut from the tail
        std::string chunks_part =
            ds.topic("T_0002").text + "\n\n" + ds.topic("T_0001").text;
        CHECK(r.context.rfind(chunks_part, 0) == 0);
        CHECK(r.context.substr(chunks_part.size(), 2) == "\n\n");
    }
    SUBCASE("lesson dropped entirely once its slot vanishes") {
        // 18 tokens = 54 chars: chunks alone need 52, lesson would need 2 more
        ContextResult r = assemble_context(ContextMode::RagPlusLesson, lesson,
                                           &two, ds, q, budget_with(18));
        CHECK(r.truncated);
        CHECK(r.context ==
              ds.topic("T_0002").text + "\n\n" + ds.topic("T_0001").text);
    }
    SUBCASE("lowest-ranked chunk dropped next") {
        // 10 tokens = 30 chars: rank-1 chunk (20 chars) fits, rank-2 does not
        ContextResult r = assemble_context(ContextMode::RagPlusLesson, lesson,
                                           &two, ds, q, budget_with(10));
        CHECK(r.truncated);
        CHECK(r.context == ds.topic("T_0002").text);
        CHECK(r.chunks_used == std::vector<std::string>{"T_0002"});
    }
    SUBCASE("top chunk tail-truncated as the last resort") {
        // 4 tokens = 12 chars: even the rank-1 chunk must lose its tail
        ContextResult r = assemble_context(ContextMode::RagPlusLesson, lesson,
                                           &two, ds, q, budget_with(4));
        CHECK(r.truncated);
        CHECK(r.context == ds.topic("T_0002").text.substr(0, 12));
        CHECK(r.chunks_used == std::vector<std::string>{"T_0002"});
    }
    SUBCASE("zero slack leaves an empty context") {
        ContextResult r = assemble_context(ContextMode::RagPlusLesson, lesson,
                                           &two, ds, q, budget_with(0));
        CHECK(r.truncated);
        CHECK(r.context.empty());
        CHECK(r.chunks_used.empty());
    }
    SUBCASE("full lesson mode truncates its own tail") {
        ContextResult r = assemble_context(ContextMode::FullLesson, lesson,
                                           nullptr, ds, q, budget_with(7));
        CHECK(r.truncated);
        CHECK(r.context == lesson.substr(0, 21));
    }
    SUBCASE("budget too small for the question itself") {
        TokenBudget b;
        b.max_tokens = 10;
        b.reserved_for_answer = 5;
        CHECK_THROWS_AS(assemble_context(ContextMode::NoContext, lesson, nullptr,
                                         ds, q, b),
                        BudgetUnsatisfiable);
    }
}

TEST_CASE("assembled prompts never exceed the budget") {
    std::mt19937 rng(20240818);
    std::uniform_int_distribution<std::size_t> topic_len(1, 400);
    std::uniform_int_distribution<int> spare_tokens(0, 120);
    std::uniform_int_distribution<int> mode_pick(0, 3);

    for (int trial = 0; trial < 200; ++trial) {
        Dataset ds =
            context_corpus(topic_len(rng), topic_len(rng), topic_len(rng));
        const Question& q = ds.questions()[0];
        std::string lesson = lesson_text(ds, "L_0001");
        RetrievedContext hits = hits_for({"T_0001", "T_0003", "T_0002"});

        TokenBudget budget;
        int overhead = estimate_tokens(build_prompt(q, "").text);
        budget.max_tokens =
            overhead + budget.reserved_for_answer + spare_tokens(rng);

        auto mode = static_cast<ContextMode>(mode_pick(rng));
        ContextResult r =
            assemble_context(mode, lesson, &hits, ds, q, budget);
        AssembledPrompt p = build_prompt(q, r, std::nullopt, budget);
        CHECK(p.est_tokens <= budget.max_tokens - budget.reserved_for_answer);
        // truncation flag means the context really is smaller than asked
        if (r.truncated) {
            std::string full;
            if (mode == ContextMode::FullLesson) full = lesson;
            if (mode == ContextMode::RagOnly || mode == ContextMode::RagPlusLesson) {
                full = ds.topic("T_0001").text + "\n\n" + ds.topic("T_0003").text +
                       "\n\n" + ds.topic("T_0002").text;
                if (mode == ContextMode::RagPlusLesson) full += "\n\n" + lesson;
            }
            CHECK(r.context.size() < full.size());
        }
    }
}

TEST_CASE("training export line") {
    Question q = mc_question("Q_T", "pick one",
                             {{"A", "first"}, {"B", "second"}}, "B");
    ContextResult ctx;
    ctx.context = "some context";
    std::string line = training_line(q, ctx);
    REQUIRE(!line.empty());
    CHECK(line.back() == '\n');
    auto doc = nlohmann::json::parse(line);
    CHECK(doc["prompt"] == build_prompt(q, ctx).text);
    CHECK(doc["answer"] == "(B) second");
}
