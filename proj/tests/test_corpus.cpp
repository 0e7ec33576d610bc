#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "tqa/corpus.hpp"

#include "helpers.hpp"

using namespace tqa;

namespace {

Dataset tiny_dataset() {
    std::vector<Lesson> lessons{
        {"L_0001", "erosion", {"T_0001", "T_0002"}, Split::Train},
        {"L_0002", "weather", {"T_0003"}, Split::Test},
    };
    std::vector<Topic> topics{
        {"T_0001", "L_0001", "gravity", "Gravity pulls material downhill.", false},
        {"T_0002", "L_0001", "glaciers", "Glaciers carve valleys.", true},
        {"T_0003", "L_0002", "clouds", "Clouds form from vapor.", false},
    };
    std::vector<Question> questions{
        {"Q_0001",
         "L_0001",
         QuestionKind::MultipleChoice,
         "What pulls material downhill?",
         {{"A", "gravity"}, {"B", "wind"}, {"C", "sunlight"}},
         "A",
         Split::Train},
        {"Q_0002",
         "L_0001",
         QuestionKind::TrueFalse,
         "Glaciers carve valleys.",
         {{"A", "true"}, {"B", "false"}},
         "A",
         Split::Train},
        {"Q_0003",
         "L_0002",
         QuestionKind::MultipleChoice,
         "Clouds form from what?",
         {{"A", "vapor"}, {"B", "rock"}},
         "A",
         Split::Test},
    };
    return Dataset(std::move(lessons), std::move(topics), std::move(questions));
}

} // namespace

TEST_CASE("dataset accessors and gold text") {
    Dataset ds = tiny_dataset();
    CHECK(ds.lessons().size() == 2);
    CHECK(ds.topics().size() == 3);
    CHECK(ds.questions().size() == 3);
    CHECK(ds.lesson("L_0001").title == "erosion");
    CHECK(ds.topic("T_0002").adjunct);
    CHECK(ds.question("Q_0001").gold_text() == "gravity");
    CHECK(ds.find_lesson("L_9999") == nullptr);
    CHECK_THROWS_AS(ds.lesson("L_9999"), UnknownLessonError);
    CHECK_THROWS_AS(ds.topic("T_9999"), UnknownIdError);
    CHECK_THROWS_AS(ds.question("Q_9999"), UnknownIdError);
}

TEST_CASE("construction rejects duplicate ids") {
    std::vector<Lesson> lessons{{"L_0001", "a", {"T_0001"}, Split::Train},
                                {"L_0001", "b", {"T_0001"}, Split::Train}};
    std::vector<Topic> topics{{"T_0001", "L_0001", "t", "text", false}};
    CHECK_THROWS_AS(Dataset(std::move(lessons), std::move(topics), {}),
                    DuplicateIdError);
}

TEST_CASE("construction rejects dangling references") {
    SUBCASE("topic to missing lesson") {
        std::vector<Lesson> lessons{{"L_0001", "a", {"T_0001"}, Split::Train}};
        std::vector<Topic> topics{{"T_0001", "L_0001", "t", "text", false},
                                  {"T_0002", "L_0404", "t", "text", false}};
        CHECK_THROWS_AS(Dataset(std::move(lessons), std::move(topics), {}),
                        ReferentialError);
    }
    SUBCASE("lesson to missing topic") {
        std::vector<Lesson> lessons{{"L_0001", "a", {"T_0404"}, Split::Train}};
        std::vector<Topic> topics{{"T_0001", "L_0001", "t", "text", false}};
        CHECK_THROWS_AS(Dataset(std::move(lessons), std::move(topics), {}),
                        ReferentialError);
    }
    SUBCASE("question to missing lesson") {
        std::vector<Lesson> lessons{{"L_0001", "a", {"T_0001"}, Split::Train}};
        std::vector<Topic> topics{{"T_0001", "L_0001", "t", "text", false}};
        std::vector<Question> qs{{"Q_0001",
                                  "L_0404",
                                  QuestionKind::TrueFalse,
                                  "s",
                                  {{"A", "true"}, {"B", "false"}},
                                  "A",
                                  Split::Train}};
        CHECK_THROWS_AS(Dataset(std::move(lessons), std::move(topics), std::move(qs)),
                        ReferentialError);
    }
    SUBCASE("topic owned by another lesson") {
        std::vector<Lesson> lessons{{"L_0001", "a", {"T_0001"}, Split::Train},
                                    {"L_0002", "b", {"T_0001"}, Split::Train}};
        std::vector<Topic> topics{{"T_0001", "L_0001", "t", "text", false}};
        CHECK_THROWS_AS(Dataset(std::move(lessons), std::move(topics), {}),
                        ReferentialError);
    }
}

TEST_CASE("construction rejects malformed questions") {
    std::vector<Lesson> lessons{{"L_0001", "a", {"T_0001"}, Split::Train}};
    std::vector<Topic> topics{{"T_0001", "L_0001", "t", "text", false}};
    Question q{"Q_0001",
               "L_0001",
               QuestionKind::MultipleChoice,
               "s",
               {{"A", "x"}, {"B", "y"}},
               "A",
               Split::Train};

    SUBCASE("true/false with three options") {
        q.kind = QuestionKind::TrueFalse;
        q.options.push_back({"C", "z"});
        CHECK_THROWS_AS(Dataset(lessons, topics, {q}), ParseError);
    }
    SUBCASE("gold label not among options") {
        q.gold_label = "C";
        CHECK_THROWS_AS(Dataset(lessons, topics, {q}), ParseError);
    }
    SUBCASE("labels not consecutive from A") {
        q.options = {{"A", "x"}, {"C", "y"}};
        CHECK_THROWS_AS(Dataset(lessons, topics, {q}), ParseError);
    }
    SUBCASE("label beyond H") {
        q.options = {{"A", "x"}, {"Z", "y"}};
        CHECK_THROWS_AS(Dataset(lessons, topics, {q}), ParseError);
    }
    SUBCASE("single option") {
        q.options = {{"A", "x"}};
        CHECK_THROWS_AS(Dataset(lessons, topics, {q}), ParseError);
    }
    SUBCASE("nine options") {
        q.options.clear();
        for (char c = 'A'; c <= 'I'; ++c) {
            q.options.push_back({std::string(1, c), "x"});
        }
        CHECK_THROWS_AS(Dataset(lessons, topics, {q}), ParseError);
    }
    SUBCASE("empty topic text") {
        topics[0].text = "  \n ";
        CHECK_THROWS_AS(Dataset(lessons, topics, {q}), ParseError);
    }
}

TEST_CASE("filter_questions selects split and kinds, sorted by id") {
    Dataset ds = tiny_dataset();
    auto both = filter_questions(
        ds, Split::Train, {QuestionKind::TrueFalse, QuestionKind::MultipleChoice});
    REQUIRE(both.size() == 2);
    CHECK(both[0].question_id == "Q_0001");
    CHECK(both[1].question_id == "Q_0002");

    auto tf_only = filter_questions(ds, Split::Train, {QuestionKind::TrueFalse});
    REQUIRE(tf_only.size() == 1);
    CHECK(tf_only[0].question_id == "Q_0002");

    CHECK(filter_questions(ds, Split::Validation,
                           {QuestionKind::TrueFalse, QuestionKind::MultipleChoice})
              .empty());
}

TEST_CASE("lesson_text joins topics with one blank line in textbook order") {
    Dataset ds = tiny_dataset();
    CHECK(lesson_text(ds, "L_0001") ==
          "Gravity pulls material downhill.\n\nGlaciers carve valleys.");
    CHECK(lesson_text(ds, "L_0002") == "Clouds form from vapor.");
    CHECK_THROWS_AS(lesson_text(ds, "L_9999"), UnknownLessonError);
}

TEST_CASE("compute_stats and validation reporting") {
    Dataset ds = tiny_dataset();
    SplitStats stats = compute_stats(ds);
    CHECK(stats.lesson_count == 2);
    CHECK(stats.topic_count == 3);
    CHECK(stats.for_split(Split::Train).true_false == 1);
    CHECK(stats.for_split(Split::Train).multiple_choice == 1);
    CHECK(stats.for_split(Split::Test).multiple_choice == 1);
    CHECK(stats.for_split(Split::Validation).total() == 0);

    SUBCASE("no expectation means no comparison") {
        ValidationReport report = validate_dataset(ds);
        CHECK_FALSE(report.compared);
        CHECK(report.all_match());
    }
    SUBCASE("matching expectation") {
        ValidationReport report = validate_dataset(ds, stats);
        CHECK(report.compared);
        CHECK(report.all_match());
    }
    SUBCASE("each differing field is reported") {
        SplitStats wrong = stats;
        wrong.lesson_count = 9;
        wrong.for_split(Split::Train).true_false = 7;
        ValidationReport report = validate_dataset(ds, wrong);
        REQUIRE(report.mismatches.size() == 2);
        CHECK(report.mismatches[0] == "lesson_count: expected 9, got 2");
        CHECK(report.mismatches[1] == "train.true_false: expected 7, got 1");
    }
    SUBCASE("unspecified fields are skipped") {
        SplitStats loose = stats;
        loose.topic_count = kUnspecifiedCount;
        ValidationReport report = validate_dataset(ds, loose);
        CHECK(report.all_match());
    }
}

TEST_CASE("reference stats match the published split sizes") {
    SplitStats ref = ck12_reference_stats();
    CHECK(ref.for_split(Split::Train).total() == 8653);
    CHECK(ref.for_split(Split::Train).true_false == 3490);
    CHECK(ref.for_split(Split::Train).multiple_choice == 5163);
    CHECK(ref.for_split(Split::Validation).total() == 2528);
    CHECK(ref.for_split(Split::Validation).true_false == 998);
    CHECK(ref.for_split(Split::Validation).multiple_choice == 1530);
    CHECK(ref.for_split(Split::Test).total() == 2512);
    CHECK(ref.for_split(Split::Test).true_false == 912);
    CHECK(ref.for_split(Split::Test).multiple_choice == 1600);
    CHECK(ref.lesson_count == 1076);
    CHECK(ref.topic_count == kUnspecifiedCount);
}

TEST_CASE("normalized save and load round trip, byte deterministic") {
    Dataset ds = tiny_dataset();
    testutil::TempDir tmp;
    auto written = save_normalized(ds, tmp / "norm");
    REQUIRE(written.size() == 2); // train + test, validation is empty

    Dataset back = load_dataset(tmp / "norm", CorpusFormat::Normalized);
    REQUIRE(back.lessons().size() == ds.lessons().size());
    REQUIRE(back.topics().size() == ds.topics().size());
    REQUIRE(back.questions().size() == ds.questions().size());
    for (const Question& q : ds.questions()) {
        const Question& r = back.question(q.question_id);
        CHECK(r.lesson_id == q.lesson_id);
        CHECK(r.kind == q.kind);
        CHECK(r.stem == q.stem);
        CHECK(r.gold_label == q.gold_label);
        CHECK(r.split == q.split);
        REQUIRE(r.options.size() == q.options.size());
        for (std::size_t i = 0; i < q.options.size(); ++i) {
            CHECK(r.options[i].label == q.options[i].label);
            CHECK(r.options[i].text == q.options[i].text);
        }
    }
    CHECK(back.topic("T_0002").adjunct);
    CHECK(back.lesson("L_0001").topic_ids ==
          std::vector<std::string>{"T_0001", "T_0002"});
    CHECK_FALSE(back.source_hash().empty());

    // Second write from the reloaded dataset reproduces identical bytes.
    save_normalized(back, tmp / "norm2");
    for (const auto& file : written) {
        auto other = (tmp / "norm2") / file.filename().string();
        CHECK(testutil::read_text(file) == testutil::read_text(other));
    }

    // Same bytes, same hash; different bytes, different hash.
    Dataset again = load_dataset(tmp / "norm", CorpusFormat::Normalized);
    CHECK(again.source_hash() == back.source_hash());
}

TEST_CASE("normalized loader reports file and field on malformed input") {
    testutil::TempDir tmp;
    SUBCASE("invalid json") {
        testutil::write_text(tmp / "bad.json", "{not json");
        CHECK_THROWS_AS(load_dataset(tmp / "bad.json", CorpusFormat::Normalized),
                        ParseError);
    }
    SUBCASE("missing required field") {
        testutil::write_text(tmp / "bad.json",
                             R"({"lessons":[{"title":"no id"}]})");
        try {
            load_dataset(tmp / "bad.json", CorpusFormat::Normalized);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            std::string msg = e.what();
            CHECK(msg.find("bad.json") != std::string::npos);
            CHECK(msg.find("lesson_id") != std::string::npos);
        }
    }
    SUBCASE("empty directory") {
        std::filesystem::create_directories(tmp / "empty");
        CHECK_THROWS_AS(load_dataset(tmp / "empty", CorpusFormat::Normalized),
                        ParseError);
    }
}

namespace {

// A two-lesson fixture in the release layout: keyed topic/question maps,
// adjunct blocks, and a diagram section that must be dropped.
const char* kNativeTrain = R"JSON([
  {
    "globalID": "L_0001",
    "lessonName": "erosion by gravity",
    "topics": {
      "k1": {
        "globalID": "T_0001",
        "topicName": "gravity",
        "content": {"text": "Gravity pulls material downhill."}
      },
      "k2": {
        "globalID": "T_0002",
        "topicName": "mass movement",
        "content": {"text": "Mass movement happens fast or slow."}
      }
    },
    "adjunctTopics": {
      "Lesson Objectives": {"content": {"text": "Describe gravity erosion."}},
      "Vocabulary": {"content": {"landslide": "a sudden mass movement",
                                  "slump": ""}},
      "Empty Block": {"content": {"text": "   "}}
    },
    "questions": {
      "nonDiagramQuestions": {
        "NDQ_000001": {
          "questionSubType": "multipleChoice",
          "beingAsked": {"processedText": "What pulls sediment downhill?"},
          "answerChoices": {
            "b": {"processedText": "wind"},
            "a": {"processedText": "gravity"},
            "c": {"processedText": "sunlight"}
          },
          "correctAnswer": {"processedText": "a"}
        },
        "NDQ_000002": {
          "questionSubType": "trueOrFalse",
          "beingAsked": {"processedText": "Mass movement can be slow."},
          "answerChoices": {
            "a": {"processedText": "true"},
            "b": {"processedText": "false"}
          },
          "correctAnswer": {"processedText": "true"}
        }
      },
      "diagramQuestions": {
        "DQ_000001": {"beingAsked": {"processedText": "ignored"}},
        "DQ_000002": {"beingAsked": {"processedText": "ignored"}}
      }
    }
  },
  {
    "globalID": "L_0002",
    "lessonName": "weathering",
    "topics": {
      "k1": {
        "globalID": "T_0003",
        "topicName": "ice wedging",
        "content": {"text": "Water expands when it freezes."}
      }
    },
    "questions": {
      "nonDiagramQuestions": {
        "NDQ_000003": {
          "questionSubType": "multipleChoice",
          "beingAsked": {"processedText": "Ice wedging is driven by?"},
          "answerChoices": {
            "a": {"processedText": "freezing water"},
            "b": {"processedText": "wind"}
          },
          "correctAnswer": {"rawText": "(a) freezing water"}
        }
      }
    }
  }
])JSON";

} // namespace

TEST_CASE("native release layout converts to the internal model") {
    testutil::TempDir tmp;
    testutil::write_text(tmp / "tqa_v1_train.json", kNativeTrain);
    Dataset ds = load_dataset(tmp.path(), CorpusFormat::NativeCK12);

    CHECK(ds.lessons().size() == 2);
    CHECK(ds.questions().size() == 3);
    CHECK(ds.load_summary().diagram_questions_dropped == 2);
    CHECK(ds.load_summary().adjunct_topics == 2); // empty block skipped

    const Lesson& l1 = ds.lesson("L_0001");
    CHECK(l1.split == Split::Train);
    REQUIRE(l1.topic_ids.size() == 4);
    CHECK(l1.topic_ids[0] == "T_0001");
    CHECK(l1.topic_ids[1] == "T_0002");
    CHECK_FALSE(ds.topic("T_0001").adjunct);
    CHECK(ds.topic(l1.topic_ids[2]).adjunct);
    CHECK(ds.topic(l1.topic_ids[2]).title == "Lesson Objectives");
    CHECK(ds.topic(l1.topic_ids[3]).text == "landslide: a sudden mass movement\nslump");

    const Question& q1 = ds.question("NDQ_000001");
    CHECK(q1.kind == QuestionKind::MultipleChoice);
    REQUIRE(q1.options.size() == 3);
    CHECK(q1.options[0].label == "A"); // keys arrive unordered, labels sorted
    CHECK(q1.options[0].text == "gravity");
    CHECK(q1.gold_label == "A");

    const Question& q2 = ds.question("NDQ_000002");
    CHECK(q2.kind == QuestionKind::TrueFalse);
    CHECK(q2.gold_label == "A"); // resolved by matching option text "true"

    CHECK(ds.question("NDQ_000003").gold_label == "A"); // from "(a) ..." rawText
}

TEST_CASE("native loader maps file names to splits") {
    testutil::TempDir tmp;
    const char* one_lesson = R"JSON([{
      "globalID": "L_0001", "lessonName": "x",
      "topics": {"k": {"globalID": "T_0001", "topicName": "t",
                        "content": {"text": "body"}}},
      "questions": {"nonDiagramQuestions": {}}
    }])JSON";
    testutil::write_text(tmp / "rel" / "val" / "tqa_v1_val.json", one_lesson);
    Dataset ds = load_dataset(tmp / "rel", CorpusFormat::NativeCK12);
    CHECK(ds.lesson("L_0001").split == Split::Validation);
}

TEST_CASE("stats manifest round trip") {
    Dataset ds = tiny_dataset();
    SplitStats stats = compute_stats(ds);
    testutil::TempDir tmp;
    write_stats_manifest(stats, tmp / "manifest.json");
    SplitStats back = stats_from_manifest(tmp / "manifest.json");
    CHECK(back.lesson_count == stats.lesson_count);
    CHECK(back.topic_count == stats.topic_count);
    for (Split s : {Split::Train, Split::Validation, Split::Test}) {
        CHECK(back.for_split(s).true_false == stats.for_split(s).true_false);
        CHECK(back.for_split(s).multiple_choice ==
              stats.for_split(s).multiple_choice);
    }
    ValidationReport report = validate_dataset(ds, back);
    CHECK(report.all_match());
}

TEST_CASE("render helpers mention counts and mismatches") {
    Dataset ds = tiny_dataset();
    std::string text = render_stats(compute_stats(ds));
    CHECK(text.find("train") != std::string::npos);
    CHECK(text.find("lessons: 2") != std::string::npos);

    SplitStats wrong = compute_stats(ds);
    wrong.lesson_count = 5;
    std::string rendered = render_validation(validate_dataset(ds, wrong));
    CHECK(rendered.find("mismatch") != std::string::npos);
    CHECK(rendered.find("lesson_count: expected 5, got 2") != std::string::npos);
}
