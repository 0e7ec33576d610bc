#include "synth.hpp"

#include <array>
#include <cstdio>
#include <vector>

#include "json.hpp"

namespace tqa::tools {

namespace {

using nlohmann::json;

const std::array<const char*, 20> kSubjects = {
    "water cycle",    "rock layers",   "plate motion",    "wind erosion",
    "solar energy",   "ocean tides",   "cell division",   "food webs",
    "plant roots",    "animal migration", "sound waves",   "light rays",
    "electric circuits", "magnet poles", "heat transfer",  "simple machines",
    "weather fronts", "mineral crystals", "soil horizons", "glacier valleys"};

const std::array<const char*, 10> kAspects = {
    "formation",  "movement", "measurement", "examples",    "importance",
    "patterns",   "history",  "comparison",  "observation", "prediction"};

// option pools for the six multiple-choice slots of each lesson
const std::array<std::array<const char*, 4>, 6> kOptionPools = {{
    {"daily observation", "weekly survey", "annual census", "hourly reading"},
    {"field notebook", "museum archive", "satellite image", "laboratory slide"},
    {"northern plateau", "southern valley", "eastern coast", "western desert"},
    {"early spring", "late summer", "mid winter", "dry autumn"},
    {"simple model", "detailed map", "scale drawing", "rough sketch"},
    {"strong evidence", "weak guess", "fair estimate", "bold claim"},
}};

std::string padded(const char* prefix, int n) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s%04d", prefix, n);
    return buf;
}

std::string tf_stem(const std::string& subject, int offset) {
    const std::string aspect = kAspects[static_cast<std::size_t>(offset - 1)];
    switch (offset) {
    case 1: return "The " + subject + " always begins with " + aspect + ".";
    case 2:
        return "Scientists can study the " + subject + " without any " +
               aspect + ".";
    case 3: return "The " + subject + " shows " + aspect + " only once each year.";
    default:
        return "Careful records of the " + subject + " make " + aspect +
               " easier to compare.";
    }
}

std::string mc_stem(const std::string& subject, int offset) {
    const std::string aspect = kAspects[static_cast<std::size_t>(offset - 1)];
    switch (offset) {
    case 5: return "Which record best shows the " + aspect + " of the " + subject + "?";
    case 6: return "Which tool best reveals the " + aspect + " of the " + subject + "?";
    case 7: return "Which region preserves the " + aspect + " of the " + subject + "?";
    case 8: return "Which season suits a " + aspect + " of the " + subject + "?";
    case 9:
        return "Which drawing supports careful " + aspect + " of the " +
               subject + "?";
    default:
        return "Which statement counts as a " + aspect + " about the " +
               subject + "?";
    }
}

Split lesson_split(int lesson) {
    if (lesson <= 12) return Split::Train;
    if (lesson <= 16) return Split::Validation;
    return Split::Test;
}

} // namespace

SyntheticCorpus make_synthetic_corpus() {
    std::vector<Lesson> lessons;
    std::vector<Topic> topics;
    std::vector<Question> questions;
    json rules = json::array();

    int qnum = 0;
    for (int l = 1; l <= 20; ++l) {
        const std::string subject = kSubjects[static_cast<std::size_t>(l - 1)];
        Lesson lesson;
        lesson.lesson_id = padded("L_", l);
        lesson.title = subject;
        lesson.split = lesson_split(l);

        for (int t = 1; t <= 5; ++t) {
            Topic topic;
            topic.topic_id = padded("T_", (l - 1) * 5 + t);
            topic.lesson_id = lesson.lesson_id;
            const std::string aspect = kAspects[static_cast<std::size_t>(t - 1)];
            topic.title = subject + " " + aspect;
            topic.text = "The " + subject + " shows clear " + aspect +
                         " in the field. Students track the " + subject +
                         " while recording " + aspect +
                         " in a notebook. Comparing notes on " + aspect +
                         " builds a fuller picture of the " + subject + ".";
            lesson.topic_ids.push_back(topic.topic_id);
            topics.push_back(std::move(topic));
        }

        for (int offset = 1; offset <= 10; ++offset) {
            ++qnum;
            Question q;
            q.question_id = padded("SYNQ_", qnum);
            q.lesson_id = lesson.lesson_id;
            q.split = lesson.split;
            if (offset <= 4) {
                q.kind = QuestionKind::TrueFalse;
                q.stem = tf_stem(subject, offset);
                q.options = {{"A", "true"}, {"B", "false"}};
                q.gold_label = (l + offset) % 2 == 0 ? "A" : "B";
            } else {
                q.kind = QuestionKind::MultipleChoice;
                q.stem = mc_stem(subject, offset);
                const auto& pool =
                    kOptionPools[static_cast<std::size_t>(offset - 5)];
                for (int i = 0; i < 4; ++i) {
                    q.options.push_back(
                        {std::string(1, static_cast<char>('A' + i)), pool[i]});
                }
                q.gold_label =
                    std::string(1, static_cast<char>('A' + (l + offset) % 4));
            }

            // reply pattern: multiplying by 7 walks every residue class, so
            // correct, wrong and unparsable replies land in both kinds and
            // all splits
            const int residue = qnum * 7 % 10;
            const Option* gold = q.find_option(q.gold_label);
            const std::size_t gold_idx =
                static_cast<std::size_t>(gold->label[0] - 'A');
            const Option& wrong =
                q.options[(gold_idx + 1) % q.options.size()];
            std::string reply;
            if (residue < 7) {
                reply = "(" + gold->label + ") " + gold->text;
            } else if (residue == 7) {
                reply = "(" + wrong.label + ") " + wrong.text;
            } else if (residue == 8) {
                reply = "I would say it is (" + wrong.label + ") overall.";
            } else {
                reply = "that depends on several unrelated factors";
            }
            rules.push_back({{"contains", "Question: " + q.stem},
                             {"reply", reply}});
            questions.push_back(std::move(q));
        }
        lessons.push_back(std::move(lesson));
    }

    SyntheticCorpus out;
    out.dataset =
        Dataset(std::move(lessons), std::move(topics), std::move(questions));
    out.stub_script =
        json{{"default_reply", "no matching rule"}, {"rules", rules}}.dump(2) +
        "\n";
    return out;
}

} // namespace tqa::tools
