#include "tqa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "json.hpp"

#include "internal/binio.hpp"
#include "internal/hash.hpp"
#include "internal/text.hpp"

namespace tqa {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(QuestionKind kind) {
    switch (kind) {
    case QuestionKind::TrueFalse: return "true_false";
    case QuestionKind::MultipleChoice: return "multiple_choice";
    }
    return "multiple_choice";
}

std::string_view to_string(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    }
    return "train";
}

std::string_view to_string(CorpusFormat format) {
    switch (format) {
    case CorpusFormat::NativeCK12: return "native_ck12";
    case CorpusFormat::Normalized: return "normalized";
    }
    return "normalized";
}

QuestionKind question_kind_from_string(std::string_view s) {
    if (s == "true_false") return QuestionKind::TrueFalse;
    if (s == "multiple_choice") return QuestionKind::MultipleChoice;
    throw ParseError("unknown question kind: " + std::string(s));
}

CorpusFormat corpus_format_from_string(std::string_view s) {
    if (s == "native_ck12") return CorpusFormat::NativeCK12;
    if (s == "normalized") return CorpusFormat::Normalized;
    throw ParseError("unknown corpus format: " + std::string(s));
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "validation" || s == "val" || s == "dev") return Split::Validation;
    if (s == "test") return Split::Test;
    throw ParseError("unknown split: " + std::string(s));
}

const Option* Question::find_option(std::string_view label) const {
    for (const auto& opt : options) {
        if (opt.label == label) return &opt;
    }
    return nullptr;
}

std::string Question::gold_text() const {
    const Option* opt = find_option(gold_label);
    return opt ? opt->text : std::string{};
}

// ---------------------------------------------------------------------------
// Dataset construction and invariant checks
// ---------------------------------------------------------------------------

Dataset::Dataset(std::vector<Lesson> lessons, std::vector<Topic> topics,
                 std::vector<Question> questions, LoadSummary summary)
    : lessons_(std::move(lessons)),
      topics_(std::move(topics)),
      questions_(std::move(questions)),
      summary_(std::move(summary)) {
    build_and_check();
}

namespace {

bool valid_label(const std::string& label) {
    return label.size() == 1 && label[0] >= 'A' && label[0] <= 'H';
}

void check_question(const Question& q) {
    if (q.options.size() < 2) {
        throw ParseError("question " + q.question_id + ": fewer than 2 options");
    }
    if (q.kind == QuestionKind::TrueFalse && q.options.size() != 2) {
        throw ParseError("question " + q.question_id +
                         ": true/false must carry exactly 2 options");
    }
    if (q.options.size() > 8) {
        throw ParseError("question " + q.question_id + ": more than 8 options");
    }
    for (std::size_t i = 0; i < q.options.size(); ++i) {
        const std::string& label = q.options[i].label;
        if (!valid_label(label)) {
            throw ParseError("question " + q.question_id + ": bad option label '" +
                             label + "' (labels run A..H)");
        }
        if (label[0] != static_cast<char>('A' + i)) {
            throw ParseError("question " + q.question_id +
                             ": option labels must be consecutive from A");
        }
    }
    if (!q.find_option(q.gold_label)) {
        throw ParseError("question " + q.question_id + ": gold label '" +
                         q.gold_label + "' not among options");
    }
}

} // namespace

void Dataset::build_and_check() {
    for (std::size_t i = 0; i < lessons_.size(); ++i) {
        if (!lesson_by_id_.emplace(lessons_[i].lesson_id, i).second) {
            throw DuplicateIdError("duplicate lesson id: " + lessons_[i].lesson_id);
        }
    }
    for (std::size_t i = 0; i < topics_.size(); ++i) {
        if (!topic_by_id_.emplace(topics_[i].topic_id, i).second) {
            throw DuplicateIdError("duplicate topic id: " + topics_[i].topic_id);
        }
    }
    for (std::size_t i = 0; i < questions_.size(); ++i) {
        if (!question_by_id_.emplace(questions_[i].question_id, i).second) {
            throw DuplicateIdError("duplicate question id: " +
                                   questions_[i].question_id);
        }
    }

    for (const Topic& t : topics_) {
        if (internal::trim(t.text).empty()) {
            throw ParseError("topic " + t.topic_id + ": empty text");
        }
        if (!lesson_by_id_.contains(t.lesson_id)) {
            throw ReferentialError("topic " + t.topic_id +
                                   " references unknown lesson " + t.lesson_id);
        }
    }
    for (const Lesson& l : lessons_) {
        if (l.topic_ids.empty()) {
            throw ReferentialError("lesson " + l.lesson_id + " has no topics");
        }
        for (const std::string& tid : l.topic_ids) {
            auto it = topic_by_id_.find(tid);
            if (it == topic_by_id_.end()) {
                throw ReferentialError("lesson " + l.lesson_id +
                                       " references unknown topic " + tid);
            }
            if (topics_[it->second].lesson_id != l.lesson_id) {
                throw ReferentialError("topic " + tid + " listed by lesson " +
                                       l.lesson_id + " but owned by " +
                                       topics_[it->second].lesson_id);
            }
        }
    }
    for (const Question& q : questions_) {
        if (!lesson_by_id_.contains(q.lesson_id)) {
            throw ReferentialError("question " + q.question_id +
                                   " references unknown lesson " + q.lesson_id);
        }
        check_question(q);
    }
}

const Lesson* Dataset::find_lesson(std::string_view id) const {
    auto it = lesson_by_id_.find(std::string(id));
    return it == lesson_by_id_.end() ? nullptr : &lessons_[it->second];
}

const Topic* Dataset::find_topic(std::string_view id) const {
    auto it = topic_by_id_.find(std::string(id));
    return it == topic_by_id_.end() ? nullptr : &topics_[it->second];
}

const Question* Dataset::find_question(std::string_view id) const {
    auto it = question_by_id_.find(std::string(id));
    return it == question_by_id_.end() ? nullptr : &questions_[it->second];
}

const Lesson& Dataset::lesson(std::string_view id) const {
    const Lesson* l = find_lesson(id);
    if (!l) throw UnknownLessonError("unknown lesson: " + std::string(id));
    return *l;
}

const Topic& Dataset::topic(std::string_view id) const {
    const Topic* t = find_topic(id);
    if (!t) throw UnknownIdError("unknown topic: " + std::string(id));
    return *t;
}

const Question& Dataset::question(std::string_view id) const {
    const Question* q = find_question(id);
    if (!q) throw UnknownIdError("unknown question: " + std::string(id));
    return *q;
}

// ---------------------------------------------------------------------------
// Normalized layout
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void missing_field(const std::string& file, const std::string& where,
                                const std::string& key) {
    throw ParseError(file + ": " + where + ": missing field '" + key + "'");
}

std::string req_str(const ordered_json& obj, const std::string& key,
                    const std::string& file, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) missing_field(file, where, key);
    return it->get<std::string>();
}

std::string upper_label(std::string label) {
    for (char& c : label) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return label;
}

struct CorpusParts {
    std::vector<Lesson> lessons;
    std::vector<Topic> topics;
    std::vector<Question> questions;
    LoadSummary summary;
};

void parse_normalized_file(const fs::path& path, const std::string& bytes,
                           CorpusParts& parts) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    const std::string file = path.string();
    if (!doc.is_object()) {
        throw ParseError(file + ": expected a top-level object");
    }

    for (const auto& jl : doc.value("lessons", ordered_json::array())) {
        Lesson l;
        l.lesson_id = req_str(jl, "lesson_id", file, "lesson");
        l.title = jl.value("title", std::string{});
        if (jl.contains("split")) {
            l.split = split_from_string(jl["split"].get<std::string>());
        }
        auto it = jl.find("topic_ids");
        if (it == jl.end() || !it->is_array()) {
            missing_field(file, "lesson " + l.lesson_id, "topic_ids");
        }
        for (const auto& tid : *it) {
            l.topic_ids.push_back(tid.get<std::string>());
        }
        parts.lessons.push_back(std::move(l));
    }
    for (const auto& jt : doc.value("topics", ordered_json::array())) {
        Topic t;
        t.topic_id = req_str(jt, "topic_id", file, "topic");
        t.lesson_id = req_str(jt, "lesson_id", file, "topic " + t.topic_id);
        t.title = jt.value("title", std::string{});
        t.text = req_str(jt, "text", file, "topic " + t.topic_id);
        t.adjunct = jt.value("adjunct", false);
        parts.topics.push_back(std::move(t));
        if (parts.topics.back().adjunct) ++parts.summary.adjunct_topics;
    }
    for (const auto& jq : doc.value("questions", ordered_json::array())) {
        Question q;
        q.question_id = req_str(jq, "question_id", file, "question");
        const std::string where = "question " + q.question_id;
        q.lesson_id = req_str(jq, "lesson_id", file, where);
        q.kind = question_kind_from_string(req_str(jq, "kind", file, where));
        q.stem = req_str(jq, "stem", file, where);
        auto it = jq.find("options");
        if (it == jq.end() || !it->is_array()) missing_field(file, where, "options");
        for (const auto& jo : *it) {
            q.options.push_back(Option{upper_label(req_str(jo, "label", file, where)),
                                       req_str(jo, "text", file, where)});
        }
        q.gold_label = upper_label(req_str(jq, "gold_label", file, where));
        q.split = split_from_string(req_str(jq, "split", file, where));
        parts.questions.push_back(std::move(q));
    }
}

// ---------------------------------------------------------------------------
// Native release layout: one JSON array of lesson objects per split file.
// Topic order inside a lesson follows file order, so parsing keeps insertion
// order. Adjunct blocks (objectives, summaries, vocabulary) become topics
// flagged `adjunct`; diagram questions are dropped and counted.
// ---------------------------------------------------------------------------

std::string adjunct_text(const ordered_json& content) {
    if (content.is_string()) return content.get<std::string>();
    if (!content.is_object()) return {};
    auto it = content.find("text");
    if (it != content.end() && it->is_string()) return it->get<std::string>();
    // vocabulary-style blocks: plain term -> definition maps
    std::string joined;
    for (const auto& [term, def] : content.items()) {
        if (!def.is_string()) continue;
        if (!joined.empty()) joined += "\n";
        joined += term;
        if (!def.get<std::string>().empty()) {
            joined += ": " + def.get<std::string>();
        }
    }
    return joined;
}

std::string native_gold_label(const ordered_json& jq, const Question& q,
                              const std::string& file, const std::string& where) {
    auto ca = jq.find("correctAnswer");
    if (ca == jq.end() || !ca->is_object()) missing_field(file, where, "correctAnswer");
    std::string text = ca->value("processedText", std::string{});
    if (text.empty()) text = ca->value("rawText", std::string{});
    // Usually a bare letter; true/false questions sometimes carry the option
    // text instead.
    std::string trimmed(internal::trim(text));
    if (trimmed.size() == 1 && std::isalpha(static_cast<unsigned char>(trimmed[0]))) {
        return upper_label(trimmed);
    }
    std::string norm = internal::normalize_for_match(trimmed);
    for (const auto& opt : q.options) {
        if (internal::normalize_for_match(opt.text) == norm && !norm.empty()) {
            return opt.label;
        }
    }
    // rawText like "(b) moving air": take the parenthesized letter.
    for (std::size_t i = 0; i + 2 < trimmed.size(); ++i) {
        if (trimmed[i] == '(' && trimmed[i + 2] == ')' &&
            std::isalpha(static_cast<unsigned char>(trimmed[i + 1]))) {
            return upper_label(std::string(1, trimmed[i + 1]));
        }
    }
    throw ParseError(file + ": " + where + ": cannot resolve correct answer '" +
                     text + "'");
}

void parse_native_file(const fs::path& path, const std::string& bytes, Split split,
                       CorpusParts& parts) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    const std::string file = path.string();
    if (!doc.is_array()) {
        throw ParseError(file + ": expected a top-level array of lessons");
    }

    for (const auto& jl : doc) {
        Lesson lesson;
        lesson.lesson_id = req_str(jl, "globalID", file, "lesson");
        lesson.title = jl.value("lessonName", std::string{});
        lesson.split = split;
        const std::string lwhere = "lesson " + lesson.lesson_id;

        auto topics_it = jl.find("topics");
        if (topics_it != jl.end() && topics_it->is_object()) {
            for (const auto& [key, jt] : topics_it->items()) {
                Topic t;
                t.topic_id = jt.value("globalID", key);
                t.lesson_id = lesson.lesson_id;
                t.title = jt.value("topicName", std::string{});
                if (jt.contains("content") && jt["content"].is_object()) {
                    t.text = jt["content"].value("text", std::string{});
                }
                if (internal::trim(t.text).empty()) {
                    throw ParseError(file + ": " + lwhere + ": topic " + t.topic_id +
                                     " has no text");
                }
                lesson.topic_ids.push_back(t.topic_id);
                parts.topics.push_back(std::move(t));
            }
        }
        auto adjunct_it = jl.find("adjunctTopics");
        if (adjunct_it != jl.end() && adjunct_it->is_object()) {
            std::size_t n = 0;
            for (const auto& [name, jt] : adjunct_it->items()) {
                std::string text;
                if (jt.is_object() && jt.contains("content")) {
                    text = adjunct_text(jt["content"]);
                }
                if (internal::trim(text).empty()) continue;
                Topic t;
                t.topic_id = lesson.lesson_id + "_ADJ_" + std::to_string(n++);
                t.lesson_id = lesson.lesson_id;
                t.title = name;
                t.text = std::move(text);
                t.adjunct = true;
                lesson.topic_ids.push_back(t.topic_id);
                parts.topics.push_back(std::move(t));
                ++parts.summary.adjunct_topics;
            }
        }

        auto questions_it = jl.find("questions");
        if (questions_it != jl.end() && questions_it->is_object()) {
            const auto& jqs = *questions_it;
            if (jqs.contains("diagramQuestions") && jqs["diagramQuestions"].is_object()) {
                parts.summary.diagram_questions_dropped +=
                    jqs["diagramQuestions"].size();
            }
            auto ndq = jqs.find("nonDiagramQuestions");
            if (ndq != jqs.end() && ndq->is_object()) {
                for (const auto& [qid, jq] : ndq->items()) {
                    Question q;
                    q.question_id = qid;
                    q.lesson_id = lesson.lesson_id;
                    q.split = split;
                    const std::string where = "question " + qid;
                    std::string subtype = jq.value("questionSubType", std::string{});
                    if (subtype.empty()) {
                        subtype = internal::to_lower(
                            jq.value("questionType", std::string{}));
                    }
                    q.kind = internal::to_lower(subtype).find("true") !=
                                     std::string::npos
                                 ? QuestionKind::TrueFalse
                                 : QuestionKind::MultipleChoice;
                    auto asked = jq.find("beingAsked");
                    if (asked == jq.end() || !asked->is_object()) {
                        missing_field(file, where, "beingAsked");
                    }
                    q.stem = asked->value("processedText", std::string{});
                    if (q.stem.empty()) q.stem = asked->value("rawText", std::string{});
                    auto choices = jq.find("answerChoices");
                    if (choices == jq.end() || !choices->is_object()) {
                        missing_field(file, where, "answerChoices");
                    }
                    std::vector<std::pair<std::string, std::string>> opts;
                    for (const auto& [label, jo] : choices->items()) {
                        std::string text = jo.value("processedText", std::string{});
                        if (text.empty()) text = jo.value("rawText", std::string{});
                        opts.emplace_back(upper_label(label), text);
                    }
                    std::sort(opts.begin(), opts.end());
                    for (auto& [label, text] : opts) {
                        q.options.push_back(Option{label, std::move(text)});
                    }
                    q.gold_label = native_gold_label(jq, q, file, where);
                    parts.questions.push_back(std::move(q));
                }
            }
        }
        parts.lessons.push_back(std::move(lesson));
    }
}

std::optional<Split> split_from_filename(const fs::path& path) {
    std::string stem = internal::to_lower(path.stem().string());
    if (stem.find("train") != std::string::npos) return Split::Train;
    if (stem.find("test") != std::string::npos) return Split::Test;
    if (stem.find("val") != std::string::npos || stem.find("dev") != std::string::npos) {
        return Split::Validation;
    }
    return std::nullopt;
}

std::vector<fs::path> collect_json_files(const fs::path& path) {
    std::vector<fs::path> files;
    if (fs::is_regular_file(path)) {
        files.push_back(path);
    } else if (fs::is_directory(path)) {
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
    } else {
        throw ParseError("corpus path does not exist: " + path.string());
    }
    return files;
}

} // namespace

Dataset load_dataset(const fs::path& path, CorpusFormat format) {
    std::vector<fs::path> files = collect_json_files(path);
    if (files.empty()) {
        throw ParseError("no .json files under " + path.string());
    }

    CorpusParts parts;
    std::string hash_input;
    for (const fs::path& file : files) {
        std::optional<Split> split = split_from_filename(file);
        if (!split && files.size() > 1) {
            // manifest or other stray json in a corpus directory; a single
            // explicit file is loaded no matter what it is called
            continue;
        }
        std::string bytes = internal::read_file_bytes(file);
        hash_input += file.filename().string();
        hash_input.push_back('\0');
        hash_input += bytes;
        if (format == CorpusFormat::Normalized) {
            parse_normalized_file(file, bytes, parts);
        } else {
            parse_native_file(file, bytes, split.value_or(Split::Train), parts);
        }
        parts.summary.files_loaded.push_back(file.string());
    }
    if (parts.summary.files_loaded.empty()) {
        throw ParseError("no recognizable split files under " + path.string());
    }

    Dataset ds(std::move(parts.lessons), std::move(parts.topics),
               std::move(parts.questions), std::move(parts.summary));
    ds.set_source_hash(internal::sha256_hex(hash_input));
    return ds;
}

// ---------------------------------------------------------------------------
// Stats, validation, filtering
// ---------------------------------------------------------------------------

SplitStats compute_stats(const Dataset& ds) {
    SplitStats stats;
    stats.lesson_count = ds.lessons().size();
    stats.topic_count = ds.topics().size();
    for (const Question& q : ds.questions()) {
        KindCounts& counts = stats.for_split(q.split);
        if (q.kind == QuestionKind::TrueFalse) {
            ++counts.true_false;
        } else {
            ++counts.multiple_choice;
        }
    }
    return stats;
}

ValidationReport validate_dataset(const Dataset& ds,
                                  const std::optional<SplitStats>& expected) {
    ValidationReport report;
    report.computed = compute_stats(ds);
    if (!expected) return report;
    report.compared = true;

    auto check = [&](const std::string& field, std::size_t got, std::size_t want) {
        if (want == kUnspecifiedCount || got == want) return;
        report.mismatches.push_back(field + ": expected " + std::to_string(want) +
                                    ", got " + std::to_string(got));
    };
    check("lesson_count", report.computed.lesson_count, expected->lesson_count);
    check("topic_count", report.computed.topic_count, expected->topic_count);
    for (Split s : {Split::Train, Split::Validation, Split::Test}) {
        const KindCounts& got = report.computed.for_split(s);
        const KindCounts& want = expected->for_split(s);
        std::string prefix(to_string(s));
        check(prefix + ".true_false", got.true_false, want.true_false);
        check(prefix + ".multiple_choice", got.multiple_choice, want.multiple_choice);
    }
    return report;
}

std::vector<Question> filter_questions(const Dataset& ds, Split split,
                                       const std::set<QuestionKind>& kinds) {
    std::vector<Question> out;
    for (const Question& q : ds.questions()) {
        if (q.split == split && kinds.contains(q.kind)) {
            out.push_back(q);
        }
    }
    std::sort(out.begin(), out.end(), [](const Question& a, const Question& b) {
        return a.question_id < b.question_id;
    });
    return out;
}

std::string lesson_text(const Dataset& ds, std::string_view lesson_id) {
    const Lesson& l = ds.lesson(lesson_id);
    std::string out;
    for (const std::string& tid : l.topic_ids) {
        if (!out.empty()) out += "\n\n";
        out += ds.topic(tid).text;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalized writer and manifests
// ---------------------------------------------------------------------------

std::vector<fs::path> save_normalized(const Dataset& ds, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    std::vector<fs::path> written;
    for (Split split : {Split::Train, Split::Validation, Split::Test}) {
        std::vector<const Lesson*> lessons;
        for (const Lesson& l : ds.lessons()) {
            if (l.split == split) lessons.push_back(&l);
        }
        std::vector<const Question*> questions;
        for (const Question& q : ds.questions()) {
            if (q.split == split) questions.push_back(&q);
        }
        if (lessons.empty() && questions.empty()) continue;

        std::sort(lessons.begin(), lessons.end(),
                  [](auto* a, auto* b) { return a->lesson_id < b->lesson_id; });
        std::sort(questions.begin(), questions.end(),
                  [](auto* a, auto* b) { return a->question_id < b->question_id; });

        std::vector<const Topic*> topics;
        for (const Lesson* l : lessons) {
            for (const std::string& tid : l->topic_ids) {
                topics.push_back(&ds.topic(tid));
            }
        }
        std::sort(topics.begin(), topics.end(),
                  [](auto* a, auto* b) { return a->topic_id < b->topic_id; });

        ordered_json doc;
        doc["lessons"] = ordered_json::array();
        for (const Lesson* l : lessons) {
            ordered_json jl;
            jl["lesson_id"] = l->lesson_id;
            jl["title"] = l->title;
            jl["topic_ids"] = l->topic_ids;
            jl["split"] = std::string(to_string(split));
            doc["lessons"].push_back(std::move(jl));
        }
        doc["topics"] = ordered_json::array();
        for (const Topic* t : topics) {
            ordered_json jt;
            jt["topic_id"] = t->topic_id;
            jt["lesson_id"] = t->lesson_id;
            jt["title"] = t->title;
            jt["text"] = t->text;
            jt["adjunct"] = t->adjunct;
            doc["topics"].push_back(std::move(jt));
        }
        doc["questions"] = ordered_json::array();
        for (const Question* q : questions) {
            ordered_json jq;
            jq["question_id"] = q->question_id;
            jq["lesson_id"] = q->lesson_id;
            jq["kind"] = std::string(to_string(q->kind));
            jq["stem"] = q->stem;
            jq["options"] = ordered_json::array();
            for (const Option& opt : q->options) {
                jq["options"].push_back({{"label", opt.label}, {"text", opt.text}});
            }
            jq["gold_label"] = q->gold_label;
            jq["split"] = std::string(to_string(split));
            doc["questions"].push_back(std::move(jq));
        }

        fs::path file = out_dir / (std::string(to_string(split)) + ".json");
        internal::write_file_atomic(file, doc.dump(2) + "\n");
        written.push_back(file);
    }
    return written;
}

std::string render_stats(const SplitStats& stats) {
    std::ostringstream out;
    out << "split        true_false  multiple_choice  total\n";
    std::size_t tf_sum = 0;
    std::size_t mc_sum = 0;
    for (Split s : {Split::Train, Split::Validation, Split::Test}) {
        const KindCounts& c = stats.for_split(s);
        tf_sum += c.true_false;
        mc_sum += c.multiple_choice;
        out << to_string(s);
        for (std::size_t i = to_string(s).size(); i < 13; ++i) out << ' ';
        out << c.true_false << "  " << c.multiple_choice << "  " << c.total() << "\n";
    }
    out << "all          " << tf_sum << "  " << mc_sum << "  " << tf_sum + mc_sum
        << "\n";
    out << "lessons: " << stats.lesson_count << "  topics: " << stats.topic_count
        << "\n";
    return out.str();
}

std::string render_validation(const ValidationReport& report) {
    std::string out = render_stats(report.computed);
    if (!report.compared) return out;
    if (report.all_match()) {
        out += "expected stats: all fields match\n";
    } else {
        out += "expected stats: " + std::to_string(report.mismatches.size()) +
               " mismatch(es)\n";
        for (const std::string& m : report.mismatches) {
            out += "  " + m + "\n";
        }
    }
    return out;
}

SplitStats stats_from_manifest(const fs::path& manifest_path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(internal::read_file_bytes(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    SplitStats stats;
    stats.lesson_count = doc.value("lessons", kUnspecifiedCount);
    stats.topic_count = doc.value("topics", kUnspecifiedCount);
    if (doc.contains("splits")) {
        for (const auto& [name, counts] : doc["splits"].items()) {
            KindCounts& c = stats.for_split(split_from_string(name));
            c.true_false = counts.value("true_false", std::size_t{0});
            c.multiple_choice = counts.value("multiple_choice", std::size_t{0});
        }
    }
    return stats;
}

void write_stats_manifest(const SplitStats& stats, const fs::path& manifest_path) {
    ordered_json doc;
    doc["lessons"] = stats.lesson_count;
    doc["topics"] = stats.topic_count;
    doc["splits"] = ordered_json::object();
    for (Split s : {Split::Train, Split::Validation, Split::Test}) {
        const KindCounts& c = stats.for_split(s);
        doc["splits"][std::string(to_string(s))] = {
            {"true_false", c.true_false}, {"multiple_choice", c.multiple_choice}};
    }
    internal::write_file_atomic(manifest_path, doc.dump(2) + "\n");
}

SplitStats ck12_reference_stats() {
    SplitStats stats;
    stats.lesson_count = 1076;
    stats.topic_count = kUnspecifiedCount;
    stats.for_split(Split::Train) = {3490, 5163};
    stats.for_split(Split::Validation) = {998, 1530};
    stats.for_split(Split::Test) = {912, 1600};
    return stats;
}

} // namespace tqa
