#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tqa/errors.hpp"

namespace tqa {

enum class QuestionKind { TrueFalse, MultipleChoice };
enum class Split { Train, Validation, Test };
enum class CorpusFormat { NativeCK12, Normalized };

std::string_view to_string(QuestionKind kind);
std::string_view to_string(Split split);
std::string_view to_string(CorpusFormat format);
QuestionKind question_kind_from_string(std::string_view s);
Split split_from_string(std::string_view s);
CorpusFormat corpus_format_from_string(std::string_view s);

/// A titled subsection of a lesson; the unit of embedding and retrieval.
struct Topic {
    std::string topic_id;
    std::string lesson_id;
    std::string title;
    std::string text;
    bool adjunct = false; // objectives/summary/vocabulary blocks promoted to topics
};

struct Lesson {
    std::string lesson_id;
    std::string title;
    std::vector<std::string> topic_ids; // textbook order
    Split split = Split::Train;         // which split file the lesson came from
};

struct Option {
    std::string label; // single uppercase letter, A..H
    std::string text;
};

struct Question {
    std::string question_id;
    std::string lesson_id;
    QuestionKind kind = QuestionKind::MultipleChoice;
    std::string stem;
    std::vector<Option> options;
    std::string gold_label;
    Split split = Split::Train;

    const Option* find_option(std::string_view label) const;
    std::string gold_text() const;
};

struct LoadSummary {
    std::size_t diagram_questions_dropped = 0;
    std::size_t adjunct_topics = 0;
    std::vector<std::string> files_loaded;
};

/// Immutable after construction; safe for concurrent reads.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<Lesson> lessons, std::vector<Topic> topics,
            std::vector<Question> questions, LoadSummary summary = {});

    const std::vector<Lesson>& lessons() const { return lessons_; }
    const std::vector<Topic>& topics() const { return topics_; }
    const std::vector<Question>& questions() const { return questions_; }
    const LoadSummary& load_summary() const { return summary_; }

    const Lesson* find_lesson(std::string_view id) const;
    const Topic* find_topic(std::string_view id) const;
    const Question* find_question(std::string_view id) const;

    const Lesson& lesson(std::string_view id) const;   // throws UnknownLessonError
    const Topic& topic(std::string_view id) const;     // throws UnknownIdError
    const Question& question(std::string_view id) const; // throws UnknownIdError

    /// SHA-256 over the source bytes the dataset was loaded from (empty for
    /// in-memory datasets).
    const std::string& source_hash() const { return source_hash_; }
    void set_source_hash(std::string hash) { source_hash_ = std::move(hash); }

private:
    void build_and_check();

    std::vector<Lesson> lessons_;
    std::vector<Topic> topics_;
    std::vector<Question> questions_;
    LoadSummary summary_;
    std::string source_hash_;
    std::unordered_map<std::string, std::size_t> lesson_by_id_;
    std::unordered_map<std::string, std::size_t> topic_by_id_;
    std::unordered_map<std::string, std::size_t> question_by_id_;
};

struct KindCounts {
    std::size_t true_false = 0;
    std::size_t multiple_choice = 0;
    std::size_t total() const { return true_false + multiple_choice; }
};

/// Placed in an expected-stats field to exclude it from comparison (reference
/// counts do not pin every field).
inline constexpr std::size_t kUnspecifiedCount = static_cast<std::size_t>(-1);

struct SplitStats {
    std::array<KindCounts, 3> questions{}; // indexed by Split
    std::size_t lesson_count = 0;
    std::size_t topic_count = 0;

    KindCounts& for_split(Split s) { return questions[static_cast<std::size_t>(s)]; }
    const KindCounts& for_split(Split s) const {
        return questions[static_cast<std::size_t>(s)];
    }
};

struct ValidationReport {
    SplitStats computed;
    bool compared = false;
    std::vector<std::string> mismatches; // one line per differing field
    bool all_match() const { return mismatches.empty(); }
};

/// Load a corpus from either the native per-lesson release layout or the
/// normalized one-JSON-per-split layout. `path` may be a single split file
/// or a directory holding several. Diagram questions are dropped and counted
/// in the load summary.
Dataset load_dataset(const std::filesystem::path& path, CorpusFormat format);

SplitStats compute_stats(const Dataset& ds);

/// Computes stats and, when `expected` is given, reports every differing
/// field. Mismatches are report content, not errors.
ValidationReport validate_dataset(const Dataset& ds,
                                  const std::optional<SplitStats>& expected = {});

/// Questions of the given split and kinds, sorted by question_id ascending.
std::vector<Question> filter_questions(const Dataset& ds, Split split,
                                       const std::set<QuestionKind>& kinds);

/// Topic texts of a lesson in textbook order, joined by one blank line.
std::string lesson_text(const Dataset& ds, std::string_view lesson_id);

/// Write the normalized layout: one JSON document per split that has content.
/// Returns the files written. Output is byte-deterministic for a fixed dataset.
std::vector<std::filesystem::path> save_normalized(
    const Dataset& ds, const std::filesystem::path& out_dir);

std::string render_stats(const SplitStats& stats);
std::string render_validation(const ValidationReport& report);

SplitStats stats_from_manifest(const std::filesystem::path& manifest_path);
void write_stats_manifest(const SplitStats& stats,
                          const std::filesystem::path& manifest_path);

/// Published question counts for the full CK12 textbook release; used to
/// check an ingested copy of the public dataset.
SplitStats ck12_reference_stats();

} // namespace tqa
