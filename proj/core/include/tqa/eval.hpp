#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tqa/corpus.hpp"
#include "tqa/embedder.hpp"
#include "tqa/generation.hpp"
#include "tqa/promptgen.hpp"
#include "tqa/retrieval.hpp"
#include "tqa/vectorstore.hpp"

namespace tqa {

// One evaluation run: a named configuration tying together split, context
// mode, retrieval, model endpoint and budget. Ablation tables are lists of
// these differing in a field or two.
struct EvalConfig {
    std::string name;
    Split split = Split::Validation;
    ContextMode context_mode = ContextMode::NoContext;
    // required for the rag context modes and whenever rerank is set
    std::optional<RetrievalConfig> retrieval;
    // row-level toggle; folded into the retrieval config at run time
    bool rerank = false;
    EmbedderConfig embedder;
    ModelClientConfig model;
    TokenBudget budget;
    int concurrency = 1;
    long long seed = 0; // reserved for future sampling knobs
    std::optional<int> question_limit;
};

// Throws ConfigError when the config's own invariants don't hold.
void validate(const EvalConfig& cfg);

// The retrieval config the runner actually uses: cfg.retrieval with the
// row-level rerank flag folded in. Requires a validated config.
RetrievalConfig effective_retrieval(const EvalConfig& cfg);

struct TraceHit {
    std::string topic_id;
    double score = 0.0;
    std::size_t rank = 0;
};

// Everything recorded about one question, enough to recompute the report.
struct QuestionTrace {
    std::string config_name;
    std::string question_id;
    std::string lesson_id;
    QuestionKind kind = QuestionKind::MultipleChoice;
    ContextMode context_mode = ContextMode::NoContext;
    std::vector<TraceHit> retrieved;
    bool rerank_applied = false;
    std::optional<bool> in_lesson; // set only when retrieval participated
    std::string prompt_sha256;
    bool truncated = false;
    std::string raw_model_text;
    std::optional<std::string> predicted_label;
    ParseStatus parse_status = ParseStatus::Unparsable;
    std::string gold_label;
    bool correct = false;
};

// One JSON object per trace, no trailing newline; the round trip is exact.
std::string trace_to_jsonl(const QuestionTrace& trace);
QuestionTrace trace_from_jsonl(const std::string& line);

struct AccuracyCell {
    int total = 0;
    int correct = 0;
    double accuracy = 0.0;
};

// Per-kind accuracy. A kind absent from the traces stays disengaged rather
// than reading as 0%.
struct AccuracySummary {
    std::optional<AccuracyCell> tf;
    std::optional<AccuracyCell> mc;
    AccuracyCell all;
};

AccuracySummary accuracy(const std::vector<QuestionTrace>& traces);

struct EvalReport {
    std::string config_name;
    AccuracySummary acc;
    int unparsable = 0;
    std::optional<double> in_lesson_rate; // only when retrieval participated
    double wall_time_ms = 0.0;            // kept out of report.json (see below)
    std::vector<QuestionTrace> traces;
};

// Identifies what produced a report, so runs are comparable later.
struct RunManifest {
    std::string engine_version;
    std::string config_hash;    // sha256 over the canonical config JSON
    std::string corpus_hash;    // Dataset::source_hash()
    std::string index_model_id; // empty when no index participated
};

// report.json body. Wall time and timestamps deliberately live in the
// run_meta.json sidecar instead: two runs over the same inputs must produce
// byte-identical reports.
std::string report_to_json(const EvalReport& report, const RunManifest& manifest);

// Runs cfg over its split of ds. `index` may be null for the no-retrieval
// modes. When out_dir is non-empty the run persists there (out_dir/<name>/):
// finished traces append to a partial file as they complete, and a restart
// over the same directory skips them; a provider failure mid-run aborts but
// keeps the partial file. On success writes traces.jsonl (sorted by
// question_id), report.json, report.txt and run_meta.json.
EvalReport run_eval(const Dataset& ds, const EvalConfig& cfg,
                    const VectorIndex* index, const std::string& out_dir = "");

// An ordered ablation table. Valid when row names are unique and non-empty.
struct AblationMatrix {
    std::vector<EvalConfig> rows;
};

struct AblationOutcome {
    std::string name;
    std::optional<EvalReport> report;
    std::string error; // empty on success
};

// Runs every row sequentially. Name validation happens before any row runs;
// a row's failure is recorded in its outcome and the remaining rows still
// execute.
std::vector<AblationOutcome> run_ablation(const Dataset& ds,
                                          const AblationMatrix& matrix,
                                          const VectorIndex* index,
                                          const std::string& out_dir = "");

// The five configurations every full ablation is expected to cover.
const std::vector<std::string>& canonical_row_names();
bool covers_canonical_rows(const AblationMatrix& matrix);

// Rendering. Accuracies appear as percentages with two decimals in the text
// forms; the CSV keeps full precision.
std::string render_report(const EvalReport& report);
std::string render_comparison(const std::vector<AblationOutcome>& outcomes);
std::string comparison_csv(const std::vector<AblationOutcome>& outcomes);

// One human-readable case-study block: question, options, correct and
// predicted answers, and the retrieved context texts with their topic ids
// (prefixed by the lesson id when the topic came from another lesson).
// Throws UnknownIdError when the trace's ids don't resolve in ds.
std::string render_trace(const QuestionTrace& trace, const Dataset& ds);

} // namespace tqa
