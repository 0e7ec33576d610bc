#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tqa/corpus.hpp"
#include "tqa/retrieval.hpp"

namespace tqa {

// Which context the prompt carries. Each eval config names exactly one mode.
enum class ContextMode {
    NoContext,
    FullLesson,
    RagOnly,
    RagPlusLesson,
};

std::string to_string(ContextMode mode);
ContextMode context_mode_from_string(const std::string& s);

// Token budget for a single prompt. Tokens are estimated with a conservative
// character heuristic (see estimate_tokens), not a model tokenizer, so the
// chars-per-token ratio is part of the budget.
struct TokenBudget {
    int max_tokens = 4096;
    int reserved_for_answer = 64;
    int chars_per_token = 3;
};

// Context assembled for one question, before template rendering.
struct ContextResult {
    std::string context;
    bool truncated = false;
    // topic ids whose text contributed to the context, in rank order
    std::vector<std::string> chunks_used;
};

// A fully rendered prompt plus bookkeeping for traces.
struct AssembledPrompt {
    std::string text;
    std::size_t context_chars = 0;
    std::vector<std::string> chunks_used;
    bool truncated = false;
    int est_tokens = 0;
};

// Deterministic over-estimate: ceil(length / chars_per_token). Subadditive,
// which is what makes the context-size bound in assemble_context sound.
int estimate_tokens(const std::string& text, int chars_per_token = 3);

// Builds the context string for one question under the budget.
//
// NoContext ignores both sources. FullLesson takes lesson_text. RagOnly joins
// the retrieved topics' texts in rank order with blank lines. RagPlusLesson
// puts the retrieved chunks first, then the lesson. `retrieved` may be null
// except for the two rag modes.
//
// When the assembled prompt would exceed max_tokens - reserved_for_answer,
// the lesson tail goes first, then whole chunks from the lowest rank up, and
// as a last resort the tail of the top chunk; `truncated` records that any
// of this happened. Throws BudgetUnsatisfiable when the question and template
// alone exceed the budget, ConfigError on an invalid budget or a rag mode
// without retrieval.
ContextResult assemble_context(ContextMode mode, const std::string& lesson_text,
                               const RetrievedContext* retrieved,
                               const Dataset& ds, const Question& q,
                               const TokenBudget& budget);

// Renders the final prompt from a question and its assembled context.
// With `gold_label` set, the gold option is appended after the instruction
// close followed by "</s>" (the training-export shape); otherwise the text
// ends at the instruction close and the model is expected to continue it.
AssembledPrompt build_prompt(const Question& q, const ContextResult& context,
                             const std::optional<std::string>& gold_label =
                                 std::nullopt,
                             const TokenBudget& budget = {});

// Convenience overload for a bare context string (no chunk bookkeeping).
AssembledPrompt build_prompt(const Question& q, const std::string& context,
                             const std::optional<std::string>& gold_label =
                                 std::nullopt,
                             const TokenBudget& budget = {});

// "(A) glaciers (B) moving air ..." exactly as the prompt shows them.
std::string render_options(const Question& q);

// "(B) moving air": the gold option in prompt notation.
std::string render_gold_answer(const Question& q);

// The instruction block between <<SYS>> and <</SYS>>.
const std::string& system_block();

// The raw prompt template with literal {context}/{question}/{options}/{answer}
// placeholders. Kept byte-identical to data/golden/prompt_template.txt, which
// a test enforces.
std::string prompt_template();

// One training-export line: {"prompt": ..., "answer": ...} plus newline.
std::string training_line(const Question& q, const ContextResult& context);

} // namespace tqa
