#include "tqa/promptgen.hpp"

#include <numeric>

#include "json.hpp"

#include "tqa/errors.hpp"

namespace tqa {

namespace {

const std::string kSystemBlock =
    "You are a helpful, respectful and honest assistant. Always answer as "
    "helpfully as possible using the context text provided. Your answers "
    "should only be the choice from the given multiple Options and not have "
    "any text after the answer is done.";

// The template is never rendered by placeholder substitution. Both
// prompt_template() and build_prompt() concatenate these fixed segments, so
// braces inside question or context text cannot corrupt the output.
const std::string kPreQuestion = "\nQuestion: ";
const std::string kPreOptions = "\nOptions: ";
const std::string kPostOptions = "\nAnswer:[/INST]";
const std::string kEos = "</s>";

std::string pre_context() {
    return "[INST]<<SYS>>\n" + kSystemBlock + "\n<</SYS>>\n\nContext:\n";
}

void check_budget(const TokenBudget& b) {
    if (b.max_tokens < 1 || b.reserved_for_answer < 1) {
        throw ConfigError("token budget fields must be positive");
    }
    if (b.reserved_for_answer >= b.max_tokens) {
        throw ConfigError("reserved_for_answer must be below max_tokens");
    }
    if (b.chars_per_token < 1) {
        throw ConfigError("chars_per_token must be at least 1");
    }
}

std::size_t joined_size(const std::vector<std::string>& parts) {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.size();
    if (!parts.empty()) n += 2 * (parts.size() - 1);
    return n;
}

} // namespace

std::string to_string(ContextMode mode) {
    switch (mode) {
        case ContextMode::NoContext: return "no_context";
        case ContextMode::FullLesson: return "full_lesson";
        case ContextMode::RagOnly: return "rag_only";
        case ContextMode::RagPlusLesson: return "rag_plus_lesson";
    }
    throw ConfigError("invalid context mode value");
}

ContextMode context_mode_from_string(const std::string& s) {
    if (s == "no_context") return ContextMode::NoContext;
    if (s == "full_lesson") return ContextMode::FullLesson;
    if (s == "rag_only") return ContextMode::RagOnly;
    if (s == "rag_plus_lesson") return ContextMode::RagPlusLesson;
    throw ConfigError("unknown context mode '" + s + "'");
}

int estimate_tokens(const std::string& text, int chars_per_token) {
    if (chars_per_token < 1) throw ConfigError("chars_per_token must be at least 1");
    auto r = static_cast<std::size_t>(chars_per_token);
    return static_cast<int>((text.size() + r - 1) / r);
}

std::string render_options(const Question& q) {
    std::string out;
    for (const Option& o : q.options) {
        if (!out.empty()) out += ' ';
        out += '(' + o.label + ") " + o.text;
    }
    return out;
}

std::string render_gold_answer(const Question& q) {
    return '(' + q.gold_label + ") " + q.gold_text();
}

const std::string& system_block() { return kSystemBlock; }

std::string prompt_template() {
    return pre_context() + "{context}" + kPreQuestion + "{question}" +
           kPreOptions + "{options}" + kPostOptions + "{answer}" + kEos;
}

ContextResult assemble_context(ContextMode mode, const std::string& lesson_text,
                               const RetrievedContext* retrieved,
                               const Dataset& ds, const Question& q,
                               const TokenBudget& budget) {
    check_budget(budget);
    const bool wants_rag =
        mode == ContextMode::RagOnly || mode == ContextMode::RagPlusLesson;
    if (wants_rag && retrieved == nullptr) {
        throw ConfigError("context mode '" + to_string(mode) +
                          "' requires retrieval results");
    }

    // Everything except the context is fixed once the question is known, so
    // the char budget for context is what the token budget leaves over.
    const std::string empty_prompt =
        pre_context() + kPreQuestion + q.stem + kPreOptions + render_options(q) +
        kPostOptions;
    const int overhead = estimate_tokens(empty_prompt, budget.chars_per_token);
    const int spare = budget.max_tokens - budget.reserved_for_answer - overhead;
    if (spare < 0) {
        throw BudgetUnsatisfiable(
            "question " + q.question_id + " needs " + std::to_string(overhead) +
            " tokens before any context; budget leaves " +
            std::to_string(budget.max_tokens - budget.reserved_for_answer));
    }
    const auto budget_chars = static_cast<std::size_t>(spare) *
                              static_cast<std::size_t>(budget.chars_per_token);

    // Parts in final order: retrieved chunks by rank, then the lesson.
    std::vector<std::string> parts;
    std::vector<std::string> ids; // parallel; empty string marks the lesson
    if (wants_rag) {
        for (const SearchHit& h : retrieved->hits) {
            const Topic& t = ds.topic(h.topic_id);
            if (t.text.empty()) continue;
            parts.push_back(t.text);
            ids.push_back(h.topic_id);
        }
    }
    bool lesson_present = false;
    if ((mode == ContextMode::FullLesson || mode == ContextMode::RagPlusLesson) &&
        !lesson_text.empty()) {
        parts.push_back(lesson_text);
        ids.emplace_back();
        lesson_present = true;
    }

    // Shrink until the context fits: lesson tail, then whole chunks from the
    // lowest rank up, then the tail of the last remaining chunk.
    bool truncated = false;
    while (joined_size(parts) > budget_chars) {
        truncated = true;
        const std::size_t over = joined_size(parts) - budget_chars;
        if (lesson_present) {
            if (parts.back().size() > over) {
                parts.back().resize(parts.back().size() - over);
                break;
            }
            parts.pop_back();
            ids.pop_back();
            lesson_present = false;
            continue;
        }
        if (parts.size() > 1) {
            parts.pop_back();
            ids.pop_back();
            continue;
        }
        if (budget_chars == 0) {
            parts.clear();
            ids.clear();
        } else {
            parts.back().resize(budget_chars);
        }
        break;
    }

    ContextResult out;
    out.truncated = truncated;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!out.context.empty()) out.context += "\n\n";
        out.context += parts[i];
        if (!ids[i].empty()) out.chunks_used.push_back(ids[i]);
    }
    return out;
}

AssembledPrompt build_prompt(const Question& q, const ContextResult& context,
                             const std::optional<std::string>& gold_label,
                             const TokenBudget& budget) {
    AssembledPrompt out;
    out.text = pre_context() + context.context + kPreQuestion + q.stem +
               kPreOptions + render_options(q) + kPostOptions;
    if (gold_label) {
        const Option* opt = q.find_option(*gold_label);
        if (opt == nullptr) {
            throw UnknownIdError("label '" + *gold_label +
                                 "' is not an option of " + q.question_id);
        }
        out.text += '(' + opt->label + ") " + opt->text + kEos;
    }
    out.context_chars = context.context.size();
    out.chunks_used = context.chunks_used;
    out.truncated = context.truncated;
    out.est_tokens = estimate_tokens(out.text, budget.chars_per_token);
    return out;
}

AssembledPrompt build_prompt(const Question& q, const std::string& context,
                             const std::optional<std::string>& gold_label,
                             const TokenBudget& budget) {
    ContextResult ctx;
    ctx.context = context;
    return build_prompt(q, ctx, gold_label, budget);
}

std::string training_line(const Question& q, const ContextResult& context) {
    nlohmann::json line;
    line["prompt"] = build_prompt(q, context).text;
    line["answer"] = render_gold_answer(q);
    return line.dump() + "\n";
}

} // namespace tqa
