#pragma once

#include <string>

#include "tqa/eval.hpp"

namespace tqa {

// Canonical JSON for an EvalConfig: every field present, keys sorted, compact.
// This string (not the file the user wrote) is what config_hash() digests, so
// two configs that differ only in formatting or field order hash the same.
std::string eval_config_to_json(const EvalConfig& cfg);

// Strict parse: unknown keys anywhere in the document are ConfigError, so a
// typo cannot silently fall back to a default. Missing keys take defaults.
// The parsed config is validated before it is returned.
EvalConfig eval_config_from_json(const std::string& text);

std::string config_hash(const EvalConfig& cfg);

// A single-run specification: where inputs live, where output goes, and the
// eval config. Path fields may stay empty and be filled in by the caller
// (the CLI lets flags override them).
struct RunSpec {
    std::string corpus_path;
    CorpusFormat corpus_format = CorpusFormat::Normalized;
    std::string index_path;
    std::string out_dir;
    EvalConfig eval;
};

RunSpec load_run_spec(const std::string& path);

// Ablation file shape: {"defaults": {<eval config fields>}, "rows": [...]}.
// Each row deep-merges over the defaults (objects merge, scalars replace)
// and must end up a valid EvalConfig. Paths live outside this file on
// purpose: the committed canonical matrix must not pin anyone's filesystem.
AblationMatrix load_ablation_matrix(const std::string& path);

} // namespace tqa
