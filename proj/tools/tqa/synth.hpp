#pragma once

#include <string>

#include "tqa/corpus.hpp"

namespace tqa::tools {

struct SyntheticCorpus {
    Dataset dataset;
    // scripted replies for the stub model, keyed on question stems; the
    // pattern mixes correct, wrong-label and unparsable answers
    std::string stub_script;
};

/// Fixed 20-lesson corpus: 100 topics, 200 questions (4 TF + 6 MC per
/// lesson), lessons 1-12 train / 13-16 validation / 17-20 test. Output is
/// identical on every call; there is no seed.
SyntheticCorpus make_synthetic_corpus();

} // namespace tqa::tools
