// tqa: operator CLI binding the engine modules into reproducible commands.
//
// Exit codes: 0 success, 2 configuration or data errors, 3 I/O errors,
// 4 provider errors, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "tqa/corpus.hpp"
#include "tqa/embedder.hpp"
#include "tqa/errors.hpp"
#include "tqa/eval.hpp"
#include "tqa/generation.hpp"
#include "tqa/promptgen.hpp"
#include "tqa/retrieval.hpp"
#include "tqa/run_config.hpp"
#include "tqa/vectorstore.hpp"
#include "tqa/version.hpp"

#include "synth.hpp"

namespace fs = std::filesystem;
using namespace tqa;

namespace {

int code_for(const Error& e) {
    if (dynamic_cast<const ProviderUnavailable*>(&e) ||
        dynamic_cast<const AuthError*>(&e) ||
        dynamic_cast<const MalformedServiceResponse*>(&e)) {
        return 4;
    }
    if (dynamic_cast<const IoError*>(&e) ||
        dynamic_cast<const FormatVersionError*>(&e) ||
        dynamic_cast<const ChecksumError*>(&e) ||
        dynamic_cast<const CacheCorruption*>(&e)) {
        return 3;
    }
    return 2; // every remaining engine error is a config or data problem
}

template <typename Fn> int run_guarded(Fn&& fn) {
    try {
        fn();
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

bool is_stub_endpoint(const std::string& endpoint) {
    return endpoint.rfind("stub:", 0) == 0;
}

// --offline means: local embeddings and stub endpoints only, checked before
// any work starts
void enforce_offline(const EvalConfig& cfg) {
    if (cfg.embedder.provider != EmbedderProvider::DeterministicLocal) {
        throw ConfigError("--offline requires the deterministic_local embedder");
    }
    if (!is_stub_endpoint(cfg.model.endpoint)) {
        throw ConfigError("--offline forbids model endpoint '" +
                          cfg.model.endpoint + "'; use a stub: endpoint");
    }
    if (cfg.retrieval && cfg.rerank &&
        !is_stub_endpoint(cfg.retrieval->rerank_endpoint)) {
        throw ConfigError("--offline forbids rerank endpoint '" +
                          cfg.retrieval->rerank_endpoint +
                          "'; use a stub: endpoint");
    }
}

struct CorpusArgs {
    std::string path;
    std::string format = "normalized";

    Dataset load() const {
        return load_dataset(path, corpus_format_from_string(format));
    }
};

void add_corpus_flags(CLI::App* cmd, CorpusArgs& args) {
    cmd->add_option("--corpus", args.path, "corpus file or directory")
        ->required();
    cmd->add_option("--corpus-format", args.format,
                    "corpus layout: normalized or native_ck12");
}

struct EmbedderArgs {
    std::string provider = "deterministic_local";
    std::string model_id;
    std::size_t dim = 0; // 0: command default (index: 256, ask: the index's)
    std::string endpoint;
    std::string cache_dir;
    bool embed_titles = false;

    EmbedderConfig config(std::size_t default_dim) const {
        EmbedderConfig cfg;
        cfg.provider = embedder_provider_from_string(provider);
        if (!model_id.empty()) cfg.model_id = model_id;
        cfg.dim = dim == 0 ? default_dim : dim;
        cfg.endpoint = endpoint;
        cfg.cache_dir = cache_dir;
        cfg.embed_topic_titles = embed_titles;
        return cfg;
    }
};

void add_embedder_flags(CLI::App* cmd, EmbedderArgs& args) {
    cmd->add_option("--embed-provider", args.provider,
                    "deterministic_local or remote_http");
    cmd->add_option("--embed-model", args.model_id, "embedding model id");
    cmd->add_option("--dim", args.dim,
                    "embedding dimension (default: 256, or the index's)");
    cmd->add_option("--embed-endpoint", args.endpoint,
                    "embeddings endpoint for remote_http");
    cmd->add_option("--cache-dir", args.cache_dir,
                    "embedding cache directory (empty disables)");
    cmd->add_flag("--embed-titles", args.embed_titles,
                  "prefix topic titles onto indexed chunks");
}

// ---------------------------------------------------------------- ingest --

int cmd_ingest(const CorpusArgs& corpus, const std::string& out_dir,
               const std::string& manifest, bool check_ck12) {
    Dataset ds = corpus.load();
    const LoadSummary& summary = ds.load_summary();
    if (summary.diagram_questions_dropped > 0) {
        std::cout << "dropped " << summary.diagram_questions_dropped
                  << " diagram questions\n";
    }

    std::optional<SplitStats> expected;
    if (!manifest.empty()) expected = stats_from_manifest(manifest);
    else if (check_ck12) expected = ck12_reference_stats();
    ValidationReport report = validate_dataset(ds, expected);
    std::cout << render_validation(report);

    if (!out_dir.empty()) {
        for (const fs::path& file : save_normalized(ds, out_dir)) {
            std::cout << "wrote " << file.string() << "\n";
        }
    }
    if (report.compared && !report.all_match()) {
        throw ConfigError("corpus does not match the expected statistics");
    }
    return 0;
}

// ----------------------------------------------------------------- index --

int cmd_index(const CorpusArgs& corpus, const EmbedderArgs& embedder_args,
              const std::string& out_path, bool offline) {
    EmbedderConfig cfg = embedder_args.config(256);
    if (offline && cfg.provider != EmbedderProvider::DeterministicLocal) {
        throw ConfigError("--offline requires the deterministic_local embedder");
    }
    Dataset ds = corpus.load();

    std::vector<std::string> texts;
    texts.reserve(ds.topics().size());
    for (const Topic& t : ds.topics()) {
        texts.push_back(cfg.embed_topic_titles ? t.title + "\n\n" + t.text
                                               : t.text);
    }
    Embedder embedder(cfg);
    std::vector<EmbeddingVector> vecs = embedder.embed(texts);

    std::vector<IndexEntry> entries;
    entries.reserve(vecs.size());
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        const Topic& t = ds.topics()[i];
        entries.push_back({t.topic_id, t.lesson_id, std::move(vecs[i])});
    }
    VectorIndex index = VectorIndex::build(std::move(entries), cfg.model_id);
    save_index(index, out_path);

    CacheStats cache = embedder.cache_stats();
    std::cout << "indexed " << index.size() << " topics (dim " << index.dim()
              << ", model " << index.model_id() << ") -> " << out_path << "\n";
    if (cache.hits + cache.misses > 0) {
        std::cout << "cache: " << cache.hits << " hits, " << cache.misses
                  << " misses\n";
    }
    return 0;
}

// ------------------------------------------------------------------- ask --

struct AskArgs {
    CorpusArgs corpus;
    EmbedderArgs embedder;
    std::string question_id;
    std::string text;
    std::string mode = "no_context";
    std::string index_path;
    std::size_t top_k = 5;
    std::string metric = "dot";
    bool rerank = false;
    std::string rerank_endpoint;
    std::string model_endpoint;
    std::string model_id = "llama-2";
    bool show_prompt = false;
    bool show_trace = false;
};

int cmd_ask(const AskArgs& args, bool offline) {
    if (args.question_id.empty() == args.text.empty()) {
        throw ConfigError("pass exactly one of --id or --text");
    }
    Dataset ds = args.corpus.load();

    Question adhoc;
    const Question* q = nullptr;
    if (!args.question_id.empty()) {
        q = &ds.question(args.question_id);
    } else {
        adhoc.question_id = "ADHOC_0001";
        adhoc.kind = QuestionKind::MultipleChoice;
        adhoc.stem = args.text;
        q = &adhoc;
    }

    ContextMode mode = context_mode_from_string(args.mode);
    const bool rag =
        mode == ContextMode::RagOnly || mode == ContextMode::RagPlusLesson;
    const bool needs_lesson =
        mode == ContextMode::FullLesson || mode == ContextMode::RagPlusLesson;
    if (needs_lesson && q->lesson_id.empty()) {
        throw ConfigError("lesson context needs a question from the corpus; "
                          "--text questions have no lesson");
    }

    std::optional<RetrievedContext> retrieved;
    std::optional<VectorIndex> index;
    if (rag) {
        if (args.index_path.empty()) {
            throw ConfigError("mode " + args.mode + " needs --index");
        }
        index = load_index(args.index_path);
        EmbedderConfig ecfg = args.embedder.config(index->dim());
        if (args.embedder.model_id.empty()) {
            ecfg.model_id = index->model_id(); // follow the index by default
        }
        if (offline && ecfg.provider != EmbedderProvider::DeterministicLocal) {
            throw ConfigError(
                "--offline requires the deterministic_local embedder");
        }
        Embedder embedder(ecfg);
        RetrievalConfig rcfg;
        rcfg.top_k = args.top_k;
        rcfg.metric = metric_from_string(args.metric);
        rcfg.rerank = args.rerank;
        rcfg.rerank_endpoint = args.rerank_endpoint;
        if (args.rerank && rcfg.rerank_candidates < rcfg.top_k) {
            rcfg.rerank_candidates = rcfg.top_k * 2;
        }
        if (offline && args.rerank && !is_stub_endpoint(rcfg.rerank_endpoint)) {
            throw ConfigError("--offline forbids rerank endpoint '" +
                              rcfg.rerank_endpoint + "'");
        }
        retrieved = retrieve(*q, *index, embedder, rcfg, ds);
    }

    std::string lesson = needs_lesson ? lesson_text(ds, q->lesson_id) : "";
    ContextResult ctx = assemble_context(
        mode, lesson, retrieved ? &*retrieved : nullptr, ds, *q, TokenBudget{});
    AssembledPrompt prompt = build_prompt(*q, ctx);
    if (args.show_prompt) {
        std::cout << prompt.text << "\n";
    }

    QuestionTrace trace;
    trace.config_name = "ask";
    trace.question_id = q->question_id;
    trace.lesson_id = q->lesson_id;
    trace.kind = q->kind;
    trace.context_mode = mode;
    trace.truncated = ctx.truncated;
    if (retrieved) {
        for (const SearchHit& h : retrieved->hits) {
            trace.retrieved.push_back({h.topic_id, h.score, h.rank});
        }
        trace.rerank_applied = retrieved->rerank_applied;
        trace.in_lesson = retrieved->in_lesson;
    }

    if (!args.model_endpoint.empty()) {
        if (offline && !is_stub_endpoint(args.model_endpoint)) {
            throw ConfigError("--offline forbids model endpoint '" +
                              args.model_endpoint + "'");
        }
        ModelClientConfig mcfg;
        mcfg.endpoint = args.model_endpoint;
        mcfg.model_id = args.model_id;
        ModelResponse resp = generate(mcfg, prompt);
        ParsedAnswer parsed = parse_answer(resp, *q);
        trace.raw_model_text = resp.text;
        trace.predicted_label = parsed.predicted_label;
        trace.parse_status = parsed.parse_status;
        trace.gold_label = q->gold_label;
        trace.correct = parsed.predicted_label &&
                        !q->gold_label.empty() &&
                        *parsed.predicted_label == q->gold_label;

        std::cout << "model: " << resp.text << "\n";
        if (parsed.predicted_label) {
            const Option* opt = q->find_option(*parsed.predicted_label);
            std::cout << "parsed: (" << *parsed.predicted_label << ") "
                      << (opt ? opt->text : "") << " ["
                      << to_string(parsed.parse_status) << "]\n";
        } else {
            std::cout << "parsed: [unparsable]\n";
        }
        if (!q->gold_label.empty()) {
            std::cout << (trace.correct ? "correct\n" : "incorrect\n");
        }
    }

    if (args.show_trace) {
        if (args.question_id.empty()) {
            throw ConfigError("--trace needs a question from the corpus");
        }
        std::cout << render_trace(trace, ds);
    }
    return 0;
}

// ------------------------------------------------------------------ eval --

int cmd_eval(const std::string& config_path, const std::string& out_override,
             std::optional<int> concurrency, std::optional<int> limit,
             bool offline) {
    RunSpec spec = load_run_spec(config_path);
    if (!out_override.empty()) spec.out_dir = out_override;
    if (concurrency) spec.eval.concurrency = *concurrency;
    if (limit) spec.eval.question_limit = *limit;
    validate(spec.eval);
    if (offline) enforce_offline(spec.eval);

    Dataset ds = load_dataset(spec.corpus_path, spec.corpus_format);
    std::optional<VectorIndex> index;
    const bool rag = spec.eval.context_mode == ContextMode::RagOnly ||
                     spec.eval.context_mode == ContextMode::RagPlusLesson;
    if (rag) {
        if (spec.index_path.empty()) {
            throw ConfigError("config " + config_path +
                              " uses retrieval but sets no index_path");
        }
        index = load_index(spec.index_path);
    }

    EvalReport report =
        run_eval(ds, spec.eval, index ? &*index : nullptr, spec.out_dir);
    std::cout << render_report(report);
    if (!spec.out_dir.empty()) {
        std::cout << "artifacts: " << spec.out_dir << "/" << spec.eval.name
                  << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- ablation --

int cmd_ablation(const std::string& matrix_path, const CorpusArgs& corpus,
                 const std::string& index_path, const std::string& out_dir,
                 bool offline) {
    AblationMatrix matrix = load_ablation_matrix(matrix_path);
    if (offline) {
        for (const EvalConfig& row : matrix.rows) enforce_offline(row);
    }

    Dataset ds = corpus.load();
    std::optional<VectorIndex> index;
    for (const EvalConfig& row : matrix.rows) {
        if (row.context_mode == ContextMode::RagOnly ||
            row.context_mode == ContextMode::RagPlusLesson) {
            if (index_path.empty()) {
                throw ConfigError("row " + row.name +
                                  " uses retrieval but no --index was given");
            }
            index = load_index(index_path);
            break;
        }
    }

    std::vector<AblationOutcome> outcomes =
        run_ablation(ds, matrix, index ? &*index : nullptr, out_dir);
    std::string table = render_comparison(outcomes);
    std::cout << table;
    if (!out_dir.empty()) {
        std::ofstream txt(out_dir + "/comparison.txt");
        txt << table;
        std::ofstream csv(out_dir + "/comparison.csv");
        csv << comparison_csv(outcomes);
        std::cout << "artifacts: " << out_dir << "/comparison.{txt,csv}\n";
    }
    for (const AblationOutcome& o : outcomes) {
        if (!o.error.empty()) {
            throw ConfigError("row " + o.name + " failed: " + o.error);
        }
    }
    return 0;
}

// ----------------------------------------------------------------- stats --

int cmd_stats(const std::string& path) {
    fs::path traces_path = path;
    if (fs::is_directory(traces_path)) traces_path /= "traces.jsonl";
    std::ifstream in(traces_path);
    if (!in) {
        throw IoError("cannot open " + traces_path.string());
    }

    std::map<ParseStatus, std::size_t> histogram;
    std::size_t total = 0, correct = 0, with_retrieval = 0, in_lesson = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        QuestionTrace t = trace_from_jsonl(line);
        ++total;
        ++histogram[t.parse_status];
        if (t.correct) ++correct;
        if (t.in_lesson) {
            ++with_retrieval;
            if (*t.in_lesson) ++in_lesson;
        }
    }
    if (total == 0) {
        throw EmptyInputError(traces_path.string() + " holds no traces");
    }

    std::cout << "traces: " << total << "\n";
    std::cout << "correct: " << correct << "\n";
    for (ParseStatus s :
         {ParseStatus::ExactLabel, ParseStatus::LabelInText,
          ParseStatus::TextMatch, ParseStatus::Unparsable}) {
        std::cout << to_string(s) << ": " << histogram[s] << "\n";
    }
    if (with_retrieval > 0) {
        std::ostringstream rate;
        rate << static_cast<double>(in_lesson) /
                    static_cast<double>(with_retrieval);
        std::cout << "in_lesson_rate: " << rate.str() << " (" << in_lesson
                  << "/" << with_retrieval << ")\n";
    }
    return 0;
}

// ----------------------------------------------------------------- synth --

int cmd_synth(const std::string& out_dir) {
    tools::SyntheticCorpus corpus = tools::make_synthetic_corpus();
    fs::create_directories(out_dir);
    for (const fs::path& file : save_normalized(corpus.dataset, out_dir)) {
        std::cout << "wrote " << file.string() << "\n";
    }
    const fs::path manifest = fs::path(out_dir) / "manifest.json";
    write_stats_manifest(compute_stats(corpus.dataset), manifest);
    std::cout << "wrote " << manifest.string() << "\n";

    const fs::path script = fs::path(out_dir) / "stub_script.json";
    std::ofstream out(script, std::ios::binary);
    out << corpus.stub_script;
    if (!out) {
        throw IoError("cannot write " + script.string());
    }
    std::cout << "wrote " << script.string() << "\n";
    std::cout << render_stats(compute_stats(corpus.dataset));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"textbook QA engine"};
    app.set_version_flag("--version", std::string(kEngineVersion));
    app.require_subcommand(1);
    bool offline = false;
    app.add_flag("--offline", offline,
                 "forbid network use: deterministic_local embeddings and "
                 "stub: endpoints only");

    // ingest
    auto* ingest = app.add_subcommand(
        "ingest", "load a corpus, report statistics, optionally re-emit "
                  "the normalized layout");
    CorpusArgs ingest_corpus;
    std::string ingest_out, ingest_manifest;
    bool ingest_ck12 = false;
    add_corpus_flags(ingest, ingest_corpus);
    ingest->add_option("--out", ingest_out, "directory for normalized output");
    ingest->add_option("--manifest", ingest_manifest,
                       "expected statistics to validate against");
    ingest->add_flag("--expect-ck12", ingest_ck12,
                     "validate against the published CK12 release counts");

    // index
    auto* index_cmd = app.add_subcommand(
        "index", "embed every topic and save the vector index");
    CorpusArgs index_corpus;
    EmbedderArgs index_embedder;
    std::string index_out = "index.tqa";
    add_corpus_flags(index_cmd, index_corpus);
    add_embedder_flags(index_cmd, index_embedder);
    index_cmd->add_option("--out", index_out, "index file to write");

    // ask
    auto* ask = app.add_subcommand("ask", "answer one question end to end");
    AskArgs ask_args;
    add_corpus_flags(ask, ask_args.corpus);
    add_embedder_flags(ask, ask_args.embedder);
    ask->add_option("--id", ask_args.question_id, "question id from the corpus");
    ask->add_option("--text", ask_args.text, "free-text question");
    ask->add_option("--mode", ask_args.mode,
                    "no_context, full_lesson, rag_only or rag_plus_lesson");
    ask->add_option("--index", ask_args.index_path, "vector index file");
    ask->add_option("--top-k", ask_args.top_k, "retrieved chunk count");
    ask->add_option("--metric", ask_args.metric, "dot or cosine");
    ask->add_flag("--rerank", ask_args.rerank, "re-rank retrieved chunks");
    ask->add_option("--rerank-endpoint", ask_args.rerank_endpoint,
                    "rerank service (stub:overlap, stub:reverse, stub:equal "
                    "or a URL)");
    ask->add_option("--model-endpoint", ask_args.model_endpoint,
                    "chat endpoint, stub:fixed:<text> or stub://<script>; "
                    "omit to skip generation");
    ask->add_option("--model-id", ask_args.model_id, "model name to request");
    ask->add_flag("--show-prompt", ask_args.show_prompt,
                  "print the assembled prompt");
    ask->add_flag("--trace", ask_args.show_trace,
                  "print the retrieval trace block");

    // eval
    auto* eval_cmd = app.add_subcommand(
        "eval", "run one evaluation described by a config file");
    std::string eval_config, eval_out;
    std::optional<int> eval_concurrency, eval_limit;
    eval_cmd->add_option("--config", eval_config, "run config file")
        ->required();
    eval_cmd->add_option("--out", eval_out, "override the config's out_dir");
    eval_cmd->add_option("--concurrency", eval_concurrency,
                         "override worker count");
    eval_cmd->add_option("--question-limit", eval_limit,
                         "override the question cap");

    // ablation
    auto* ablation = app.add_subcommand(
        "ablation", "run every row of a config matrix and compare");
    CorpusArgs ablation_corpus;
    std::string ablation_matrix, ablation_index, ablation_out;
    ablation->add_option("--config", ablation_matrix, "matrix file")
        ->required();
    add_corpus_flags(ablation, ablation_corpus);
    ablation->add_option("--index", ablation_index, "vector index file");
    ablation->add_option("--out", ablation_out, "directory for artifacts");

    // stats
    auto* stats = app.add_subcommand(
        "stats", "summarize a trace log: parse statuses and in-lesson rate");
    std::string stats_path;
    stats->add_option("path", stats_path, "traces.jsonl or a run directory")
        ->required();

    // synth
    auto* synth = app.add_subcommand(
        "synth", "write the bundled synthetic corpus, manifest and stub "
                 "script");
    std::string synth_out = "data/synthetic";
    synth->add_option("--out", synth_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // bad flags are config errors
    }

    if (ingest->parsed()) {
        return run_guarded([&] {
            cmd_ingest(ingest_corpus, ingest_out, ingest_manifest, ingest_ck12);
        });
    }
    if (index_cmd->parsed()) {
        return run_guarded([&] {
            cmd_index(index_corpus, index_embedder, index_out, offline);
        });
    }
    if (ask->parsed()) {
        return run_guarded([&] { cmd_ask(ask_args, offline); });
    }
    if (eval_cmd->parsed()) {
        return run_guarded([&] {
            cmd_eval(eval_config, eval_out, eval_concurrency, eval_limit,
                     offline);
        });
    }
    if (ablation->parsed()) {
        return run_guarded([&] {
            cmd_ablation(ablation_matrix, ablation_corpus, ablation_index,
                         ablation_out, offline);
        });
    }
    if (stats->parsed()) {
        return run_guarded([&] { cmd_stats(stats_path); });
    }
    if (synth->parsed()) {
        return run_guarded([&] { cmd_synth(synth_out); });
    }
    return 2;
}
