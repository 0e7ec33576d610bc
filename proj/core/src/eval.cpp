#include "tqa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "tqa/errors.hpp"
#include "tqa/run_config.hpp"
#include "tqa/version.hpp"

#include "internal/binio.hpp"
#include "internal/hash.hpp"

namespace tqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool uses_retrieval(ContextMode mode) {
    return mode == ContextMode::RagOnly || mode == ContextMode::RagPlusLesson;
}

bool uses_lesson(ContextMode mode) {
    return mode == ContextMode::FullLesson || mode == ContextMode::RagPlusLesson;
}

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
    return buf;
}

// shortest round-trip decimal form, for the full-precision CSV
std::string full_precision(double v) { return json(v).dump(); }

std::string iso_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

json require_key(const json& doc, const char* key, const char* what) {
    if (!doc.contains(key)) {
        throw ParseError(std::string(what) + ": missing field '" + key + "'");
    }
    return doc.at(key);
}

} // namespace

void validate(const EvalConfig& cfg) {
    if (cfg.name.empty()) throw ConfigError("eval config name is empty");
    if (cfg.name.find('/') != std::string::npos) {
        throw ConfigError("eval config name must not contain '/': " + cfg.name);
    }
    if (cfg.concurrency < 1) throw ConfigError("concurrency must be >= 1");
    if (cfg.question_limit && *cfg.question_limit < 1) {
        throw ConfigError("question_limit must be >= 1 when set");
    }
    if (cfg.budget.max_tokens < 1 || cfg.budget.reserved_for_answer < 1 ||
        cfg.budget.chars_per_token < 1) {
        throw ConfigError("token budget fields must be positive");
    }
    if (cfg.budget.reserved_for_answer >= cfg.budget.max_tokens) {
        throw ConfigError("reserved_for_answer must be below max_tokens");
    }
    if (uses_retrieval(cfg.context_mode) && !cfg.retrieval) {
        throw ConfigError("context mode '" + to_string(cfg.context_mode) +
                          "' requires a retrieval config");
    }
    if (cfg.rerank && !cfg.retrieval) {
        throw ConfigError("rerank requires a retrieval config");
    }
    if (cfg.retrieval) {
        if (cfg.retrieval->top_k < 1) throw ConfigError("top_k must be >= 1");
        if (cfg.rerank && cfg.retrieval->rerank_candidates < cfg.retrieval->top_k) {
            throw ConfigError("rerank_candidates must be >= top_k");
        }
    }
    if (cfg.model.endpoint.empty()) throw ConfigError("model endpoint is empty");
}

RetrievalConfig effective_retrieval(const EvalConfig& cfg) {
    if (!cfg.retrieval) {
        throw ConfigError("eval config '" + cfg.name + "' has no retrieval");
    }
    RetrievalConfig r = *cfg.retrieval;
    r.rerank = cfg.rerank;
    return r;
}

std::string trace_to_jsonl(const QuestionTrace& trace) {
    json hits = json::array();
    for (const TraceHit& h : trace.retrieved) {
        hits.push_back(
            {{"topic_id", h.topic_id}, {"score", h.score}, {"rank", h.rank}});
    }
    json doc{
        {"config_name", trace.config_name},
        {"question_id", trace.question_id},
        {"lesson_id", trace.lesson_id},
        {"kind", std::string(to_string(trace.kind))},
        {"context_mode", to_string(trace.context_mode)},
        {"retrieved", hits},
        {"rerank_applied", trace.rerank_applied},
        {"in_lesson", trace.in_lesson ? json(*trace.in_lesson) : json()},
        {"prompt_sha256", trace.prompt_sha256},
        {"truncated", trace.truncated},
        {"raw_model_text", trace.raw_model_text},
        {"predicted_label",
         trace.predicted_label ? json(*trace.predicted_label) : json()},
        {"parse_status", to_string(trace.parse_status)},
        {"gold_label", trace.gold_label},
        {"correct", trace.correct},
    };
    return doc.dump();
}

QuestionTrace trace_from_jsonl(const std::string& line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("trace line is not JSON: ") + e.what());
    }
    try {
        QuestionTrace t;
        t.config_name = require_key(doc, "config_name", "trace").get<std::string>();
        t.question_id = require_key(doc, "question_id", "trace").get<std::string>();
        t.lesson_id = require_key(doc, "lesson_id", "trace").get<std::string>();
        t.kind = question_kind_from_string(
            require_key(doc, "kind", "trace").get<std::string>());
        t.context_mode = context_mode_from_string(
            require_key(doc, "context_mode", "trace").get<std::string>());
        for (const json& h : require_key(doc, "retrieved", "trace")) {
            TraceHit hit;
            hit.topic_id = require_key(h, "topic_id", "trace hit").get<std::string>();
            hit.score = require_key(h, "score", "trace hit").get<double>();
            hit.rank = require_key(h, "rank", "trace hit").get<std::size_t>();
            t.retrieved.push_back(std::move(hit));
        }
        t.rerank_applied = require_key(doc, "rerank_applied", "trace").get<bool>();
        if (!doc.at("in_lesson").is_null()) {
            t.in_lesson = doc.at("in_lesson").get<bool>();
        }
        t.prompt_sha256 =
            require_key(doc, "prompt_sha256", "trace").get<std::string>();
        t.truncated = require_key(doc, "truncated", "trace").get<bool>();
        t.raw_model_text =
            require_key(doc, "raw_model_text", "trace").get<std::string>();
        if (!doc.at("predicted_label").is_null()) {
            t.predicted_label = doc.at("predicted_label").get<std::string>();
        }
        t.parse_status = parse_status_from_string(
            require_key(doc, "parse_status", "trace").get<std::string>());
        t.gold_label = require_key(doc, "gold_label", "trace").get<std::string>();
        t.correct = require_key(doc, "correct", "trace").get<bool>();
        return t;
    } catch (const json::exception& e) {
        throw ParseError(std::string("trace line malformed: ") + e.what());
    }
}

AccuracySummary accuracy(const std::vector<QuestionTrace>& traces) {
    if (traces.empty()) throw EmptyInputError("accuracy over zero traces");
    AccuracySummary out;
    AccuracyCell tf, mc;
    for (const QuestionTrace& t : traces) {
        AccuracyCell& cell = t.kind == QuestionKind::TrueFalse ? tf : mc;
        ++cell.total;
        ++out.all.total;
        if (t.correct) {
            ++cell.correct;
            ++out.all.correct;
        }
    }
    auto finish = [](AccuracyCell& c) {
        c.accuracy = static_cast<double>(c.correct) / static_cast<double>(c.total);
    };
    finish(out.all);
    if (tf.total > 0) {
        finish(tf);
        out.tf = tf;
    }
    if (mc.total > 0) {
        finish(mc);
        out.mc = mc;
    }
    return out;
}

std::string report_to_json(const EvalReport& report, const RunManifest& manifest) {
    auto cell = [](const std::optional<AccuracyCell>& c) {
        if (!c) return json();
        return json{{"total", c->total},
                    {"correct", c->correct},
                    {"accuracy", c->accuracy}};
    };
    json doc{
        {"config_name", report.config_name},
        {"engine_version", manifest.engine_version},
        {"config_hash", manifest.config_hash},
        {"corpus_hash", manifest.corpus_hash},
        {"index_model_id", manifest.index_model_id},
        {"question_count", report.acc.all.total},
        {"tf", cell(report.acc.tf)},
        {"mc", cell(report.acc.mc)},
        {"all", cell(std::optional<AccuracyCell>(report.acc.all))},
        {"unparsable", report.unparsable},
        {"in_lesson_rate",
         report.in_lesson_rate ? json(*report.in_lesson_rate) : json()},
    };
    return doc.dump(2) + "\n";
}

namespace {

// Shared state of one run's worker pool.
struct RunState {
    std::mutex mu;
    std::map<std::string, QuestionTrace> done; // keyed by question_id
    std::ofstream partial;
    bool persisting = false;
    std::exception_ptr first_error;
    std::atomic<bool> stop{false};
    std::atomic<std::size_t> next{0};
};

void load_trace_file(const fs::path& path, const std::string& config_name,
                     std::map<std::string, QuestionTrace>& done) {
    if (!fs::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read trace file " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        QuestionTrace t = trace_from_jsonl(line);
        if (t.config_name != config_name) {
            throw ConfigError("trace file " + path.string() +
                              " belongs to config '" + t.config_name + "'");
        }
        done[t.question_id] = std::move(t);
    }
}

} // namespace

EvalReport run_eval(const Dataset& ds, const EvalConfig& cfg,
                    const VectorIndex* index, const std::string& out_dir) {
    validate(cfg);
    const bool wants_rag = uses_retrieval(cfg.context_mode);
    if (wants_rag && index == nullptr) {
        throw ConfigError("context mode '" + to_string(cfg.context_mode) +
                          "' needs a vector index");
    }
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Question> questions = filter_questions(
        ds, cfg.split,
        {QuestionKind::TrueFalse, QuestionKind::MultipleChoice});
    if (cfg.question_limit &&
        questions.size() > static_cast<std::size_t>(*cfg.question_limit)) {
        questions.resize(static_cast<std::size_t>(*cfg.question_limit));
    }
    if (questions.empty()) {
        throw EmptyInputError("no questions in split '" +
                              std::string(to_string(cfg.split)) + "'");
    }

    RunManifest manifest;
    manifest.engine_version = kEngineVersion;
    manifest.config_hash = config_hash(cfg);
    manifest.corpus_hash = ds.source_hash();
    manifest.index_model_id = index != nullptr ? index->model_id() : "";

    RunState state;
    fs::path run_dir, partial_path, final_path, meta_path;
    if (!out_dir.empty()) {
        state.persisting = true;
        run_dir = fs::path(out_dir) / cfg.name;
        partial_path = run_dir / "traces.partial.jsonl";
        final_path = run_dir / "traces.jsonl";
        meta_path = run_dir / "run_meta.json";
        fs::create_directories(run_dir);

        // refuse to resume on top of a different config or corpus
        if (fs::exists(meta_path)) {
            json meta = json::parse(internal::read_file_bytes(meta_path.string()));
            if (meta.value("config_hash", "") != manifest.config_hash ||
                meta.value("corpus_hash", "") != manifest.corpus_hash) {
                throw ConfigError(run_dir.string() +
                                  " holds a different run; refusing to mix");
            }
        } else {
            json meta{{"config_name", cfg.name},
                      {"config_hash", manifest.config_hash},
                      {"corpus_hash", manifest.corpus_hash},
                      {"engine_version", manifest.engine_version},
                      {"index_model_id", manifest.index_model_id},
                      {"config", json::parse(eval_config_to_json(cfg))},
                      {"started_at", iso_utc_now()}};
            internal::write_file_atomic(meta_path.string(), meta.dump(2) + "\n");
        }

        load_trace_file(final_path, cfg.name, state.done);
        load_trace_file(partial_path, cfg.name, state.done);
        state.partial.open(partial_path, std::ios::app | std::ios::binary);
        if (!state.partial) {
            throw IoError("cannot append to " + partial_path.string());
        }
    }

    // work list: everything not already completed, in question_id order
    std::vector<const Question*> todo;
    for (const Question& q : questions) {
        if (state.done.find(q.question_id) == state.done.end()) {
            todo.push_back(&q);
        }
    }

    std::optional<Embedder> embedder;
    RetrievalConfig rcfg;
    if (wants_rag) {
        embedder.emplace(cfg.embedder);
        rcfg = effective_retrieval(cfg);
    }
    std::unique_ptr<ModelClient> model = ModelClient::create(cfg.model);

    auto eval_one = [&](const Question& q) {
        QuestionTrace tr;
        tr.config_name = cfg.name;
        tr.question_id = q.question_id;
        tr.lesson_id = q.lesson_id;
        tr.kind = q.kind;
        tr.context_mode = cfg.context_mode;
        tr.gold_label = q.gold_label;

        RetrievedContext rc;
        const RetrievedContext* rc_ptr = nullptr;
        if (wants_rag) {
            rc = retrieve(q, *index, *embedder, rcfg, ds);
            rc_ptr = &rc;
            for (const SearchHit& h : rc.hits) {
                tr.retrieved.push_back({h.topic_id, h.score, h.rank});
            }
            tr.rerank_applied = rc.rerank_applied;
            tr.in_lesson = rc.in_lesson;
        }
        const std::string lesson =
            uses_lesson(cfg.context_mode) ? lesson_text(ds, q.lesson_id) : "";
        ContextResult ctx = assemble_context(cfg.context_mode, lesson, rc_ptr,
                                             ds, q, cfg.budget);
        AssembledPrompt prompt = build_prompt(q, ctx, std::nullopt, cfg.budget);
        tr.prompt_sha256 = internal::sha256_hex(prompt.text);
        tr.truncated = prompt.truncated;

        ModelResponse resp = model->complete(prompt.text);
        tr.raw_model_text = resp.text;
        ParsedAnswer parsed = parse_answer(resp, q);
        tr.predicted_label = parsed.predicted_label;
        tr.parse_status = parsed.parse_status;
        tr.correct =
            parsed.predicted_label && *parsed.predicted_label == q.gold_label;
        return tr;
    };

    auto worker = [&] {
        while (!state.stop.load()) {
            const std::size_t i = state.next.fetch_add(1);
            if (i >= todo.size()) break;
            try {
                QuestionTrace tr = eval_one(*todo[i]);
                std::lock_guard lock(state.mu);
                if (state.persisting) {
                    state.partial << trace_to_jsonl(tr) << "\n";
                    state.partial.flush();
                }
                state.done[tr.question_id] = std::move(tr);
            } catch (...) {
                std::lock_guard lock(state.mu);
                if (!state.first_error) {
                    state.first_error = std::current_exception();
                }
                state.stop.store(true);
                break;
            }
        }
    };

    const std::size_t n_workers = std::min<std::size_t>(
        static_cast<std::size_t>(cfg.concurrency), todo.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (state.partial.is_open()) state.partial.close();
    if (state.first_error) {
        // partial traces stay on disk for a later resume
        std::rethrow_exception(state.first_error);
    }

    EvalReport report;
    report.config_name = cfg.name;
    for (const Question& q : questions) {
        auto it = state.done.find(q.question_id);
        if (it == state.done.end()) {
            throw Error("run finished without a trace for " + q.question_id);
        }
        report.traces.push_back(it->second);
    }
    report.acc = accuracy(report.traces);
    int with_in_lesson = 0;
    int in_lesson_hits = 0;
    for (const QuestionTrace& t : report.traces) {
        if (t.parse_status == ParseStatus::Unparsable) ++report.unparsable;
        if (t.in_lesson) {
            ++with_in_lesson;
            if (*t.in_lesson) ++in_lesson_hits;
        }
    }
    if (with_in_lesson > 0) {
        report.in_lesson_rate = static_cast<double>(in_lesson_hits) /
                                static_cast<double>(with_in_lesson);
    }
    report.wall_time_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();

    if (state.persisting) {
        std::string lines;
        for (const QuestionTrace& t : report.traces) {
            lines += trace_to_jsonl(t);
            lines += '\n';
        }
        internal::write_file_atomic(final_path.string(), lines);
        fs::remove(partial_path);
        internal::write_file_atomic((run_dir / "report.json").string(),
                                    report_to_json(report, manifest));
        internal::write_file_atomic((run_dir / "report.txt").string(),
                                    render_report(report));
        json meta{{"config_name", cfg.name},
                  {"config_hash", manifest.config_hash},
                  {"corpus_hash", manifest.corpus_hash},
                  {"engine_version", manifest.engine_version},
                  {"index_model_id", manifest.index_model_id},
                  {"config", json::parse(eval_config_to_json(cfg))},
                  {"finished_at", iso_utc_now()},
                  {"wall_time_ms", report.wall_time_ms}};
        internal::write_file_atomic(meta_path.string(), meta.dump(2) + "\n");
    }
    return report;
}

std::vector<AblationOutcome> run_ablation(const Dataset& ds,
                                          const AblationMatrix& matrix,
                                          const VectorIndex* index,
                                          const std::string& out_dir) {
    if (matrix.rows.empty()) throw EmptyInputError("ablation matrix is empty");
    std::set<std::string> names;
    for (const EvalConfig& row : matrix.rows) {
        if (row.name.empty()) throw ConfigError("ablation row without a name");
        if (!names.insert(row.name).second) {
            throw ConfigError("duplicate ablation row name '" + row.name + "'");
        }
    }
    std::vector<AblationOutcome> outcomes;
    for (const EvalConfig& row : matrix.rows) {
        AblationOutcome outcome;
        outcome.name = row.name;
        try {
            outcome.report = run_eval(ds, row, index, out_dir);
        } catch (const std::exception& e) {
            outcome.error = e.what();
        }
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

const std::vector<std::string>& canonical_row_names() {
    static const std::vector<std::string> names = {
        "LLaMA-2 without fine-tuning",
        "LLaMA-2 with full lesson context (No RAG)",
        "LLaMA-2 with RAG (No Re-ranker)",
        "LLaMA-2 with RAG and full lesson context",
        "LLaMA-2 with RAG + Re-ranker",
    };
    return names;
}

bool covers_canonical_rows(const AblationMatrix& matrix) {
    std::set<std::string> names;
    for (const EvalConfig& row : matrix.rows) names.insert(row.name);
    for (const std::string& want : canonical_row_names()) {
        if (names.find(want) == names.end()) return false;
    }
    return true;
}

std::string render_report(const EvalReport& report) {
    std::ostringstream out;
    out << "config: " << report.config_name << "\n";
    out << "questions: " << report.acc.all.total << "\n";
    auto line = [&](const char* label, const std::optional<AccuracyCell>& c) {
        out << label << ": ";
        if (c) {
            out << percent(c->accuracy) << " (" << c->correct << "/" << c->total
                << ")";
        } else {
            out << "-";
        }
        out << "\n";
    };
    line("tf", report.acc.tf);
    line("mc", report.acc.mc);
    line("all", std::optional<AccuracyCell>(report.acc.all));
    out << "unparsable: " << report.unparsable << "\n";
    if (report.in_lesson_rate) {
        out << "in_lesson_rate: " << percent(*report.in_lesson_rate) << "\n";
    }
    return out.str();
}

std::string render_comparison(const std::vector<AblationOutcome>& outcomes) {
    std::size_t width = 4; // "name"
    for (const AblationOutcome& o : outcomes) {
        width = std::max(width, o.name.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "name"
        << " | tf      | mc      | all     | unparsable | in_lesson\n";
    out << std::string(width, '-')
        << "-+---------+---------+---------+------------+----------\n";
    for (const AblationOutcome& o : outcomes) {
        out << std::left << std::setw(static_cast<int>(width)) << o.name << " | ";
        if (!o.report) {
            out << "ERROR: " << o.error << "\n";
            continue;
        }
        const EvalReport& r = *o.report;
        auto cell = [](const std::optional<AccuracyCell>& c) {
            return c ? percent(c->accuracy) : std::string("-");
        };
        out << std::right << std::setw(7) << cell(r.acc.tf) << " | "
            << std::setw(7) << cell(r.acc.mc) << " | " << std::setw(7)
            << cell(std::optional<AccuracyCell>(r.acc.all)) << " | "
            << std::setw(10) << r.unparsable << " | " << std::setw(9)
            << (r.in_lesson_rate ? percent(*r.in_lesson_rate)
                                 : std::string("-"))
            << "\n";
    }
    return out.str();
}

std::string comparison_csv(const std::vector<AblationOutcome>& outcomes) {
    std::string out =
        "name,questions,tf_accuracy,mc_accuracy,all_accuracy,unparsable,"
        "in_lesson_rate,error\n";
    for (const AblationOutcome& o : outcomes) {
        out += csv_escape(o.name);
        if (o.report) {
            const EvalReport& r = *o.report;
            out += ',' + std::to_string(r.acc.all.total);
            out += ',' + (r.acc.tf ? full_precision(r.acc.tf->accuracy)
                                   : std::string());
            out += ',' + (r.acc.mc ? full_precision(r.acc.mc->accuracy)
                                   : std::string());
            out += ',' + full_precision(r.acc.all.accuracy);
            out += ',' + std::to_string(r.unparsable);
            out += ',' + (r.in_lesson_rate ? full_precision(*r.in_lesson_rate)
                                           : std::string());
            out += ',';
        } else {
            out += ",,,,,,," + csv_escape(o.error);
        }
        out += '\n';
    }
    return out;
}

std::string render_trace(const QuestionTrace& trace, const Dataset& ds) {
    const Question& q = ds.question(trace.question_id);
    std::ostringstream out;
    out << "Question ID: " << q.question_id << "\n";
    out << "Question: " << q.stem << "\n";
    out << "Options:\n";
    for (const Option& opt : q.options) {
        out << "(" << opt.label << ") " << opt.text << "\n";
    }
    out << "Correct Answer: " << render_gold_answer(q) << "\n";
    out << "Predicted Answer: ";
    if (trace.predicted_label) {
        const Option* opt = q.find_option(*trace.predicted_label);
        if (opt == nullptr) {
            throw UnknownIdError("predicted label '" + *trace.predicted_label +
                                 "' is not an option of " + q.question_id);
        }
        out << "(" << opt->label << ") " << opt->text;
    } else {
        out << trace.raw_model_text << " [unparsable]";
    }
    out << "\n";
    if (!trace.retrieved.empty()) {
        out << "Retrieved Context with RAG:\n";
        for (const TraceHit& hit : trace.retrieved) {
            const Topic& topic = ds.topic(hit.topic_id);
            out << topic.text << "\n";
            if (topic.lesson_id == q.lesson_id) {
                out << "(" << topic.topic_id << ")\n";
            } else {
                out << "(" << topic.lesson_id << ", " << topic.topic_id << ")\n";
            }
        }
    }
    return out.str();
}

} // namespace tqa
