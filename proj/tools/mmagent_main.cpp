// SPDX-License-Identifier: Apache-2.0

// mmagent: ask questions over images and videos through the planner/critic
// loop, build retrieval indexes, generate critic criteria, run evaluations,
// and replay recorded traces.

#include <atomic>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmagent/critic.hpp"
#include "mmagent/evalharness.hpp"
#include "mmagent/framegrid.hpp"
#include "mmagent/media.hpp"
#include "mmagent/pipeline.hpp"
#include "mmagent/retrieval.hpp"
#include "mmagent/session.hpp"
#include "mmagent/templates.hpp"
#include "mmagent/toolkit.hpp"
#include "mmagent/trace.hpp"

using json = nlohmann::json;
using namespace mmagent;

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitBudget = 2;
constexpr int kExitMismatch = 3;

// ---------------------------------------------------------------------------
// Run configuration: flags override config-file values, which override
// environment defaults.

struct RunConfig {
    std::string config_path;
    std::string template_dir = "templates";
    std::string cache_dir = ".mmagent-cache";
    std::string criteria_file;
    session::SessionConfig session;
    double index_frame_rate = 1.0;
    int eval_parallelism = 4;
    evalharness::VerdictWeights weights;
    json backends = json::object();
    bool verbose = false;
    bool no_cache = false;
    std::string scripted_path;
    std::string dump_grid_dir;
    std::string judge_backend_name = "judge";

    json effective() const {
        json doc;
        doc["template_dir"] = template_dir;
        doc["cache_dir"] = cache_dir;
        doc["criteria_file"] = criteria_file;
        doc["session"] = {{"max_iterations", session.max_iterations},
                          {"critic_rounds", session.max_critic_rounds},
                          {"critic", session.critic_enabled},
                          {"malformed_retry_limit", session.malformed_retry_limit}};
        doc["index"] = {{"frame_rate", index_frame_rate}};
        doc["eval"] = {{"parallelism", eval_parallelism},
                       {"weights",
                        {{"correct", weights.correct},
                         {"partially_correct", weights.partially_correct},
                         {"incorrect", weights.incorrect}}}};
        // Backend entries list endpoint/model/key-variable names only;
        // key values live in the environment and are never echoed.
        doc["backends"] = backends;
        doc["scripted"] = scripted_path.empty() ? json() : json(scripted_path);
        return doc;
    }
};

void load_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("ConfigMissing", "cannot open config file: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error("ConfigCorrupt", "config is not valid JSON: " + path);

    config.template_dir = doc.value("template_dir", config.template_dir);
    config.cache_dir = doc.value("cache_dir", config.cache_dir);
    config.criteria_file = doc.value("criteria_file", config.criteria_file);
    if (doc.contains("session")) {
        const auto& s = doc["session"];
        config.session.max_iterations = s.value("max_iterations", config.session.max_iterations);
        config.session.max_critic_rounds =
            s.value("critic_rounds", config.session.max_critic_rounds);
        config.session.critic_enabled = s.value("critic", config.session.critic_enabled);
        config.session.malformed_retry_limit =
            s.value("malformed_retry_limit", config.session.malformed_retry_limit);
    }
    if (doc.contains("index"))
        config.index_frame_rate = doc["index"].value("frame_rate", config.index_frame_rate);
    if (doc.contains("eval")) {
        const auto& e = doc["eval"];
        config.eval_parallelism = e.value("parallelism", config.eval_parallelism);
        if (e.contains("weights")) {
            config.weights.correct = e["weights"].value("correct", config.weights.correct);
            config.weights.partially_correct =
                e["weights"].value("partially_correct", config.weights.partially_correct);
            config.weights.incorrect = e["weights"].value("incorrect", config.weights.incorrect);
        }
    }
    if (doc.contains("backends")) config.backends = doc["backends"];
}

RunConfig base_config() {
    RunConfig config;
    if (const char* dir = std::getenv("MMAGENT_TEMPLATE_DIR")) config.template_dir = dir;
    if (const char* dir = std::getenv("MMAGENT_CACHE_DIR")) config.cache_dir = dir;
    if (const char* path = std::getenv("MMAGENT_CONFIG")) config.config_path = path;
    return config;
}

backends::HttpBackendConfig http_config(const json& entry) {
    backends::HttpBackendConfig config;
    config.base_url = entry.value("endpoint", "");
    config.path = entry.value("path", "/v1/chat/completions");
    config.model = entry.value("model", "");
    config.api_key_env = entry.value("api_key_env", "");
    config.max_image_dimension = entry.value("max_image_dimension", 768);
    config.max_attempts = entry.value("max_attempts", 3);
    if (config.base_url.empty())
        throw Error("ConfigMissing", "backend entry lacks an endpoint");
    return config;
}

// ---------------------------------------------------------------------------
// Scripted bundles: a JSON file that replaces every backend for offline runs.

struct ScriptBundle {
    json doc;

    static bool looks_like_trace(const std::string& path) {
        std::ifstream in(path);
        std::string line;
        if (!std::getline(in, line)) return false;
        json record = json::parse(line, nullptr, false);
        return record.is_object() && record.value("role", "") == "meta";
    }

    static ScriptBundle load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("ScriptMissing", "cannot open script file: " + path);
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded())
            throw Error("ScriptCorrupt", "script file is not valid JSON: " + path);
        return ScriptBundle{std::move(doc)};
    }

    std::shared_ptr<backends::ScriptedChatBackend> chat(const std::string& key) const {
        auto backend = std::make_shared<backends::ScriptedChatBackend>();
        if (doc.contains(key))
            for (const auto& entry : doc[key])
                backend->push(entry.is_string() ? entry.get<std::string>() : entry.dump());
        return backend;
    }

    std::shared_ptr<backends::ScriptedEmbeddingBackend> embedder() const {
        std::size_t dim = 8;
        if (doc.contains("embedder")) dim = doc["embedder"].value("dim", 8);
        auto backend = std::make_shared<backends::ScriptedEmbeddingBackend>(dim);
        if (doc.contains("embedder") && doc["embedder"].contains("table"))
            for (const auto& [key, vec] : doc["embedder"]["table"].items())
                backend->set(key, vec.get<backends::EmbeddingVector>());
        return backend;
    }

    std::shared_ptr<backends::ScriptedASRBackend> asr() const {
        std::vector<media::TranscriptPhrase> phrases;
        if (doc.contains("asr"))
            for (const auto& row : doc["asr"].value("phrases", json::array()))
                phrases.push_back({media::Timestamp::parse(row.at(0).get<std::string>()),
                                   media::Timestamp::parse(row.at(1).get<std::string>()),
                                   row.at(2).get<std::string>()});
        return std::make_shared<backends::ScriptedASRBackend>(std::move(phrases));
    }
};

backends::BackendSet build_backends(const RunConfig& config,
                                    const std::optional<ScriptBundle>& bundle) {
    backends::BackendSet set;
    if (bundle) {
        set.reasoner = bundle->chat("reasoner");
        set.critic = bundle->chat("critic");
        set.vit = bundle->chat("vit");
        set.embedder = bundle->embedder();
        set.asr = bundle->asr();
        for (const char* capability : {"ocr", "detect", "recognize"})
            set.capabilities[capability] = bundle->chat(std::string("capabilities.") + capability);
        if (bundle->doc.contains("capabilities"))
            for (const auto& [name, script] : bundle->doc["capabilities"].items()) {
                auto backend = std::make_shared<backends::ScriptedChatBackend>();
                for (const auto& entry : script) backend->push(entry.get<std::string>());
                set.capabilities[name] = backend;
            }
        set.capabilities["vit"] = set.vit;
        return set;
    }

    auto chat_backend = [&](const std::string& name) -> std::shared_ptr<backends::ChatBackend> {
        if (!config.backends.contains(name)) return nullptr;
        return std::make_shared<backends::HttpChatBackend>(http_config(config.backends[name]));
    };
    set.reasoner = chat_backend("reasoner");
    set.critic = chat_backend("critic");
    set.vit = chat_backend("vit");
    if (config.backends.contains("embedder"))
        set.embedder = std::make_shared<backends::HttpEmbeddingBackend>(
            http_config(config.backends["embedder"]));
    if (config.backends.contains("asr"))
        set.asr =
            std::make_shared<backends::HttpASRBackend>(http_config(config.backends["asr"]));
    if (config.backends.contains("capabilities"))
        for (const auto& [name, entry] : config.backends["capabilities"].items())
            set.capabilities[name] = std::make_shared<backends::HttpChatBackend>(http_config(entry));
    if (set.vit) set.capabilities["vit"] = set.vit;
    return set;
}

std::string backend_identity(const RunConfig& config, bool scripted) {
    if (scripted) return "scripted";
    if (config.backends.contains("embedder"))
        return config.backends["embedder"].value("model", "embedder");
    return "none";
}

pipeline::CacheOptions cache_options(const RunConfig& config, bool scripted) {
    pipeline::CacheOptions options;
    options.cache_dir = config.cache_dir;
    options.frame_rate = config.index_frame_rate;
    options.no_cache = config.no_cache;
    options.backend_identity = backend_identity(config, scripted);
    return options;
}

// ---------------------------------------------------------------------------

critic::CriteriaSet criteria_for(const media::MediaHandle& media, const RunConfig& config) {
    if (!config.criteria_file.empty()) return critic::CriteriaSet::load(config.criteria_file);
    if (media.kind() == media::MediaKind::Video)
        return critic::default_video_criteria(config.template_dir);
    return critic::CriteriaSet::load(config.template_dir + "/image/default_criteria.json");
}

int exit_code_for(session::Termination termination) {
    switch (termination) {
        case session::Termination::CriticAccepted:
        case session::Termination::CriticDisabled: return kExitOk;
        case session::Termination::CriticBudgetExhausted:
        case session::Termination::IterationBudgetExhausted: return kExitBudget;
        case session::Termination::Failure: return kExitError;
    }
    return kExitError;
}

void print_result(const session::SessionResult& result, const std::string& trace_path) {
    std::cout << "answer: "
              << (result.answered() ? *result.final_answer : "(unanswerable)") << "\n";
    std::cout << "termination: " << session::to_string(result.termination)
              << " (critic rounds: " << result.critic_rounds_used
              << ", chain entries: " << result.chain.size() << ")\n";
    if (!trace_path.empty()) std::cout << "trace: " << trace_path << "\n";
}

void dump_evidence_grid(const session::SessionResult& result, const media::MediaHandle& media,
                        const std::string& directory) {
    try {
        framegrid::PhotoGrid grid;
        if (media.kind() == media::MediaKind::Image) {
            grid = framegrid::single_image_grid(media.image());
        } else {
            auto evidence = critic::select_evidence(result.chain);
            grid = critic::build_evidence_grid(evidence, media);
        }
        framegrid::dump(grid, directory);
        std::cout << "grid: " << grid.images.size() << " composites in " << directory << "\n";
    } catch (const critic::NoEvidence&) {
        std::cout << "grid: no vision-call evidence to dump\n";
    }
}

struct SessionSetup {
    media::MediaHandle media;
    backends::BackendSet backends;
    toolkit::ToolRegistry registry;
    critic::CriteriaSet criteria;
    // Keep-alives for everything the registry handlers point into.
    std::shared_ptr<pipeline::VideoContext> video_ctx;
    std::shared_ptr<media::MediaHandle> media_holder;
};

SessionSetup prepare_session(const std::string& media_path, const RunConfig& config,
                             const std::optional<ScriptBundle>& bundle) {
    SessionSetup setup{media::MediaHandle::open(media_path), build_backends(config, bundle),
                       {}, {}, nullptr, nullptr};
    setup.media_holder = std::make_shared<media::MediaHandle>(setup.media);

    if (!setup.backends.reasoner)
        throw Error("ConfigMissing", "no reasoner backend configured (use --config or --scripted)");

    if (setup.media.kind() == media::MediaKind::Video) {
        if (!setup.backends.asr) throw Error("ConfigMissing", "no ASR backend configured");
        if (!setup.backends.embedder)
            throw Error("ConfigMissing", "no embedding backend configured");
        setup.video_ctx = std::make_shared<pipeline::VideoContext>(
            pipeline::acquire_context(setup.media, *setup.backends.asr,
                                      *setup.backends.embedder,
                                      cache_options(config, bundle.has_value())));
        if (!setup.backends.vit && !setup.backends.critic)
            throw Error("ConfigMissing", "no vision backend configured for video tools");

        toolkit::VideoToolDeps deps;
        deps.transcript = &setup.video_ctx->transcript;
        deps.phrase_index =
            setup.video_ctx->has_phrase_index ? &setup.video_ctx->phrase_index : nullptr;
        deps.frame_index = &setup.video_ctx->frame_index;
        deps.media = setup.media_holder.get();
        deps.vision = setup.backends.vit ? setup.backends.vit.get()
                                         : setup.backends.critic.get();
        deps.embedder = setup.backends.embedder.get();
        deps.template_dir = config.template_dir;
        toolkit::register_video_tools(setup.registry, deps);
    } else {
        toolkit::ImageToolDeps deps;
        deps.image = setup.media_holder.get();
        for (const auto& [name, backend] : setup.backends.capabilities)
            deps.capabilities[name] = backend.get();
        deps.template_dir = config.template_dir;
        toolkit::register_image_tools(setup.registry, deps);
    }
    setup.criteria = criteria_for(setup.media, config);
    return setup;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_ask(const RunConfig& config, const std::string& media_path, const std::string& question,
            std::string trace_path) {
    // A trace passed to --scripted replays its recorded backends.
    if (!config.scripted_path.empty() && ScriptBundle::looks_like_trace(config.scripted_path)) {
        auto result = session::replay_session(config.scripted_path);
        print_result(result, "");
        return exit_code_for(result.termination);
    }

    std::optional<ScriptBundle> bundle;
    if (!config.scripted_path.empty()) bundle = ScriptBundle::load(config.scripted_path);

    auto setup = prepare_session(media_path, config, bundle);
    auto system_prompt = session::build_system_prompt(
        setup.registry,
        session::load_system_template(config.template_dir,
                                      setup.media.kind() == media::MediaKind::Video ? "video"
                                                                                    : "image"));
    auto result = session::run_session_with_prompt(system_prompt, question, setup.media,
                                                   setup.registry, setup.backends,
                                                   setup.criteria, config.session);

    if (trace_path.empty())
        trace_path = fs::path(media_path).filename().string() + ".trace";
    session::write_trace(trace_path, result, question, setup.media, config.session,
                         system_prompt, setup.criteria.names());

    print_result(result, trace_path);
    if (!config.dump_grid_dir.empty())
        dump_evidence_grid(result, setup.media, config.dump_grid_dir);
    return exit_code_for(result.termination);
}

int cmd_index(const RunConfig& config, const std::string& media_path) {
    std::optional<ScriptBundle> bundle;
    if (!config.scripted_path.empty()) bundle = ScriptBundle::load(config.scripted_path);

    auto video = media::MediaHandle::open(media_path);
    auto set = build_backends(config, bundle);
    if (!set.asr) throw Error("ConfigMissing", "no ASR backend configured");
    if (!set.embedder) throw Error("ConfigMissing", "no embedding backend configured");
    auto ctx = pipeline::build_context(video, *set.asr, *set.embedder, config.index_frame_rate);
    pipeline::save_context(ctx, pipeline::sidecar_paths(media_path));

    std::cout << "indexed " << media_path << ": " << ctx.transcript.phrases.size()
              << " phrases, " << ctx.frame_index.size() << " frames\n";
    return kExitOk;
}

int cmd_criteria(const RunConfig& config, const std::string& task_path,
                 const std::string& out_path) {
    std::ifstream in(task_path);
    if (!in) throw Error("ConfigMissing", "cannot open task config: " + task_path);
    json task = json::parse(in);

    std::shared_ptr<backends::ChatBackend> backend;
    if (!config.scripted_path.empty()) {
        auto bundle = ScriptBundle::load(config.scripted_path);
        backend = bundle.chat("criteria_generator");
    } else {
        if (!config.backends.contains("reasoner"))
            throw Error("ConfigMissing", "no reasoner backend configured for criteria generation");
        backend =
            std::make_shared<backends::HttpChatBackend>(http_config(config.backends["reasoner"]));
    }

    auto criteria = critic::generate_criteria(
        task.value("problem_description", ""), task.value("instruction", ""),
        task.value("task_description", ""), task.value("human_intent", ""), *backend,
        config.template_dir);
    criteria.save(out_path);

    std::cout << "criteria (" << criteria.size() << "): ";
    for (std::size_t i = 0; i < criteria.names().size(); ++i)
        std::cout << (i ? ", " : "") << criteria.names()[i];
    std::cout << "\nwritten to " << out_path << "\n";
    return kExitOk;
}

evalharness::JudgeVerdict judge_scripted(const evalharness::QAItem& item,
                                         const std::string& answer,
                                         const std::string& scripted_verdict,
                                         const RunConfig& config) {
    backends::ScriptedChatBackend judge_backend;
    judge_backend.push("System Answer: " + scripted_verdict);
    return evalharness::judge(item, answer, judge_backend, config.template_dir);
}

int cmd_eval(const RunConfig& config, const std::string& manifest_path, bool ablate,
             const std::string& report_path) {
    auto items = evalharness::load_manifest(manifest_path);
    if (items.empty()) throw Error("ManifestError", "manifest has no items: " + manifest_path);

    std::optional<ScriptBundle> bundle;
    if (!config.scripted_path.empty()) bundle = ScriptBundle::load(config.scripted_path);

    std::vector<evalharness::ItemResult> results(items.size());
    std::vector<std::pair<bool, bool>> paired(items.size());

    auto run_item = [&](const evalharness::QAItem& item, bool critic_on,
                        const json* script) -> std::string {
        RunConfig item_config = config;
        item_config.session.critic_enabled = critic_on;

        std::optional<ScriptBundle> item_bundle;
        if (script) {
            // Per-item session scripts derive from the eval bundle record.
            json doc = bundle->doc;
            json reasoner = json::array();
            const char* answer_key = critic_on ? "with_answer" : "without_answer";
            json answer{{"Observation", "scripted"},
                        {"Thought", "scripted"},
                        {"Answer", script->value(answer_key, "")}};
            reasoner.push_back(answer.dump());
            doc["reasoner"] = reasoner;
            json critic_script = json::array();
            if (critic_on)
                critic_script.push_back(
                    json{{"Observation", "o"},
                         {"Thought", "t"},
                         {"Feedback",
                          {{"Criteria 1", "fine"}, {"Criteria 2", "fine"}, {"Criteria 3", "fine"}}},
                         {"Verdict", "YES"}}
                        .dump());
            doc["critic"] = critic_script;
            item_bundle = ScriptBundle{doc};
        }

        auto setup = prepare_session(item.media_path, item_config, item_bundle);
        auto result = session::run_session(item.question, setup.media, setup.registry,
                                           setup.backends, setup.criteria, item_config.session);
        return result.final_answer.value_or("I am unable to answer this question");
    };

    auto evaluate_item = [&](std::size_t i) {
        const auto& item = items[i];
        const json* script = nullptr;
        if (bundle) {
            if (!bundle->doc.contains("items") || !bundle->doc["items"].contains(item.id))
                throw Error("ScriptCorrupt", "scripted eval lacks item " + item.id);
            script = &bundle->doc["items"][item.id];
        }

        std::string with_answer = run_item(item, config.session.critic_enabled, script);
        std::string without_answer =
            ablate ? run_item(item, false, script) : with_answer;

        auto verdict_of = [&](const std::string& answer, bool critic_on) {
            if (item.multiple_choice()) {
                return evalharness::score_mc(item, answer) ? evalharness::JudgeVerdict::Correct
                                                           : evalharness::JudgeVerdict::Incorrect;
            }
            if (script) {
                std::string key = critic_on ? "judge_with" : "judge_without";
                return judge_scripted(item, answer, script->value(key, "Incorrect"), config);
            }
            if (!config.backends.contains(config.judge_backend_name))
                throw Error("ConfigMissing",
                            "no \"" + config.judge_backend_name + "\" backend configured");
            backends::HttpChatBackend judge_backend(
                http_config(config.backends[config.judge_backend_name]));
            return evalharness::judge(item, answer, judge_backend, config.template_dir);
        };

        auto with_verdict = verdict_of(with_answer, true);
        results[i] = {item.id, item.category, with_verdict};
        if (ablate) {
            auto without_verdict = verdict_of(without_answer, false);
            paired[i] = {without_verdict == evalharness::JudgeVerdict::Correct,
                         with_verdict == evalharness::JudgeVerdict::Correct};
        }
    };

    // Items evaluate concurrently; the first failure wins and is rethrown.
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            try {
                evaluate_item(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    int workers = std::max(1, std::min<int>(config.eval_parallelism,
                                            static_cast<int>(items.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    auto report = evalharness::aggregate(results, config.weights);
    if (ablate) report.ablation = evalharness::critic_ablation(paired);

    std::cout << report.render_table();
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::trunc);
        out << report.to_json() << "\n";
        std::cout << "report: " << report_path << "\n";
    }
    return kExitOk;
}

int cmd_replay(const std::string& trace_path) {
    auto trace = session::read_trace(trace_path);
    auto result = session::replay_session(trace_path);
    print_result(result, "");
    if (!session::matches_trace(result, trace)) {
        std::cerr << "replay diverges from the recorded result\n";
        return kExitMismatch;
    }
    std::cout << "replay matches the recorded result\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-modal planner/critic agent over images and videos"};
    app.require_subcommand(1);

    RunConfig config = base_config();
    std::string config_flag;
    bool critic_on = true;
    int critic_rounds = -1, max_iterations = -1;

    std::string template_dir_flag;
    app.add_option("--config", config_flag, "config file (JSON)");
    app.add_option("--scripted", config.scripted_path,
                   "scripted backend bundle or trace; offline, zero network");
    app.add_option("--template-dir", template_dir_flag, "prompt template directory");
    app.add_flag("--verbose", config.verbose, "print the effective config at startup");
    app.add_flag("--no-cache", config.no_cache, "bypass index/transcript caches");

    std::string media_path, question, trace_out, task_path, manifest_path;
    std::string criteria_out = "criteria.json", report_path;
    bool ablate = false;

    auto* ask = app.add_subcommand("ask", "answer a question about an image or video");
    ask->add_option("media", media_path, "media file path (or synth:<seconds>)")->required();
    ask->add_option("question", question, "the user question")->required();
    ask->add_option("--trace", trace_out, "trace output path");
    ask->add_flag("--critic,!--no-critic", critic_on, "run the critic (default on)");
    ask->add_option("--critic-rounds", critic_rounds, "max critic rounds");
    ask->add_option("--max-iterations", max_iterations, "reasoner turns per answer attempt");
    ask->add_option("--dump-grid", config.dump_grid_dir, "dump the evidence grid to a directory");

    auto* index = app.add_subcommand("index", "build retrieval sidecars for a video");
    index->add_option("media", media_path, "video file path")->required();

    auto* criteria_cmd = app.add_subcommand("criteria", "generate critic criteria for a task");
    criteria_cmd->add_option("task", task_path, "task config (JSON with the four inputs)")
        ->required();
    criteria_cmd->add_option("--out", criteria_out, "criteria output file");

    auto* eval = app.add_subcommand("eval", "evaluate a QA manifest");
    eval->add_option("manifest", manifest_path, "JSON-lines manifest")->required();
    eval->add_flag("--ablate-critic", ablate, "paired with/without-critic confusion matrix");
    eval->add_option("--report", report_path, "machine-readable report path");
    eval->add_option("--judge-backend", config.judge_backend_name,
                     "backend entry used for judging");
    eval->add_flag("--critic,!--no-critic", critic_on, "run the critic (default on)");
    eval->add_option("--critic-rounds", critic_rounds, "max critic rounds");

    auto* replay = app.add_subcommand("replay", "re-execute a recorded trace");
    replay->add_option("trace", media_path, "trace file")->required();

    // Global options remain usable after the subcommand name.
    for (auto* sub : {ask, index, criteria_cmd, eval, replay}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_flag.empty())
            load_config_file(config, config_flag);
        else if (!config.config_path.empty())
            load_config_file(config, config.config_path);

        if (!template_dir_flag.empty()) config.template_dir = template_dir_flag;
        config.session.critic_enabled = critic_on;
        if (critic_rounds >= 0) config.session.max_critic_rounds = critic_rounds;
        if (max_iterations > 0) config.session.max_iterations = max_iterations;
        config.session.template_dir = config.template_dir;
        config.session.validate();

        if (config.verbose)
            std::cout << "config (secrets redacted): " << config.effective().dump(2) << "\n";

        if (app.got_subcommand(ask)) return cmd_ask(config, media_path, question, trace_out);
        if (app.got_subcommand(index)) return cmd_index(config, media_path);
        if (app.got_subcommand(criteria_cmd))
            return cmd_criteria(config, task_path, criteria_out);
        if (app.got_subcommand(eval))
            return cmd_eval(config, manifest_path, ablate, report_path);
        if (app.got_subcommand(replay)) return cmd_replay(media_path);
    } catch (const session::SessionTransportError& e) {
        std::cerr << "error (" << e.code() << "): " << e.what() << " [chain entries: "
                  << e.partial_chain().size() << "]\n";
        return kExitError;
    } catch (const Error& e) {
        std::cerr << "error (" << e.code() << "): " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
