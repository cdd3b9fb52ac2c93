#include "tacla/cli.hpp"

#include <csignal>
#include <optional>
#include <set>
#include <ostream>
#include <thread>

#include <unistd.h>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "tacla/app_config.hpp"
#include "tacla/eval_harness.hpp"
#include "tacla/feedback_rag.hpp"
#include "tacla/io.hpp"
#include "tacla/service.hpp"
#include "tacla/simulation.hpp"

namespace tacla {

namespace fs = std::filesystem;

namespace {

bool use_color() { return std::getenv("NO_COLOR") == nullptr && ::isatty(STDERR_FILENO) == 1; }

void configure_logging(bool debug) {
    spdlog::drop("tacla-cli");
    std::shared_ptr<spdlog::logger> logger;
    if (use_color()) {
        logger = spdlog::stderr_color_mt("tacla-cli");
    } else {
        logger = spdlog::stderr_logger_mt("tacla-cli");
    }
    logger->set_pattern("%^[%l]%$ %v");
    logger->set_level(debug ? spdlog::level::debug : spdlog::level::info);
    spdlog::set_default_logger(std::move(logger));
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::SchemaViolation:
        case ErrorCode::UnknownScenario:
        case ErrorCode::NotFound:
        case ErrorCode::UnknownEgoState:
        case ErrorCode::EmptyInput:
        case ErrorCode::EmptyCorpus:
            return kExitValidation;
        default:
            return kExitRuntime;
    }
}

struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    bool debug = false;
    std::string base_url;
    std::string provider;
    std::string script;
    std::string request_log;
};

struct Runtime {
    AppConfig config;
    std::shared_ptr<RecordingBackend> recorder;
    std::shared_ptr<Gateway> gateway;
};

Runtime make_runtime(const Common& c) {
    Runtime rt;
    if (!c.config_path.empty()) rt.config = load_app_config(c.config_path);
    if (!c.provider.empty()) rt.config.provider.kind = c.provider;
    if (!c.script.empty()) {
        rt.config.provider.script = c.script;
        if (c.provider.empty()) rt.config.provider.kind = "scripted";
    }
    if (!c.base_url.empty()) rt.config.provider.connection.base_url = c.base_url;
    if (const auto problems = validate_config(rt.config.provider.connection); !problems.empty()) {
        throw Error(ErrorCode::InvalidArgument, "provider config: " + problems.front());
    }
    Backend backend = make_backend(rt.config.provider);
    std::shared_ptr<ModelBackend> model = backend.backend;
    if (!c.request_log.empty()) {
        rt.recorder = std::make_shared<RecordingBackend>(model);
        model = rt.recorder;
    }
    rt.gateway = std::make_shared<Gateway>(model, rt.config.provider.connection);
    return rt;
}

void write_request_log(const Common& c, const Runtime& rt) {
    if (rt.recorder) write_file_atomic(c.request_log, dump_json(rt.recorder->log_json()));
}

Scenario resolve_scenario(const std::string& name, const AppConfig& config) {
    std::error_code ec;
    if (fs::is_regular_file(name, ec)) return load_scenario(name);
    const fs::path direct = config.scenarios_dir / (name + ".json");
    if (fs::is_regular_file(direct, ec)) return load_scenario(direct);
    if (fs::is_directory(config.scenarios_dir, ec)) {
        for (const auto& e : fs::directory_iterator(config.scenarios_dir, ec)) {
            if (e.path().extension() != ".json") continue;
            try {
                Scenario s = load_scenario(e.path());
                if (s.id == name) return s;
            } catch (const Error&) {
            }
        }
    }
    if (name == builtin_solar_system().id) return builtin_solar_system();
    throw Error(ErrorCode::UnknownScenario, "unknown scenario \"" + name + "\"");
}

CorpusIndex resolve_corpus(const std::string& index_path, const std::string& corpus_dir,
                           const Runtime& rt) {
    if (!index_path.empty()) return load_corpus(index_path);
    const fs::path dir = corpus_dir.empty() ? rt.config.corpus_dir : fs::path(corpus_dir);
    return ingest_corpus({dir}, *rt.gateway);
}

std::string dialogue_text(const Transcript& t, const SpeakerNames& names, bool debug) {
    if (!debug) return render_dialogue(t, names);
    std::string out;
    for (const Turn& turn : t.turns) {
        out += display_name(names, turn.message.speaker_id);
        if (turn.annotation) out += " [" + std::string(to_string(turn.annotation->selected_state)) + "]";
        out += ": " + turn.message.text + "\n";
    }
    return out;
}

struct SimulateArgs {
    std::string scenario = "solar_system";
    std::string intervention;
    bool feedback = false;
    bool live_opening = false;
    std::optional<int> rounds;
    std::string index;
    std::string corpus;
};

int cmd_simulate(const Common& c, const SimulateArgs& a, std::ostream& out) {
    Runtime rt = make_runtime(c);
    const Scenario scenario = resolve_scenario(a.scenario, rt.config);
    const InterventionPreset preset = find_intervention(scenario, a.intervention);
    const fs::path out_dir = c.out.empty() ? fs::path("out") : fs::path(c.out);

    SessionOptions options;
    options.seed = c.seed;
    options.live_opening = a.live_opening;
    options.post_intervention_rounds = a.rounds;
    const SeededMemories memories = seed_memories(scenario, *rt.gateway);
    const SimulationRecord record =
        run_simulation(scenario, preset, memories, rt.config.role_policy, options, *rt.gateway);

    write_file_atomic(out_dir / "transcript.json", dump_json(json(record)));
    write_file_atomic(out_dir / "dialogue.txt",
                      dialogue_text(record.transcript, record.speaker_names, c.debug));
    out << "wrote " << (out_dir / "transcript.json").string() << "\n"
        << "wrote " << (out_dir / "dialogue.txt").string() << "\n";
    if (a.feedback) {
        const CorpusIndex corpus = resolve_corpus(a.index, a.corpus, rt);
        FeedbackOptions fo;
        fo.k = rt.config.feedback_k;
        fo.temperature = rt.config.role_policy.temperature(AgentRole::Feedback);
        const FeedbackReport report =
            generate_feedback(record.transcript, record.speaker_names, corpus, *rt.gateway, fo);
        write_file_atomic(out_dir / "feedback.json", dump_json(json(report)));
        out << "wrote " << (out_dir / "feedback.json").string() << "\n";
    }
    write_request_log(c, rt);
    return kExitOk;
}

struct BatchArgs {
    std::string scenario = "solar_system";
    std::vector<std::string> interventions;
    long long n = 30;
    long long parallelism = 1;
    int rounds = 2;
    bool live_opening = false;
};

int cmd_batch(const Common& c, const BatchArgs& a, std::ostream& out) {
    if (a.n < 1) throw Error(ErrorCode::InvalidArgument, "--n must be >= 1");
    if (a.parallelism < 1) throw Error(ErrorCode::InvalidArgument, "--parallelism must be >= 1");
    if (a.rounds < 1) throw Error(ErrorCode::InvalidArgument, "--rounds must be >= 1");
    Runtime rt = make_runtime(c);
    const Scenario scenario = resolve_scenario(a.scenario, rt.config);
    std::vector<InterventionPreset> presets;
    for (const auto& id : a.interventions) {
        if (id == "all") {
            presets.insert(presets.end(), scenario.intervention_presets.begin(),
                           scenario.intervention_presets.end());
        } else {
            presets.push_back(find_intervention(scenario, id));
        }
    }
    if (presets.empty()) throw Error(ErrorCode::InvalidArgument, "no intervention selected");
    const fs::path out_dir = c.out.empty() ? fs::path("results") : fs::path(c.out);

    BatchOptions options;
    options.n = static_cast<std::size_t>(a.n);
    options.seed = c.seed;
    options.parallelism = static_cast<std::size_t>(a.parallelism);
    options.post_intervention_rounds = a.rounds;
    options.live_opening = a.live_opening;
    options.role_policy = rt.config.role_policy;

    const SeededMemories memories = seed_memories(scenario, *rt.gateway);
    std::vector<RunRecord> records;
    for (const auto& preset : presets) {
        spdlog::info("running {} x {}", options.n, preset.id);
        auto batch = run_batch(scenario, preset, memories, *rt.gateway, options);
        records.insert(records.end(), std::make_move_iterator(batch.begin()),
                       std::make_move_iterator(batch.end()));
    }
    const AggregateStats stats = aggregate(records);
    emit_report(stats, records, out_dir);
    write_request_log(c, rt);

    for (const auto& cond : stats.conditions) {
        out << cond.intervention_id << ": " << cond.runs << " runs, " << cond.failed_runs
            << " failed, mean conflict " << json(cond.mean_conflict).dump() << ", mean realism "
            << json(cond.mean_realism).dump() << "\n";
    }
    out << "overall mean realism " << json(stats.overall_mean_realism).dump() << "\n"
        << "wrote " << out_dir.string() << "\n";
    return kExitOk;
}

struct FeedbackArgs {
    std::string transcript;
    std::string index;
    std::string corpus;
};

int cmd_feedback(const Common& c, const FeedbackArgs& a, std::ostream& out) {
    const json doc = read_json_file(a.transcript);
    Transcript transcript;
    SpeakerNames names;
    try {
        if (doc.is_object() && doc.contains("transcript")) {
            doc.at("transcript").get_to(transcript);
            names = doc.value("speaker_names", SpeakerNames{});
        } else {
            doc.get_to(transcript);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("transcript file: ") + e.what());
    }
    if (const auto v = validate_transcript(transcript); !v.empty()) {
        throw Error(ErrorCode::SchemaViolation, "transcript file: " + v.front());
    }
    if (transcript.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "feedback needs a transcript of at least 2 turns");
    }
    Runtime rt = make_runtime(c);
    const CorpusIndex corpus = resolve_corpus(a.index, a.corpus, rt);
    FeedbackOptions fo;
    fo.k = rt.config.feedback_k;
    fo.temperature = rt.config.role_policy.temperature(AgentRole::Feedback);
    const FeedbackReport report = generate_feedback(transcript, names, corpus, *rt.gateway, fo);
    const fs::path out_dir = c.out.empty() ? fs::path("out") : fs::path(c.out);
    write_file_atomic(out_dir / "report.json", dump_json(json(report)));
    write_request_log(c, rt);

    const auto corrected = std::count_if(report.transactions.begin(), report.transactions.end(),
                                         [](const AnalyzedTransaction& t) { return t.corrected; });
    out << "wrote " << (out_dir / "report.json").string() << "\n";
    if (corrected > 0) {
        out << corrected << " transaction label(s) corrected by the classifier\n";
    }
    return kExitOk;
}

int cmd_validate(const std::string& path, std::ostream& out) {
    const json doc = read_json_file(path);
    Scenario s;
    try {
        doc.get_to(s);
    } catch (const std::exception& e) {
        out << path << ": " << e.what() << "\n";
        return kExitValidation;
    }
    const auto problems = validate_scenario(s);
    if (!problems.empty()) {
        for (const auto& p : problems) out << path << ": " << p << "\n";
        return kExitValidation;
    }
    out << "ok: " << s.id << " (" << s.personas.size() << " personas, "
        << s.intervention_presets.size() << " intervention presets)\n";
    return kExitOk;
}

int cmd_ingest(const Common& c, const std::string& corpus_dir, std::ostream& out) {
    Runtime rt = make_runtime(c);
    const fs::path dir = corpus_dir.empty() ? rt.config.corpus_dir : fs::path(corpus_dir);
    const CorpusIndex corpus = ingest_corpus({dir}, *rt.gateway);
    const fs::path out_dir = c.out.empty() ? rt.config.data_dir : fs::path(c.out);
    save_corpus(corpus, out_dir / "corpus_index.json");
    std::set<std::string> docs;
    for (const auto& chunk : corpus.chunks()) docs.insert(chunk.source_doc);
    out << corpus.size() << " chunks from " << docs.size() << " documents\n"
        << "wrote " << (out_dir / "corpus_index.json").string() << "\n";
    write_request_log(c, rt);
    return kExitOk;
}

struct ServeArgs {
    std::string bind;
    std::optional<int> port;
};

int cmd_serve(const Common& c, const ServeArgs& a, std::ostream& out) {
    Runtime rt = make_runtime(c);
    if (!a.bind.empty()) rt.config.bind_address = a.bind;
    HostPort where = parse_bind_address(rt.config.bind_address);
    if (a.port) where.port = *a.port;

    // Signals are taken by a dedicated thread so shutdown runs outside a handler.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto service = std::make_shared<SessionService>(rt.config, rt.gateway);
    HttpServer server(service, rt.config.static_dir);
    const int port = server.bind(where.host, where.port);
    out << "listening on http://" << where.host << ":" << port << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        spdlog::info("signal {} received, shutting down", sig);
        server.stop();
    });
    server.serve();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    write_request_log(c, rt);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Transactional Analysis classroom simulator: live sessions, simulation, "
                 "feedback and batch evaluation."};
    app.name("tacla");
    app.require_subcommand(1);
    app.fallthrough();

    Common c;
    app.add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", c.seed, "Seed for sessions and batches");
    app.add_option("--out", c.out, "Output directory");
    app.add_flag("--debug", c.debug, "Verbose logs; ego-state tags in dialogue output");
    app.add_option("--provider-base-url", c.base_url, "OpenAI-compatible API base URL");
    app.add_option("--provider", c.provider, "Model provider")
        ->check(CLI::IsMember({"openai", "scripted"}));
    app.add_option("--script", c.script, "Scripted replies (JSON); implies --provider scripted")
        ->check(CLI::ExistingFile);
    app.add_option("--request-log", c.request_log, "Write every chat request to this JSON file");

    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    ServeArgs serve_args;
    serve->add_option("--bind", serve_args.bind, "host:port (overrides the config)");
    serve->add_option("--port", serve_args.port, "Port (0 picks a free one)")
        ->check(CLI::Range(0, 65535));

    auto* simulate = app.add_subcommand("simulate", "Run one simulated dialogue");
    SimulateArgs sim;
    simulate->add_option("--scenario", sim.scenario, "Scenario id or file");
    simulate->add_option("--intervention", sim.intervention, "Intervention preset id")->required();
    simulate->add_flag("--feedback", sim.feedback, "Also write TA feedback");
    simulate->add_flag("--live-opening", sim.live_opening, "Generate the opening with the engine");
    simulate->add_option("--rounds", sim.rounds, "Student rounds after the intervention");
    simulate->add_option("--index", sim.index, "Prebuilt corpus index")->check(CLI::ExistingFile);
    simulate->add_option("--corpus", sim.corpus, "Corpus directory")->check(CLI::ExistingDirectory);

    auto* batch = app.add_subcommand("batch-eval", "Run and judge n simulations per intervention");
    BatchArgs batch_args;
    batch->add_option("--scenario", batch_args.scenario, "Scenario id or file");
    batch->add_option("--intervention", batch_args.interventions, "Preset id, repeatable, or all")
        ->required();
    batch->add_option("--n", batch_args.n, "Runs per intervention");
    batch->add_option("--parallelism", batch_args.parallelism, "Concurrent runs");
    batch->add_option("--rounds", batch_args.rounds, "Student rounds after the intervention");
    batch->add_flag("--live-opening", batch_args.live_opening, "Generate the opening with the engine");

    auto* feedback = app.add_subcommand("feedback", "TA feedback on a transcript file");
    FeedbackArgs fb;
    feedback->add_option("transcript", fb.transcript, "Transcript JSON")->required()->check(CLI::ExistingFile);
    feedback->add_option("--index", fb.index, "Prebuilt corpus index")->check(CLI::ExistingFile);
    feedback->add_option("--corpus", fb.corpus, "Corpus directory")->check(CLI::ExistingDirectory);

    auto* validate = app.add_subcommand("validate-scenario", "Check a scenario file");
    std::string scenario_path;
    validate->add_option("path", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);

    auto* ingest = app.add_subcommand("ingest-corpus", "Chunk, embed and save the theory corpus");
    std::string corpus_dir;
    ingest->add_option("--corpus", corpus_dir, "Corpus directory")->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    configure_logging(c.debug);
    try {
        if (*serve) return cmd_serve(c, serve_args, out);
        if (*simulate) return cmd_simulate(c, sim, out);
        if (*batch) return cmd_batch(c, batch_args, out);
        if (*feedback) return cmd_feedback(c, fb, out);
        if (*validate) return cmd_validate(scenario_path, out);
        if (*ingest) return cmd_ingest(c, corpus_dir, out);
    } catch (const Error& e) {
        const bool color = use_color();
        err << (color ? "\033[31merror\033[0m" : "error") << ": " << to_string(e.code()) << ": "
            << e.detail() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}

}  // namespace tacla
