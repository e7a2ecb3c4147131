#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "melodia/corpus.hpp"
#include "melodia/error.hpp"
#include "melodia/generator.hpp"
#include "melodia/midi.hpp"
#include "melodia/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace melodia;

namespace {

// Exit codes: 0 ok, 2 usage/config, 3 file IO, 4 bad data, 5 divergence.
int exit_code_for(Errc code) {
    switch (code) {
        case Errc::bad_config:
        case Errc::unknown_variant:
            return 2;
        case Errc::io_error:
            return 3;
        case Errc::divergence:
            return 5;
        default:
            return 4;
    }
}

void emit(const json& line) { std::cout << line.dump() << "\n" << std::flush; }

Vocabulary vocab_from_checkpoint(const Checkpoint& ck) {
    std::vector<Token> tokens;
    tokens.reserve(ck.vocab_tokens.size());
    for (const auto& text : ck.vocab_tokens) tokens.push_back(Token::parse(text));
    Vocabulary vocab = Vocabulary::build({tokens});
    require(vocab.size() == static_cast<int>(ck.vocab_tokens.size()), Errc::bad_checkpoint,
            "checkpoint vocabulary contains duplicate tokens");
    return vocab;
}

std::vector<std::string> vocab_texts(const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(vocab.size());
    for (int i = 0; i < vocab.size(); ++i) out.push_back(vocab.text(i));
    return out;
}

std::vector<int> concat_songs(const std::vector<std::vector<int>>& songs) {
    std::vector<int> stream;
    for (const auto& s : songs) stream.insert(stream.end(), s.begin(), s.end());
    return stream;
}

// Same whole-file split rule the trainer uses.
std::size_t holdout_count(std::size_t n_songs, double holdout) {
    auto n = static_cast<std::size_t>(static_cast<double>(n_songs) * holdout);
    if (holdout > 0.0 && n == 0 && n_songs > 1) n = 1;
    return n;
}

struct IngestArgs {
    std::string manifest;
    std::string cache;
    int threads = 1;
};

int run_ingest(const IngestArgs& a) {
    const auto paths = read_manifest(a.manifest);
    const CorpusCache cache = ingest_corpus(paths, a.threads);
    save_cache(a.cache, cache);
    emit({{"event", "ingest"},
          {"songs", cache.songs.size()},
          {"tokens", cache.total_tokens()},
          {"vocab", cache.vocab.size()},
          {"cache", a.cache}});
    return 0;
}

struct InspectArgs {
    std::string cache;
    bool per_song = false;
};

int run_inspect(const InspectArgs& a) {
    const CorpusCache cache = load_cache(a.cache);
    emit({{"event", "inspect"},
          {"cache", a.cache},
          {"songs", cache.songs.size()},
          {"tokens", cache.total_tokens()},
          {"vocab", cache.vocab.size()}});
    if (a.per_song) {
        for (std::size_t i = 0; i < cache.songs.size(); ++i)
            emit({{"event", "song"},
                  {"index", i},
                  {"source", cache.sources[i]},
                  {"tokens", cache.songs[i].size()}});
    }
    return 0;
}

struct TrainArgs {
    std::string cache;
    std::string config;
    std::string out;
    std::optional<std::string> variant;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<int> threads;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : parse_train_config(a.config);
    if (a.variant) cfg.variant = variant_from_name(*a.variant);
    if (a.seed) cfg.seed = *a.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.threads) cfg.threads = *a.threads;
    cfg.validate();

    const CorpusCache cache = load_cache(a.cache);
    const auto songs = cache.encode_songs();
    const auto tokens = vocab_texts(cache.vocab);

    std::error_code ec;
    fs::create_directories(a.out, ec);
    require(!ec, Errc::io_error, "cannot create output directory '" + a.out + "'");
    const fs::path out_dir(a.out);

    TrainCallbacks callbacks;
    callbacks.on_point = [](const CurvePoint& p) {
        emit({{"epoch", p.epoch},
              {"split", p.split},
              {"cce", p.metrics.cce},
              {"rmse", p.metrics.rmse},
              {"mse", p.metrics.mse}});
    };
    callbacks.on_checkpoint = [&](int epoch, const ModelParams& params) {
        char name[48];
        std::snprintf(name, sizeof(name), "model_epoch_%04d.ckpt", epoch);
        save_checkpoint((out_dir / name).string(), params, tokens, cfg.dropout);
        emit({{"event", "checkpoint"}, {"epoch", epoch}, {"path", (out_dir / name).string()}});
    };

    const TrainResult result = train_model(cfg, songs, cache.vocab.size(), callbacks);

    const std::string curve_path = (out_dir / "curve.csv").string();
    const std::string ckpt_path = (out_dir / "model.ckpt").string();
    write_curve_csv(curve_path, result.curve);
    save_checkpoint(ckpt_path, result.params, tokens, cfg.dropout);
    emit({{"event", "done"},
          {"variant", variant_name(cfg.variant)},
          {"checkpoint", ckpt_path},
          {"curve", curve_path}});
    return 0;
}

struct EvalArgs {
    std::string cache;
    std::string checkpoint;
    double holdout = 0.0;
    int threads = 1;
};

int run_eval(const EvalArgs& a) {
    require(a.holdout >= 0.0 && a.holdout < 1.0, Errc::bad_config, "holdout must be in [0, 1)");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const Vocabulary vocab = vocab_from_checkpoint(ck);
    const CorpusCache cache = load_cache(a.cache);

    std::vector<std::vector<int>> songs;
    songs.reserve(cache.songs.size());
    for (const auto& song : cache.songs) songs.push_back(vocab.encode(song));

    auto report = [&](const std::string& split, const std::vector<int>& stream) {
        const WindowSet windows(stream, ck.params.dims.window);
        const Metrics m = evaluate(ck.params, windows, a.threads);
        emit({{"event", "eval"},
              {"split", split},
              {"windows", windows.count()},
              {"cce", m.cce},
              {"rmse", m.rmse},
              {"mse", m.mse}});
    };

    const std::size_t n_hold = holdout_count(songs.size(), a.holdout);
    if (n_hold == 0) {
        report("all", concat_songs(songs));
    } else {
        const auto split = songs.begin() + static_cast<std::ptrdiff_t>(songs.size() - n_hold);
        report("train", concat_songs(std::vector<std::vector<int>>(songs.begin(), split)));
        report("holdout", concat_songs(std::vector<std::vector<int>>(split, songs.end())));
    }
    return 0;
}

struct GenerateArgs {
    std::string checkpoint;
    std::string seed_midi;
    bool seed_random = false;
    std::string out;
    int steps = 100;
    std::string strategy = "argmax";
    double temperature = 1.0;
    std::uint64_t seed = 1;
};

int run_generate(const GenerateArgs& a) {
    require(!a.seed_midi.empty() || a.seed_random, Errc::bad_config,
            "one of --seed-midi or --seed-random is required");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const Vocabulary vocab = vocab_from_checkpoint(ck);
    const auto window = static_cast<std::size_t>(ck.params.dims.window);

    std::vector<int> seed_window;
    if (!a.seed_midi.empty()) {
        const auto tokens = tokenize(events_to_notes(read_midi_file(a.seed_midi)).notes);
        require(tokens.size() >= window, Errc::bad_seed,
                "seed MIDI '" + a.seed_midi + "' yields " + std::to_string(tokens.size()) +
                    " tokens, but the model window needs " + std::to_string(window));
        const auto ids = vocab.encode(tokens);
        seed_window.assign(ids.end() - static_cast<std::ptrdiff_t>(window), ids.end());
    } else {
        Rng rng(a.seed, 0x5EEDC0DEull);
        seed_window.reserve(window);
        for (std::size_t i = 0; i < window; ++i)
            seed_window.push_back(static_cast<int>(rng.next_below(
                static_cast<std::uint64_t>(vocab.size()))));
    }

    SamplerConfig cfg;
    cfg.strategy = strategy_from_name(a.strategy);
    cfg.temperature = a.temperature;
    cfg.steps = a.steps;
    cfg.rng_seed = a.seed;
    const std::vector<int> ids = generate_ids(ck.params, seed_window, cfg);
    render_midi(a.out, ids, vocab, cfg.velocity);

    json tokens = json::array();
    for (int id : ids) tokens.push_back(vocab.text(id));
    emit({{"event", "generate"},
          {"steps", a.steps},
          {"strategy", a.strategy},
          {"out", a.out},
          {"tokens", tokens}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"melodia: MIDI corpus tokenizer, melody model trainer, and generator"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Tokenize a MIDI corpus into a cache directory");
    ingest->add_option("--manifest", ingest_args.manifest, "Text file listing MIDI paths")
        ->required();
    ingest->add_option("--cache", ingest_args.cache, "Cache directory to write")->required();
    ingest->add_option("--threads", ingest_args.threads, "Parser worker threads");

    InspectArgs inspect_args;
    auto* inspect = app.add_subcommand("inspect", "Summarize an ingested cache");
    inspect->add_option("--cache", inspect_args.cache, "Cache directory from ingest")->required();
    inspect->add_flag("--songs", inspect_args.per_song, "Also list every song");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a model on an ingested cache");
    train->add_option("--cache", train_args.cache, "Cache directory from ingest")->required();
    train->add_option("--config", train_args.config, "key=value training config file");
    train->add_option("--out", train_args.out, "Output directory (curve.csv, model.ckpt)")
        ->required();
    train->add_option("--variant", train_args.variant,
                      "lstm | lstm_attn | bilstm_attn_lstm (overrides config)");
    train->add_option("--seed", train_args.seed, "Initialization seed (overrides config)");
    train->add_option("--epochs", train_args.epochs, "Epoch count (overrides config)");
    train->add_option("--threads", train_args.threads, "Worker threads (overrides config)");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against a cache");
    eval->add_option("--cache", eval_args.cache, "Cache directory from ingest")->required();
    eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
    eval->add_option("--holdout", eval_args.holdout,
                     "Report train/holdout splits for this whole-file fraction");
    eval->add_option("--threads", eval_args.threads, "Worker threads");

    GenerateArgs gen_args;
    auto* generate = app.add_subcommand("generate", "Generate a MIDI continuation");
    generate->add_option("--checkpoint", gen_args.checkpoint, "Checkpoint file")->required();
    auto* seed_midi = generate->add_option("--seed-midi", gen_args.seed_midi,
                                           "MIDI file whose last tokens seed the window");
    auto* seed_random =
        generate->add_flag("--seed-random", gen_args.seed_random, "Random in-vocabulary seed");
    seed_midi->excludes(seed_random);
    generate->add_option("--out", gen_args.out, "Output MIDI path")->required();
    generate->add_option("--steps", gen_args.steps, "Tokens to generate");
    generate->add_option("--strategy", gen_args.strategy, "argmax | temperature");
    generate->add_option("--temperature", gen_args.temperature, "Sampling temperature");
    generate->add_option("--seed", gen_args.seed, "RNG seed (random seed window and sampling)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(ingest)) return run_ingest(ingest_args);
        if (app.got_subcommand(inspect)) return run_inspect(inspect_args);
        if (app.got_subcommand(train)) return run_train(train_args);
        if (app.got_subcommand(eval)) return run_eval(eval_args);
        if (app.got_subcommand(generate)) return run_generate(gen_args);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
