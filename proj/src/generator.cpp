#include "melodia/generator.hpp"

#include <cmath>
#include <fstream>

#include "melodia/error.hpp"
#include "melodia/midi.hpp"
#include "melodia/numeric.hpp"
#include "melodia/rng.hpp"

namespace melodia {

Strategy strategy_from_name(const std::string& name) {
    if (name == "argmax") return Strategy::argmax;
    if (name == "temperature") return Strategy::temperature;
    fail(Errc::bad_config, "unknown sampling strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
    return s == Strategy::argmax ? "argmax" : "temperature";
}

void SamplerConfig::validate() const {
    require(steps >= 1, Errc::bad_config, "steps must be >= 1");
    require(temperature > 0.0 && std::isfinite(temperature), Errc::bad_config,
            "temperature must be positive");
    require(velocity >= 1 && velocity <= 127, Errc::bad_config, "velocity must be in 1..127");
}

namespace {

int sample_temperature(const Vec& probs, double temperature, Rng& rng) {
    // Rescale in log space, renormalize, then invert the CDF.
    Vec logits(probs.size());
    for (Index i = 0; i < probs.size(); ++i)
        logits(i) = std::log(std::max(probs(i), 1e-300)) / temperature;
    const Vec scaled = softmax(logits);
    const double u = rng.next_double();
    double cum = 0.0;
    for (Index i = 0; i < scaled.size(); ++i) {
        cum += scaled(i);
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(scaled.size() - 1);  // guards against rounding in the tail
}

} // namespace

std::vector<int> generate_ids(const ModelParams& params, std::span<const int> seed_window,
                              const SamplerConfig& cfg) {
    cfg.validate();
    const int window = params.dims.window;
    const int vocab = params.dims.vocab;
    require(static_cast<int>(seed_window.size()) == window, Errc::bad_seed,
            "seed window has " + std::to_string(seed_window.size()) + " ids, model expects " +
                std::to_string(window));
    for (int id : seed_window)
        require(id >= 0 && id < vocab, Errc::bad_seed,
                "seed id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(vocab));

    std::vector<int> state(seed_window.begin(), seed_window.end());
    std::vector<int> out;
    out.reserve(cfg.steps);
    Rng rng(cfg.rng_seed, 0x5A3D1E00ull);
    for (int step = 0; step < cfg.steps; ++step) {
        std::span<const int> current(state.data() + state.size() - window,
                                     static_cast<std::size_t>(window));
        const Vec probs = model_probs(current, params);
        int next = 0;
        if (cfg.strategy == Strategy::argmax) {
            Index arg = 0;
            probs.maxCoeff(&arg);
            next = static_cast<int>(arg);
        } else {
            next = sample_temperature(probs, cfg.temperature, rng);
        }
        state.push_back(next);
        out.push_back(next);
    }
    return out;
}

std::vector<std::uint8_t> render_midi_bytes(std::span<const int> ids, const Vocabulary& vocab,
                                            int velocity) {
    require(!ids.empty(), Errc::empty_input, "nothing to render");
    const std::vector<Token> tokens = vocab.decode(ids);
    const std::vector<NoteEvent> notes = detokenize(tokens, velocity);
    return write_smf(notes_to_events(notes, 480));
}

void render_midi(const std::string& path, std::span<const int> ids, const Vocabulary& vocab,
                 int velocity) {
    const auto bytes = render_midi_bytes(ids, vocab, velocity);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(out.good(), Errc::io_error, "write failed for '" + path + "'");
}

} // namespace melodia
