#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "melodia/model.hpp"
#include "melodia/tokens.hpp"

namespace melodia {

enum class Strategy { argmax, temperature };

Strategy strategy_from_name(const std::string& name);  // Errc::bad_config
std::string strategy_name(Strategy s);

struct SamplerConfig {
    Strategy strategy = Strategy::argmax;
    double temperature = 1.0;     // softens (>1) or sharpens (<1) the distribution
    int steps = 100;              // tokens to generate
    std::uint64_t rng_seed = 1;   // temperature sampling only
    int velocity = 80;            // written into the generated notes

    void validate() const;  // Errc::bad_config
};

// Autoregressive continuation: the seed window must hold exactly
// params.dims.window in-vocabulary ids (Errc::bad_seed otherwise). Each step
// predicts the next id from the current window, then the window slides by
// one. Returns only the generated ids.
std::vector<int> generate_ids(const ModelParams& params, std::span<const int> seed_window,
                              const SamplerConfig& cfg);

// Decodes generated ids through the vocabulary and renders a format-0 MIDI
// file from the token durations.
std::vector<std::uint8_t> render_midi_bytes(std::span<const int> ids, const Vocabulary& vocab,
                                            int velocity = 80);
void render_midi(const std::string& path, std::span<const int> ids, const Vocabulary& vocab,
                 int velocity = 80);

} // namespace melodia
