#pragma once

#include <stdexcept>
#include <string>

namespace melodia {

enum class Errc {
    // midi
    bad_header,
    truncated_file,
    bad_vlq,
    unknown_status,
    invalid_event,
    // tokens
    bad_token,
    unknown_token,
    empty_corpus,
    too_short,
    // numeric
    shape_mismatch,
    empty_input,
    bad_rate,
    // model
    stale_cache,
    unknown_variant,
    // trainer
    bad_target,
    empty_set,
    divergence,
    // generator
    bad_seed,
    // io
    io_error,
    bad_checkpoint,
    bad_config,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, Errc code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

} // namespace melodia
