#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "melodia/error.hpp"
#include "melodia/midi.hpp"
#include "melodia/numeric.hpp"

namespace melodia {

// One note/chord/rest-duration symbol. Canonical text form: pitches joined by
// "." in ascending order (or "R" for a rest), then "|", then the duration in
// quarter lengths with two fractional digits. Examples: "60|0.50",
// "60.64.67|0.25", "R|1.00".
struct Token {
    std::vector<int> pitches;  // strictly ascending; empty = rest
    double duration = 0.0;     // > 0, on the quantization grid

    std::string str() const;
    static Token parse(const std::string& text);  // Errc::bad_token
    static Token from_note(const NoteEvent& note);

    bool operator==(const Token&) const = default;
};

std::vector<Token> tokenize(std::span<const NoteEvent> notes);

// Rebuilds note events from tokens: onsets are the running sum of durations.
// Tokens carry no dynamics, so sounding notes get a fixed velocity.
std::vector<NoteEvent> detokenize(std::span<const Token> tokens, int velocity = 80);

// Bijection token <-> dense id. Ids follow the lexicographic order of the
// canonical strings, so a vocabulary is a pure function of the corpus.
class Vocabulary {
public:
    static Vocabulary build(const std::vector<std::vector<Token>>& corpus);  // Errc::empty_corpus

    int size() const { return static_cast<int>(tokens_.size()); }
    int id(const std::string& text) const;  // Errc::unknown_token
    int id(const Token& t) const { return id(t.str()); }
    const std::string& text(int id) const;
    Token token(int id) const { return Token::parse(text(id)); }

    std::vector<int> encode(std::span<const Token> tokens) const;
    std::vector<Token> decode(std::span<const int> ids) const;

    // One token per line; the line number is the id.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    explicit Vocabulary(std::vector<std::string> sorted_tokens);
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Stride-s sliding windows over an id stream: window w is the slice
// [w*s, w*s + L) and its target is the id that follows.
class WindowSet {
public:
    WindowSet(std::vector<int> ids, int window_len, int stride = 1);  // Errc::too_short

    int count() const;
    int window_len() const { return window_len_; }
    std::span<const int> input(int w) const;
    int target(int w) const;
    const std::vector<int>& ids() const { return ids_; }

private:
    std::vector<int> ids_;
    int window_len_;
    int stride_;
};

inline WindowSet make_windows(std::vector<int> ids, int window_len = 100, int stride = 1) {
    return WindowSet(std::move(ids), window_len, stride);
}

// Splits a stream into R equal contiguous rows (tail dropped) and hands out
// batch b as the b-th C-length chunk of every row.
class BatchPlan {
public:
    BatchPlan(std::size_t stream_len, int rows, int chunk);  // Errc::too_short

    struct Slice {
        std::size_t begin;
        std::size_t end;
    };

    int rows() const { return rows_; }
    int chunk() const { return chunk_; }
    std::size_t row_len() const { return row_len_; }
    int batches() const { return batches_; }
    std::size_t row_begin(int row) const { return static_cast<std::size_t>(row) * row_len_; }
    Slice slice(int batch, int row) const;  // absolute indices into the stream

private:
    int rows_;
    int chunk_;
    std::size_t row_len_;
    int batches_;
};

inline BatchPlan make_batches(std::span<const int> ids, int rows = 16, int chunk = 64) {
    return BatchPlan(ids.size(), rows, chunk);
}

// Model input encoding: each id becomes the scalar id / V in [0, 1).
Vec encode_input(std::span<const int> window, int vocab_size);

} // namespace melodia
