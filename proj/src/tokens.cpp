#include "melodia/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace melodia {
namespace {

bool on_grid(double ql) {
    const double steps = ql / kGridQl;
    return std::abs(steps - std::round(steps)) < 1e-9;
}

// Duration text is always <int>.<2 digits>; grid multiples need no more.
std::string format_duration(double ql) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", ql);
    return buf;
}

} // namespace

std::string Token::str() const {
    std::string out;
    if (pitches.empty()) {
        out = "R";
    } else {
        for (std::size_t i = 0; i < pitches.size(); ++i) {
            if (i) out += '.';
            out += std::to_string(pitches[i]);
        }
    }
    out += '|';
    out += format_duration(duration);
    return out;
}

Token Token::parse(const std::string& text) {
    const auto bar = text.find('|');
    require(bar != std::string::npos && bar > 0 && bar + 1 < text.size(), Errc::bad_token,
            "token '" + text + "' is missing the '|' separator");

    Token t;
    const std::string head = text.substr(0, bar);
    if (head != "R") {
        require(head.back() != '.', Errc::bad_token,
                "token '" + text + "' has an empty pitch");
        int prev = -1;
        std::size_t i = 0;
        while (i < head.size()) {
            std::size_t j = head.find('.', i);
            if (j == std::string::npos) j = head.size();
            require(j > i, Errc::bad_token, "token '" + text + "' has an empty pitch");
            int pitch = 0;
            for (std::size_t k = i; k < j; ++k) {
                require(head[k] >= '0' && head[k] <= '9', Errc::bad_token,
                        "token '" + text + "' has a non-numeric pitch");
                pitch = pitch * 10 + (head[k] - '0');
                require(pitch <= 127, Errc::bad_token, "token '" + text + "' pitch > 127");
            }
            require(pitch > prev, Errc::bad_token,
                    "token '" + text + "' pitches are not strictly ascending");
            t.pitches.push_back(pitch);
            prev = pitch;
            i = j + 1;
        }
    }

    // Duration: digits '.' two digits, a positive grid multiple.
    const std::string tail = text.substr(bar + 1);
    const auto dot = tail.find('.');
    require(dot != std::string::npos && dot > 0 && tail.size() == dot + 3, Errc::bad_token,
            "token '" + text + "' duration must have two fractional digits");
    long hundredths = 0;
    for (std::size_t k = 0; k < tail.size(); ++k) {
        if (k == dot) continue;
        require(tail[k] >= '0' && tail[k] <= '9', Errc::bad_token,
                "token '" + text + "' has a non-numeric duration");
        require(hundredths < 100000000, Errc::bad_token, "token '" + text + "' duration too large");
        hundredths = hundredths * 10 + (tail[k] - '0');
    }
    require(hundredths > 0 && hundredths % 25 == 0, Errc::bad_token,
            "token '" + text + "' duration is not a positive multiple of 0.25");
    t.duration = static_cast<double>(hundredths) / 100.0;
    return t;
}

Token Token::from_note(const NoteEvent& note) {
    require(note.duration > 0 && on_grid(note.duration), Errc::bad_token,
            "note duration is not a positive grid multiple");
    Token t;
    t.pitches = note.pitches;
    t.duration = note.duration;
    return t;
}

std::vector<Token> tokenize(std::span<const NoteEvent> notes) {
    std::vector<Token> out;
    out.reserve(notes.size());
    for (const auto& n : notes) out.push_back(Token::from_note(n));
    return out;
}

std::vector<NoteEvent> detokenize(std::span<const Token> tokens, int velocity) {
    std::vector<NoteEvent> out;
    out.reserve(tokens.size());
    double onset = 0.0;
    for (const auto& t : tokens) {
        NoteEvent n;
        n.pitches = t.pitches;
        n.onset = onset;
        n.duration = t.duration;
        n.velocity = t.pitches.empty() ? 0 : velocity;
        onset += t.duration;
        out.push_back(std::move(n));
    }
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> sorted_tokens) : tokens_(std::move(sorted_tokens)) {
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<Token>>& corpus) {
    std::set<std::string> uniq;
    for (const auto& song : corpus)
        for (const auto& t : song) uniq.insert(t.str());
    require(!uniq.empty(), Errc::empty_corpus, "cannot build a vocabulary from an empty corpus");
    return Vocabulary(std::vector<std::string>(uniq.begin(), uniq.end()));
}

int Vocabulary::id(const std::string& text) const {
    const auto it = index_.find(text);
    require(it != index_.end(), Errc::unknown_token,
            "token '" + text + "' is not in the vocabulary");
    return it->second;
}

const std::string& Vocabulary::text(int id) const {
    require(id >= 0 && id < size(), Errc::unknown_token,
            "id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::span<const Token> tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

std::vector<Token> Vocabulary::decode(std::span<const int> ids) const {
    std::vector<Token> out;
    out.reserve(ids.size());
    for (const int i : ids) out.push_back(token(i));
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot open '" + path + "' for writing");
    for (const auto& t : tokens_) out << t << '\n';
    require(out.good(), Errc::io_error, "write failed for '" + path + "'");
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open '" + path + "'");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Token::parse(line);  // validate
        tokens.push_back(line);
    }
    require(!tokens.empty(), Errc::empty_corpus, "vocabulary file '" + path + "' is empty");
    require(std::is_sorted(tokens.begin(), tokens.end()), Errc::bad_token,
            "vocabulary file '" + path + "' is not sorted");
    return Vocabulary(std::move(tokens));
}

WindowSet::WindowSet(std::vector<int> ids, int window_len, int stride)
    : ids_(std::move(ids)), window_len_(window_len), stride_(stride) {
    require(window_len_ > 0 && stride_ > 0, Errc::bad_config,
            "window length and stride must be positive");
    require(ids_.size() > static_cast<std::size_t>(window_len_), Errc::too_short,
            "id stream of length " + std::to_string(ids_.size()) +
                " is too short for windows of length " + std::to_string(window_len_) +
                " (need at least " + std::to_string(window_len_ + 1) + ")");
}

int WindowSet::count() const {
    const auto last_start = ids_.size() - static_cast<std::size_t>(window_len_) - 1;
    return static_cast<int>(last_start / static_cast<std::size_t>(stride_)) + 1;
}

std::span<const int> WindowSet::input(int w) const {
    const std::size_t start = static_cast<std::size_t>(w) * static_cast<std::size_t>(stride_);
    return {ids_.data() + start, static_cast<std::size_t>(window_len_)};
}

int WindowSet::target(int w) const {
    const std::size_t start = static_cast<std::size_t>(w) * static_cast<std::size_t>(stride_);
    return ids_[start + static_cast<std::size_t>(window_len_)];
}

BatchPlan::BatchPlan(std::size_t stream_len, int rows, int chunk) : rows_(rows), chunk_(chunk) {
    require(rows > 0 && chunk > 0, Errc::bad_config, "rows and chunk must be positive");
    require(stream_len >= static_cast<std::size_t>(rows) * static_cast<std::size_t>(chunk),
            Errc::too_short, "id stream of length " + std::to_string(stream_len) +
                                 " is shorter than rows*chunk = " +
                                 std::to_string(static_cast<long>(rows) * chunk));
    row_len_ = stream_len / static_cast<std::size_t>(rows);
    batches_ = static_cast<int>(row_len_ / static_cast<std::size_t>(chunk));
}

BatchPlan::Slice BatchPlan::slice(int batch, int row) const {
    const std::size_t begin =
        row_begin(row) + static_cast<std::size_t>(batch) * static_cast<std::size_t>(chunk_);
    return {begin, begin + static_cast<std::size_t>(chunk_)};
}

Vec encode_input(std::span<const int> window, int vocab_size) {
    require(vocab_size > 0, Errc::bad_config, "vocabulary size must be positive");
    Vec x(static_cast<Index>(window.size()));
    for (std::size_t i = 0; i < window.size(); ++i) {
        require(window[i] >= 0 && window[i] < vocab_size, Errc::bad_target,
                "id " + std::to_string(window[i]) + " outside vocabulary of size " +
                    std::to_string(vocab_size));
        x(static_cast<Index>(i)) = static_cast<double>(window[i]) / vocab_size;
    }
    return x;
}

} // namespace melodia
