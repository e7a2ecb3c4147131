#include "melodia/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "melodia/error.hpp"
#include "melodia/midi.hpp"

namespace fs = std::filesystem;

namespace melodia {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<Token> tokenize_file(const std::string& path) {
    try {
        const MidiFile midi = read_midi_file(path);
        return tokenize(events_to_notes(midi).notes);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

std::string song_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04zu.tokens", index);
    return buf;
}

void write_token_file(const fs::path& path, const std::vector<Token>& tokens) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot open '" + path.string() + "' for writing");
    for (const auto& t : tokens) out << t.str() << '\n';
    require(out.good(), Errc::io_error, "write failed for '" + path.string() + "'");
}

std::vector<Token> read_token_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open '" + path.string() + "'");
    std::vector<Token> tokens;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (!line.empty()) tokens.push_back(Token::parse(line));
    }
    return tokens;
}

} // namespace

std::vector<std::string> read_manifest(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open manifest '" + path + "'");
    const fs::path base = fs::path(path).parent_path();
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        fs::path entry(line);
        if (entry.is_relative()) entry = base / entry;
        out.push_back(entry.lexically_normal().string());
    }
    require(!out.empty(), Errc::empty_corpus, "manifest '" + path + "' lists no files");
    return out;
}

CorpusCache::CorpusCache(std::vector<std::string> sources_in,
                         std::vector<std::vector<Token>> songs_in, Vocabulary vocab_in)
    : sources(std::move(sources_in)), songs(std::move(songs_in)), vocab(std::move(vocab_in)) {
    require(sources.size() == songs.size(), Errc::shape_mismatch,
            "corpus sources and songs differ in length");
}

std::size_t CorpusCache::total_tokens() const {
    std::size_t n = 0;
    for (const auto& s : songs) n += s.size();
    return n;
}

std::vector<std::vector<int>> CorpusCache::encode_songs() const {
    std::vector<std::vector<int>> out;
    out.reserve(songs.size());
    for (const auto& s : songs) out.push_back(vocab.encode(s));
    return out;
}

CorpusCache ingest_corpus(const std::vector<std::string>& midi_paths, int threads) {
    require(!midi_paths.empty(), Errc::empty_corpus, "no MIDI files to ingest");
    const std::size_t n = midi_paths.size();
    std::vector<std::vector<Token>> songs(n);

    const int workers = std::clamp<int>(threads, 1, static_cast<int>(n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) songs[i] = tokenize_file(midi_paths[i]);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        auto run = [&](int t, std::size_t lo, std::size_t hi) {
            try {
                for (std::size_t i = lo; i < hi; ++i) songs[i] = tokenize_file(midi_paths[i]);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        };
        std::vector<std::thread> pool;
        const std::size_t per = (n + workers - 1) / workers;
        for (int t = 0; t < workers; ++t) {
            const std::size_t lo = static_cast<std::size_t>(t) * per;
            const std::size_t hi = std::min(n, lo + per);
            if (lo >= hi) break;
            pool.emplace_back(run, t, lo, hi);
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    Vocabulary vocab = Vocabulary::build(songs);
    return CorpusCache(midi_paths, std::move(songs), std::move(vocab));
}

void save_cache(const std::string& dir, const CorpusCache& cache) {
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "songs", ec);
    require(!ec, Errc::io_error, "cannot create cache directory '" + dir + "'");

    nlohmann::json index;
    index["format"] = "melodia-cache";
    index["version"] = 1;
    index["vocab"] = "vocab.txt";
    index["vocab_size"] = cache.vocab.size();
    auto& song_list = index["songs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < cache.songs.size(); ++i) {
        const std::string file = song_file_name(i);
        write_token_file(root / "songs" / file, cache.songs[i]);
        song_list.push_back({{"source", cache.sources[i]},
                             {"file", "songs/" + file},
                             {"tokens", cache.songs[i].size()}});
    }
    cache.vocab.save((root / "vocab.txt").string());

    std::ofstream out(root / "cache.json", std::ios::binary);
    require(out.good(), Errc::io_error, "cannot open cache index for writing");
    out << index.dump(2) << '\n';
    require(out.good(), Errc::io_error, "write failed for cache index");
}

CorpusCache load_cache(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "cache.json", std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open '" + (root / "cache.json").string() + "'");
    nlohmann::json index;
    try {
        in >> index;
        require(index.at("format") == "melodia-cache", Errc::bad_config, "not a corpus cache");
        require(index.at("version") == 1, Errc::bad_config, "unsupported cache version");

        std::vector<std::string> sources;
        std::vector<std::vector<Token>> songs;
        for (const auto& entry : index.at("songs")) {
            sources.push_back(entry.at("source").get<std::string>());
            const auto file = entry.at("file").get<std::string>();
            songs.push_back(read_token_file(root / file));
            require(songs.back().size() == entry.at("tokens").get<std::size_t>(),
                    Errc::bad_config, "token count mismatch for '" + file + "'");
        }
        Vocabulary vocab =
            Vocabulary::load((root / index.at("vocab").get<std::string>()).string());
        require(vocab.size() == index.at("vocab_size").get<int>(), Errc::bad_config,
                "vocabulary size mismatch in cache index");
        for (const auto& song : songs)
            for (const auto& t : song) vocab.id(t);  // unknown_token on drift
        return CorpusCache(std::move(sources), std::move(songs), std::move(vocab));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_config, "unreadable cache index: " + std::string(e.what()));
    }
}

} // namespace melodia
