#pragma once

#include <string>
#include <vector>

#include "melodia/tokens.hpp"

namespace melodia {

// One line per MIDI file, '#' comments. Relative entries resolve against the
// manifest's own directory.
std::vector<std::string> read_manifest(const std::string& path);

// Tokenized corpus plus its vocabulary, in manifest order.
struct CorpusCache {
    std::vector<std::string> sources;
    std::vector<std::vector<Token>> songs;
    Vocabulary vocab;

    CorpusCache(std::vector<std::string> sources, std::vector<std::vector<Token>> songs,
                Vocabulary vocab);

    std::size_t total_tokens() const;
    std::vector<std::vector<int>> encode_songs() const;
};

// Parses and tokenizes every file (worker threads split the list; results
// keep manifest order regardless of the thread count).
CorpusCache ingest_corpus(const std::vector<std::string>& midi_paths, int threads = 1);

// Cache directory layout:
//   cache.json          index (sources, token counts, file names)
//   vocab.txt           one token per line, line number = id
//   songs/NNNN.tokens   one token per line, manifest order
void save_cache(const std::string& dir, const CorpusCache& cache);
CorpusCache load_cache(const std::string& dir);

} // namespace melodia
