#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "melodia/numeric.hpp"

namespace melodia {

// Named-tensor container. On-disk layout (all integers little-endian):
//
//   bytes 0..3   magic "MTC1"
//   u32          manifest length, then that many UTF-8 bytes (free-form JSON)
//   u32          entry count
//   per entry:   u16 name length, name bytes
//                u8  rank (1 = vector, 2 = matrix)
//                u64 dims[rank]          (matrix: rows, cols)
//                f64 values, row-major
//   u32          CRC-32 of everything between the magic and this field
//
// Entry order is preserved, so serializing the same container twice yields
// identical bytes.
class TensorFile {
public:
    struct Entry {
        std::string name;
        int rank = 2;  // 1 for vectors
        Mat data;      // vectors held as n x 1
    };

    std::string manifest;

    void add(const std::string& name, const Mat& m);
    void add(const std::string& name, const Vec& v);

    const Mat& mat(const std::string& name) const;
    Vec vec(const std::string& name) const;
    bool has(const std::string& name) const;

    const std::vector<Entry>& entries() const { return entries_; }

    std::vector<std::uint8_t> serialize() const;
    static TensorFile deserialize(std::span<const std::uint8_t> bytes);

    void save(const std::string& path) const;
    static TensorFile load(const std::string& path);

private:
    const Entry& find(const std::string& name, int rank) const;
    std::vector<Entry> entries_;
};

} // namespace melodia
