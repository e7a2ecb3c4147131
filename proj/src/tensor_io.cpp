#include "melodia/tensor_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace melodia {
namespace {

constexpr char kMagic[4] = {'M', 'T', 'C', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint16_t u16() { return static_cast<std::uint16_t>(u_n(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(u_n(4)); }
    std::uint64_t u64() { return u_n(8); }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::uint64_t u_n(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    void need(std::size_t n) {
        require(remaining() >= n, Errc::bad_checkpoint, "tensor container truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

} // namespace

void TensorFile::add(const std::string& name, const Mat& m) {
    entries_.push_back(Entry{name, 2, m});
}

void TensorFile::add(const std::string& name, const Vec& v) {
    entries_.push_back(Entry{name, 1, Mat(v)});
}

const TensorFile::Entry& TensorFile::find(const std::string& name, int rank) const {
    for (const auto& e : entries_)
        if (e.name == name) {
            require(e.rank == rank, Errc::bad_checkpoint,
                    "tensor '" + name + "' has unexpected rank");
            return e;
        }
    fail(Errc::bad_checkpoint, "tensor '" + name + "' not found in container");
}

const Mat& TensorFile::mat(const std::string& name) const { return find(name, 2).data; }

Vec TensorFile::vec(const std::string& name) const { return find(name, 1).data.col(0); }

bool TensorFile::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

std::vector<std::uint8_t> TensorFile::serialize() const {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(manifest.size()));
    out.insert(out.end(), manifest.begin(), manifest.end());
    put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        put_u16(out, static_cast<std::uint16_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(static_cast<std::uint8_t>(e.rank));
        if (e.rank == 1) {
            put_u64(out, static_cast<std::uint64_t>(e.data.rows()));
        } else {
            put_u64(out, static_cast<std::uint64_t>(e.data.rows()));
            put_u64(out, static_cast<std::uint64_t>(e.data.cols()));
        }
        for (Index r = 0; r < e.data.rows(); ++r)
            for (Index c = 0; c < e.data.cols(); ++c) put_f64(out, e.data(r, c));
    }
    put_u32(out, crc_of(out.data() + 4, out.size() - 4));
    return out;
}

TensorFile TensorFile::deserialize(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 12 && std::memcmp(bytes.data(), kMagic, 4) == 0,
            Errc::bad_checkpoint, "not a tensor container (bad magic)");
    require(bytes.size() >= 8, Errc::bad_checkpoint, "tensor container truncated");
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t stored_crc = static_cast<std::uint32_t>(bytes[body]) |
                                     static_cast<std::uint32_t>(bytes[body + 1]) << 8 |
                                     static_cast<std::uint32_t>(bytes[body + 2]) << 16 |
                                     static_cast<std::uint32_t>(bytes[body + 3]) << 24;
    require(crc_of(bytes.data() + 4, body - 4) == stored_crc, Errc::bad_checkpoint,
            "tensor container CRC mismatch");

    Reader rd(bytes.subspan(4, body - 4));
    TensorFile tf;
    tf.manifest = rd.str(rd.u32());
    const std::uint32_t count = rd.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        e.name = rd.str(rd.u16());
        const int rank = static_cast<int>(rd.str(1)[0]);
        require(rank == 1 || rank == 2, Errc::bad_checkpoint, "unsupported tensor rank");
        e.rank = rank;
        const std::uint64_t rows = rd.u64();
        const std::uint64_t cols = rank == 2 ? rd.u64() : 1;
        require(rows * cols * 8 <= rd.remaining(), Errc::bad_checkpoint,
                "tensor container truncated");
        e.data.resize(static_cast<Index>(rows), static_cast<Index>(cols));
        for (Index r = 0; r < e.data.rows(); ++r)
            for (Index c = 0; c < e.data.cols(); ++c) e.data(r, c) = rd.f64();
        tf.entries_.push_back(std::move(e));
    }
    return tf;
}

void TensorFile::save(const std::string& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(out.good(), Errc::io_error, "write failed for '" + path + "'");
}

TensorFile TensorFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace melodia
