#include "melodia/midi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

namespace melodia {
namespace {

constexpr std::uint32_t kMaxVlq = 0x0FFFFFFF;  // 4 encoded bytes

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::size_t pos, std::size_t end)
        : bytes_(bytes), pos_(pos), end_(end) {}

    bool done() const { return pos_ >= end_; }
    std::size_t pos() const { return pos_; }

    std::uint8_t peek() const {
        check(1);
        return bytes_[pos_];
    }

    std::uint8_t u8() {
        check(1);
        return bytes_[pos_++];
    }

    std::uint32_t vlq() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint8_t b = u8();
            v = (v << 7) | (b & 0x7F);
            if (!(b & 0x80)) return v;
        }
        fail(Errc::bad_vlq, "variable-length quantity longer than 4 bytes");
    }

    std::vector<std::uint8_t> take(std::size_t n) {
        check(n);
        std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

private:
    void check(std::size_t n) const {
        require(pos_ + n <= end_, Errc::truncated_file, "track data ends mid-event");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
    std::size_t end_;
};

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) << 24 | static_cast<std::uint32_t>(b[at + 1]) << 16 |
           static_cast<std::uint32_t>(b[at + 2]) << 8 | static_cast<std::uint32_t>(b[at + 3]);
}

std::uint16_t read_be16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[at]) << 8 | b[at + 1]);
}

// Data byte count for channel messages, keyed by the high status nibble.
int channel_data_len(std::uint8_t status) {
    switch (status & 0xF0) {
        case 0xC0:
        case 0xD0:
            return 1;
        default:
            return 2;
    }
}

std::uint8_t data_byte(ByteReader& rd) {
    const std::uint8_t b = rd.u8();
    require(b < 0x80, Errc::invalid_event, "data byte with high bit set");
    return b;
}

std::vector<TrackEvent> parse_track(ByteReader rd) {
    std::vector<TrackEvent> events;
    std::uint8_t running = 0;  // 0 = none
    while (!rd.done()) {
        TrackEvent ev;
        ev.delta_ticks = rd.vlq();
        std::uint8_t status = rd.peek();
        if (status & 0x80) {
            rd.u8();
            if (status < 0xF0)
                running = status;
            else
                running = 0;  // meta and sysex cancel running status
        } else {
            require(running != 0, Errc::unknown_status,
                    "data byte where a status byte was expected");
            status = running;
        }

        if (status == 0xFF) {
            MetaEvent meta;
            meta.type = rd.u8();
            meta.payload = rd.take(rd.vlq());
            const bool end = meta.type == kMetaEndOfTrack;
            ev.body = std::move(meta);
            events.push_back(std::move(ev));
            if (end) return events;  // bytes after end-of-track are ignored
        } else if (status == 0xF0 || status == 0xF7) {
            RawEvent raw;
            raw.status = status;
            raw.payload = rd.take(rd.vlq());
            ev.body = std::move(raw);
            events.push_back(std::move(ev));
        } else {
            const std::uint8_t hi = status & 0xF0;
            const std::uint8_t ch = status & 0x0F;
            if (hi == 0x90) {
                const std::uint8_t pitch = data_byte(rd);
                const std::uint8_t vel = data_byte(rd);
                ev.body = NoteOn{ch, pitch, vel};
            } else if (hi == 0x80) {
                const std::uint8_t pitch = data_byte(rd);
                const std::uint8_t vel = data_byte(rd);
                ev.body = NoteOff{ch, pitch, vel};
            } else {
                RawEvent raw;
                raw.status = status;
                for (int i = 0; i < channel_data_len(status); ++i) raw.payload.push_back(data_byte(rd));
                ev.body = std::move(raw);
            }
            events.push_back(std::move(ev));
        }
    }
    // Track chunk ran out without an end-of-track: close it ourselves.
    events.push_back(TrackEvent{0, MetaEvent{kMetaEndOfTrack, {}}});
    return events;
}

void write_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
    require(v <= kMaxVlq, Errc::invalid_event, "delta time too large for a 4-byte VLQ");
    std::uint8_t buf[4];
    int n = 0;
    do {
        buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
        v >>= 7;
    } while (v != 0);
    while (n > 1) out.push_back(static_cast<std::uint8_t>(buf[--n] | 0x80));
    out.push_back(buf[0]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void check_7bit(int v, const char* what) {
    require(v >= 0 && v <= 127, Errc::invalid_event, std::string(what) + " out of [0,127]");
}

void append_event(std::vector<std::uint8_t>& out, const TrackEvent& ev) {
    write_vlq(out, ev.delta_ticks);
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, NoteOn> || std::is_same_v<T, NoteOff>) {
                require(body.channel <= 15, Errc::invalid_event, "channel out of [0,15]");
                check_7bit(body.pitch, "pitch");
                check_7bit(body.velocity, "velocity");
                const std::uint8_t base = std::is_same_v<T, NoteOn> ? 0x90 : 0x80;
                out.push_back(static_cast<std::uint8_t>(base | body.channel));
                out.push_back(body.pitch);
                out.push_back(body.velocity);
            } else if constexpr (std::is_same_v<T, MetaEvent>) {
                out.push_back(0xFF);
                out.push_back(body.type);
                write_vlq(out, static_cast<std::uint32_t>(body.payload.size()));
                out.insert(out.end(), body.payload.begin(), body.payload.end());
            } else {
                require(body.status >= 0x80, Errc::invalid_event, "raw event without status bit");
                out.push_back(body.status);
                if (body.status == 0xF0 || body.status == 0xF7) {
                    write_vlq(out, static_cast<std::uint32_t>(body.payload.size()));
                    out.insert(out.end(), body.payload.begin(), body.payload.end());
                } else {
                    require(static_cast<int>(body.payload.size()) == channel_data_len(body.status),
                            Errc::invalid_event, "channel event payload length mismatch");
                    for (const std::uint8_t b : body.payload) {
                        require(b < 0x80, Errc::invalid_event, "data byte with high bit set");
                        out.push_back(b);
                    }
                }
            }
        },
        ev.body);
}

// One sounding note in absolute ticks, pre-chord-grouping.
struct TickNote {
    std::int64_t on = 0;
    std::int64_t off = 0;
    int pitch = 0;
    int velocity = 0;
    std::size_t order = 0;
};

} // namespace

double quantize_ql(double ql) { return std::floor(ql / kGridQl + 0.5) * kGridQl; }

MidiFile parse_smf(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 14, Errc::bad_header, "file shorter than an SMF header");
    require(std::memcmp(bytes.data(), "MThd", 4) == 0, Errc::bad_header,
            "missing MThd magic");
    require(read_be32(bytes, 4) == 6, Errc::bad_header, "header length is not 6");

    MidiFile file;
    file.format = read_be16(bytes, 8);
    const std::uint16_t ntrks = read_be16(bytes, 10);
    const std::uint16_t division = read_be16(bytes, 12);
    require(!(division & 0x8000), Errc::bad_header, "SMPTE time division not supported");
    require(division > 0, Errc::bad_header, "ticks per quarter must be positive");
    file.ppq = division;

    std::size_t pos = 14;
    while (file.tracks.size() < ntrks) {
        require(pos + 8 <= bytes.size(), Errc::truncated_file, "missing track chunk");
        const std::uint32_t len = read_be32(bytes, pos + 4);
        const bool is_track = std::memcmp(bytes.data() + pos, "MTrk", 4) == 0;
        pos += 8;
        require(pos + len <= bytes.size(), Errc::truncated_file,
                "chunk length exceeds remaining bytes");
        if (is_track)
            file.tracks.push_back(parse_track(ByteReader(bytes, pos, pos + len)));
        // Unknown chunk types are skipped per the SMF spec.
        pos += len;
    }
    return file;
}

std::vector<std::uint8_t> write_smf(const MidiFile& file) {
    require(file.ppq > 0, Errc::invalid_event, "ticks per quarter must be positive");
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    write_be32(out, 6);
    write_be16(out, file.format);
    write_be16(out, static_cast<std::uint16_t>(file.tracks.size()));
    write_be16(out, file.ppq);

    for (const auto& track : file.tracks) {
        std::vector<std::uint8_t> body;
        bool has_eot = false;
        for (const auto& ev : track) {
            append_event(body, ev);
            const auto* meta = std::get_if<MetaEvent>(&ev.body);
            if (meta && meta->type == kMetaEndOfTrack) {
                has_eot = true;
                break;
            }
        }
        if (!has_eot) append_event(body, TrackEvent{0, MetaEvent{kMetaEndOfTrack, {}}});
        out.insert(out.end(), {'M', 'T', 'r', 'k'});
        write_be32(out, static_cast<std::uint32_t>(body.size()));
        out.insert(out.end(), body.begin(), body.end());
    }
    return out;
}

NoteTimeline events_to_notes(const MidiFile& file) {
    struct Boundary {
        std::int64_t tick;
        std::size_t order;  // global stream position, for stable ties
        bool is_on;
        std::uint8_t channel, pitch;
        std::uint8_t velocity;
    };
    std::vector<Boundary> bounds;
    std::int64_t end_tick = 0;
    std::size_t order = 0;

    for (const auto& track : file.tracks) {
        std::int64_t tick = 0;
        for (const auto& ev : track) {
            tick += ev.delta_ticks;
            if (const auto* on = std::get_if<NoteOn>(&ev.body)) {
                bounds.push_back({tick, order++, on->velocity > 0, on->channel, on->pitch,
                                  on->velocity});
            } else if (const auto* off = std::get_if<NoteOff>(&ev.body)) {
                bounds.push_back({tick, order++, false, off->channel, off->pitch, 0});
            }
        }
        end_tick = std::max(end_tick, tick);
    }
    std::stable_sort(bounds.begin(), bounds.end(), [](const Boundary& a, const Boundary& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        return a.order < b.order;
    });

    NoteTimeline result;
    std::vector<TickNote> sounding;
    std::map<std::pair<int, int>, std::vector<Boundary>> open;  // (channel,pitch) -> FIFO
    std::size_t note_order = 0;
    for (const auto& b : bounds) {
        auto& fifo = open[{b.channel, b.pitch}];
        if (b.is_on) {
            fifo.push_back(b);
        } else if (!fifo.empty()) {
            const Boundary on = fifo.front();
            fifo.erase(fifo.begin());
            sounding.push_back({on.tick, b.tick, on.pitch, on.velocity, note_order++});
        }
        // A stray note-off with nothing open is ignored.
    }
    for (auto& [key, fifo] : open) {
        for (const auto& on : fifo) {
            sounding.push_back({on.tick, end_tick, on.pitch, on.velocity, note_order++});
            ++result.dangling_note_ons;
        }
    }
    std::sort(sounding.begin(), sounding.end(), [](const TickNote& a, const TickNote& b) {
        if (a.on != b.on) return a.on < b.on;
        if (a.pitch != b.pitch) return a.pitch < b.pitch;
        return a.order < b.order;
    });

    // Chord grouping on raw (unquantized) onsets, then snap to the grid.
    const double ppq = file.ppq;
    struct Chord {
        std::set<int> pitches;
        double onset = 0;     // anchor onset, quarter lengths
        double duration = 0;  // max member duration
        int velocity = 0;
    };
    std::vector<Chord> chords;
    for (const auto& n : sounding) {
        const double onset = static_cast<double>(n.on) / ppq;
        const double dur = static_cast<double>(n.off - n.on) / ppq;
        if (!chords.empty() && onset - chords.back().onset < kChordEpsilonQl) {
            chords.back().pitches.insert(n.pitch);
            chords.back().duration = std::max(chords.back().duration, dur);
        } else {
            Chord c;
            c.pitches.insert(n.pitch);
            c.onset = onset;
            c.duration = dur;
            c.velocity = n.velocity;
            chords.push_back(std::move(c));
        }
    }

    double cursor = 0.0;
    auto emit_rest = [&](double gap) {
        // Gaps under one grid step are treated as legato and dropped.
        const double dur = quantize_ql(gap);
        if (dur >= kGridQl) {
            result.notes.push_back(NoteEvent{{}, cursor, dur, 0});
            cursor += dur;
        }
    };
    for (const auto& c : chords) {
        const double onset = quantize_ql(c.onset);
        // A sounded note never quantizes away: clamp to one grid step.
        const double dur = std::max(kGridQl, quantize_ql(c.duration));
        if (onset > cursor) emit_rest(onset - cursor);
        result.notes.push_back(NoteEvent{{c.pitches.begin(), c.pitches.end()}, onset, dur,
                                         c.velocity});
        cursor = std::max(cursor, onset + dur);
    }
    const double span_end = quantize_ql(static_cast<double>(end_tick) / ppq);
    if (span_end > cursor) emit_rest(span_end - cursor);
    return result;
}

MidiFile notes_to_events(std::span<const NoteEvent> notes, int ppq,
                         std::uint32_t tempo_us_per_quarter) {
    require(ppq > 0 && ppq <= 0x7FFF, Errc::invalid_event, "ppq out of range");

    struct Edge {
        std::int64_t tick;
        bool is_on;
        int pitch;
        int velocity;
    };
    std::vector<Edge> edges;
    std::int64_t end_tick = 0;
    for (const auto& n : notes) {
        require(n.duration > 0, Errc::invalid_event, "note duration must be positive");
        const auto on = static_cast<std::int64_t>(std::llround(n.onset * ppq));
        const auto off = static_cast<std::int64_t>(std::llround((n.onset + n.duration) * ppq));
        end_tick = std::max(end_tick, off);
        if (n.is_rest()) continue;
        for (const int p : n.pitches) {
            edges.push_back({on, true, p, n.velocity});
            edges.push_back({off, false, p, 0});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        if (a.is_on != b.is_on) return !a.is_on;  // offs before ons at the same tick
        return a.pitch < b.pitch;
    });

    std::vector<TrackEvent> track;
    track.push_back(TrackEvent{0, MetaEvent{kMetaTempo,
                                            {static_cast<std::uint8_t>(tempo_us_per_quarter >> 16),
                                             static_cast<std::uint8_t>(tempo_us_per_quarter >> 8),
                                             static_cast<std::uint8_t>(tempo_us_per_quarter)}}});
    std::int64_t cursor = 0;
    for (const auto& e : edges) {
        const auto delta = static_cast<std::uint32_t>(e.tick - cursor);
        cursor = e.tick;
        if (e.is_on)
            track.push_back(TrackEvent{delta, NoteOn{0, static_cast<std::uint8_t>(e.pitch),
                                                     static_cast<std::uint8_t>(e.velocity)}});
        else
            track.push_back(TrackEvent{delta, NoteOff{0, static_cast<std::uint8_t>(e.pitch), 0}});
    }
    track.push_back(TrackEvent{static_cast<std::uint32_t>(end_tick - cursor),
                               MetaEvent{kMetaEndOfTrack, {}}});

    MidiFile file;
    file.format = 0;
    file.ppq = static_cast<std::uint16_t>(ppq);
    file.tracks.push_back(std::move(track));
    return file;
}

MidiFile read_midi_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_smf(bytes);
}

void write_midi_file(const std::string& path, const MidiFile& file) {
    const auto bytes = write_smf(file);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(out.good(), Errc::io_error, "write failed for '" + path + "'");
}

} // namespace melodia
