#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "melodia/error.hpp"

namespace melodia {

// Standard MIDI File codec. Chunks "MThd"/"MTrk", big-endian lengths,
// variable-length-quantity delta times, status bytes 0x80..0xFF.
//
// The writer is canonical: minimal-length VLQs and no running-status
// compression (every event carries its status byte). The parser accepts
// running status and resolves it, so parse(write(f)) == f structurally.

struct NoteOn {
    std::uint8_t channel = 0;
    std::uint8_t pitch = 0;
    std::uint8_t velocity = 0;
    bool operator==(const NoteOn&) const = default;
};

struct NoteOff {
    std::uint8_t channel = 0;
    std::uint8_t pitch = 0;
    std::uint8_t velocity = 0;
    bool operator==(const NoteOff&) const = default;
};

// Meta event (status 0xFF). Tempo is type 0x51, end-of-track 0x2F; unknown
// types ride along with their payload untouched.
struct MetaEvent {
    std::uint8_t type = 0;
    std::vector<std::uint8_t> payload;
    bool operator==(const MetaEvent&) const = default;
};

// Any other channel message or sysex, kept opaque. For channel messages the
// payload is the data bytes after the status; for 0xF0/0xF7 the payload is
// the sysex body (the length prefix is re-encoded on write).
struct RawEvent {
    std::uint8_t status = 0;
    std::vector<std::uint8_t> payload;
    bool operator==(const RawEvent&) const = default;
};

using EventBody = std::variant<NoteOn, NoteOff, MetaEvent, RawEvent>;

struct TrackEvent {
    std::uint32_t delta_ticks = 0;
    EventBody body;
    bool operator==(const TrackEvent&) const = default;
};

struct MidiFile {
    std::uint16_t format = 0;
    std::uint16_t ppq = 480;  // ticks per quarter note, > 0
    std::vector<std::vector<TrackEvent>> tracks;
    bool operator==(const MidiFile&) const = default;
};

inline constexpr std::uint8_t kMetaTempo = 0x51;
inline constexpr std::uint8_t kMetaEndOfTrack = 0x2F;
inline constexpr std::uint32_t kDefaultTempo = 500000;  // us per quarter, 120 BPM

// A pitched event (or rest) in musical time. Canonical values sit on the
// sixteenth-note grid: onsets and durations are multiples of 1/4 quarter.
struct NoteEvent {
    std::vector<int> pitches;  // strictly ascending; empty = rest
    double onset = 0.0;        // quarter lengths, >= 0
    double duration = 0.0;     // quarter lengths, > 0
    int velocity = 0;          // 0 for rests
    bool is_rest() const { return pitches.empty(); }
    bool operator==(const NoteEvent&) const = default;
};

// Quantization grid (quarter lengths) and the onset tolerance under which two
// notes count as one chord.
inline constexpr double kGridQl = 0.25;
inline constexpr double kChordEpsilonQl = 1.0 / 16.0;

// Round half up to the grid.
double quantize_ql(double ql);

struct NoteTimeline {
    std::vector<NoteEvent> notes;
    int dangling_note_ons = 0;  // note-ons closed at end of track
};

// Throws Error with Errc::bad_header / truncated_file / bad_vlq /
// unknown_status / invalid_event.
MidiFile parse_smf(std::span<const std::uint8_t> bytes);

// Canonical serialization; throws Errc::invalid_event on out-of-range fields.
std::vector<std::uint8_t> write_smf(const MidiFile& file);

// Flattens all tracks onto one timeline, pairs note-ons with note-offs,
// groups near-simultaneous onsets into chords, snaps to the grid, and fills
// gaps of at least one grid step with rests.
NoteTimeline events_to_notes(const MidiFile& file);

// Single-track format-0 file: tempo meta at tick 0, rests as pure gaps.
MidiFile notes_to_events(std::span<const NoteEvent> notes, int ppq,
                         std::uint32_t tempo_us_per_quarter = kDefaultTempo);

// Convenience container round-trips.
MidiFile read_midi_file(const std::string& path);
void write_midi_file(const std::string& path, const MidiFile& file);

} // namespace melodia
