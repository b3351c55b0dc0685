"""Standard MIDI File parsing and writing.

Parses format 0/1 files into an absolute-tick song structure good
enough for loop mining: per-(track, channel, program) note lists, a
merged tempo map, time signatures and text markers.  Running status,
note-on-velocity-0-as-off and dangling note-ons (closed at track end
with a warning) are handled.  All errors carry the byte offset where
parsing failed.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Optional

from ..instruments import DRUM_CLASS, class_to_program, drum_index_to_key
from ..representation import (
    Loop,
    TICKS_PER_BEAT,
    canonical_order,
    tempo_bin_bpm,
    velocity_bin_center,
)

logger = logging.getLogger(__name__)

DEFAULT_TEMPO_USPQ = 500_000  # 120 BPM
TAG_MARKER_PREFIX = "superloop:tags="


class MidiError(ValueError):
    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class MalformedHeader(MidiError):
    pass


class UnsupportedFormat(MidiError):
    def __init__(self, offset: int, fmt: int):
        self.format = fmt
        super().__init__(offset, f"unsupported SMF format {fmt}")


class TruncatedChunk(MidiError):
    pass


@dataclass(frozen=True)
class MidiNote:
    pitch: int
    velocity: int
    start_tick: int
    end_tick: int


@dataclass
class MidiTrack:
    channel: int
    program: int
    notes: list[MidiNote] = field(default_factory=list)

    @property
    def is_drum(self) -> bool:
        return self.channel == 9


@dataclass
class MidiSong:
    ticks_per_quarter: int
    tracks: list[MidiTrack] = field(default_factory=list)
    tempo_map: list[tuple[int, int]] = field(default_factory=list)       # (tick, us/quarter)
    time_signatures: list[tuple[int, int, int]] = field(default_factory=list)  # (tick, num, den)
    markers: list[tuple[int, str]] = field(default_factory=list)

    def end_tick(self) -> int:
        end = 0
        for track in self.tracks:
            for note in track.notes:
                end = max(end, note.end_tick)
        return end

    def tempo_at(self, tick: int) -> int:
        uspq = DEFAULT_TEMPO_USPQ
        for event_tick, value in self.tempo_map:
            if event_tick <= tick:
                uspq = value
            else:
                break
        return uspq

    def bpm_at(self, tick: int) -> float:
        return 60_000_000.0 / self.tempo_at(tick)

    def four_four_bars(self) -> int:
        """Number of bars in the leading 4/4 region (0 if not in 4/4)."""
        sigs = sorted(self.time_signatures) or [(0, 4, 4)]
        if sigs[0][0] > 0 or (sigs[0][1], sigs[0][2]) != (4, 4):
            return 0
        region_end = self.end_tick()
        for tick, num, den in sigs[1:]:
            if (num, den) != (4, 4):
                region_end = min(region_end, tick)
                break
        bar_ticks = 4 * self.ticks_per_quarter
        return (region_end + bar_ticks - 1) // bar_ticks


def _read_varlen(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    start = pos
    while True:
        if pos >= len(data):
            raise TruncatedChunk(start, "variable-length quantity runs past end of data")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
        if pos - start > 4:
            raise MalformedHeader(start, "variable-length quantity longer than 4 bytes")


def parse_midi(data: bytes) -> MidiSong:
    """Parse a format 0/1 Standard MIDI File."""
    if len(data) < 14:
        raise MalformedHeader(0, "file shorter than an SMF header")
    if data[:4] != b"MThd":
        raise MalformedHeader(0, "missing MThd chunk")
    (header_len, fmt, n_tracks, division) = struct.unpack(">IHHH", data[4:14])
    if header_len < 6:
        raise MalformedHeader(4, f"MThd length {header_len} < 6")
    if fmt == 2:
        raise UnsupportedFormat(8, 2)
    if fmt not in (0, 1):
        raise MalformedHeader(8, f"unknown SMF format {fmt}")
    if division & 0x8000:
        raise MalformedHeader(12, "SMPTE time division is not supported")
    if division == 0:
        raise MalformedHeader(12, "zero ticks per quarter")

    song = MidiSong(ticks_per_quarter=division)
    pos = 8 + header_len
    tracks_read = 0
    while tracks_read < n_tracks:
        if pos + 8 > len(data):
            raise TruncatedChunk(pos, f"expected {n_tracks} tracks, found {tracks_read}")
        chunk_type = data[pos:pos + 4]
        (chunk_len,) = struct.unpack(">I", data[pos + 4:pos + 8])
        chunk_start = pos + 8
        if chunk_start + chunk_len > len(data):
            raise TruncatedChunk(pos, f"chunk of length {chunk_len} runs past end of file")
        if chunk_type == b"MTrk":
            _parse_track(data, chunk_start, chunk_len, song)
            tracks_read += 1
        else:
            logger.warning("skipping unknown chunk %r at offset %d", chunk_type, pos)
        pos = chunk_start + chunk_len

    song.tempo_map.sort()
    song.time_signatures.sort()
    song.markers.sort()
    return song


def _parse_track(data: bytes, start: int, length: int, song: MidiSong) -> None:
    end = start + length
    pos = start
    tick = 0
    running_status: Optional[int] = None
    programs = [0] * 16
    # (channel, program) -> MidiTrack for this chunk
    groups: dict[tuple[int, int], MidiTrack] = {}
    # (channel, pitch) -> FIFO of (start_tick, velocity, program)
    open_notes: dict[tuple[int, int], list[tuple[int, int, int]]] = {}

    def group(channel: int, program: int) -> MidiTrack:
        key = (channel, program)
        if key not in groups:
            groups[key] = MidiTrack(channel=channel, program=program)
        return groups[key]

    def close_note(channel: int, pitch: int, end_tick: int) -> None:
        fifo = open_notes.get((channel, pitch))
        if not fifo:
            return
        start_tick, velocity, program = fifo.pop(0)
        if end_tick > start_tick:
            group(channel, program).notes.append(
                MidiNote(pitch=pitch, velocity=velocity,
                         start_tick=start_tick, end_tick=end_tick)
            )

    while pos < end:
        delta, pos = _read_varlen(data, pos)
        tick += delta
        if pos >= end:
            raise TruncatedChunk(pos, "event status byte missing")
        status = data[pos]
        if status & 0x80:
            pos += 1
            if status < 0xF0:
                running_status = status
        else:
            if running_status is None:
                raise MalformedHeader(pos, "running status without prior status byte")
            status = running_status

        if status == 0xFF:  # meta
            if pos >= end:
                raise TruncatedChunk(pos, "meta event type missing")
            meta_type = data[pos]
            pos += 1
            meta_len, pos = _read_varlen(data, pos)
            if pos + meta_len > end:
                raise TruncatedChunk(pos, "meta event runs past track end")
            payload = data[pos:pos + meta_len]
            pos += meta_len
            if meta_type == 0x51 and meta_len == 3:
                song.tempo_map.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == 0x58 and meta_len >= 2:
                song.time_signatures.append((tick, payload[0], 1 << payload[1]))
            elif meta_type in (0x01, 0x06):
                song.markers.append((tick, payload.decode("latin-1")))
            elif meta_type == 0x2F:
                break
        elif status in (0xF0, 0xF7):  # sysex
            sysex_len, pos = _read_varlen(data, pos)
            if pos + sysex_len > end:
                raise TruncatedChunk(pos, "sysex event runs past track end")
            pos += sysex_len
        else:
            kind = status & 0xF0
            channel = status & 0x0F
            if kind in (0xC0, 0xD0):
                if pos + 1 > end:
                    raise TruncatedChunk(pos, "channel event data missing")
                value = data[pos]
                pos += 1
                if kind == 0xC0:
                    programs[channel] = value
            else:
                if pos + 2 > end:
                    raise TruncatedChunk(pos, "channel event data missing")
                byte1, byte2 = data[pos], data[pos + 1]
                pos += 2
                if kind == 0x90 and byte2 > 0:
                    open_notes.setdefault((channel, byte1), []).append(
                        (tick, byte2, programs[channel])
                    )
                elif kind == 0x80 or (kind == 0x90 and byte2 == 0):
                    close_note(channel, byte1, tick)

    for (channel, pitch), fifo in open_notes.items():
        for _ in range(len(fifo)):
            logger.warning("closing dangling note-on (channel %d pitch %d) at track end",
                           channel, pitch)
            close_note(channel, pitch, tick)

    for key in sorted(groups):
        track = groups[key]
        track.notes.sort(key=lambda n: (n.start_tick, n.pitch))
        song.tracks.append(track)


# ---------------------------------------------------------------------------
# Writing: loops export as single-track format 0 at 24 ticks per quarter.
# ---------------------------------------------------------------------------

def _varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


class ExportError(ValueError):
    pass


def write_loop_midi(loop: Loop) -> bytes:
    """Render a loop as a format-0 SMF.

    24 ticks per quarter (matching the representation grid), tempo meta
    from the loop's tempo-bin anchor, drums on channel 10, a text
    marker carrying the loop tags so re-import preserves them.
    """
    melodic_classes = sorted({n.instrument for n in loop.notes if n.instrument != DRUM_CLASS})
    free_channels = [c for c in range(16) if c != 9]
    if len(melodic_classes) > len(free_channels):
        raise ExportError(f"{len(melodic_classes)} melodic classes exceed 15 channels")
    channel_of = {cls: free_channels[i] for i, cls in enumerate(melodic_classes)}
    channel_of[DRUM_CLASS] = 9

    events: list[tuple[int, int, bytes]] = []  # (tick, order, payload)
    uspq = round(60_000_000 / tempo_bin_bpm(loop.tempo_bin))
    events.append((0, 0, bytes([0xFF, 0x51, 0x03]) + uspq.to_bytes(3, "big")))
    events.append((0, 0, bytes([0xFF, 0x58, 0x04, 4, 2, 24, 8])))
    marker = (TAG_MARKER_PREFIX + ",".join(str(t) for t in sorted(loop.tags))).encode("latin-1")
    events.append((0, 0, bytes([0xFF, 0x06]) + _varlen(len(marker)) + marker))
    for cls in melodic_classes:
        events.append((0, 0, bytes([0xC0 | channel_of[cls], class_to_program(cls)])))

    for note in canonical_order(loop.notes):
        channel = channel_of[note.instrument]
        if note.instrument == DRUM_CLASS:
            key = drum_index_to_key(note.pitch - 128)
        else:
            key = note.pitch
        velocity = velocity_bin_center(note.velocity)
        events.append((note.onset_ticks, 2, bytes([0x90 | channel, key, velocity])))
        events.append((note.offset_ticks, 1, bytes([0x80 | channel, key, 0])))

    events.sort(key=lambda e: (e[0], e[1]))
    track = bytearray()
    cursor = 0
    for tick, _, payload in events:
        track.extend(_varlen(tick - cursor))
        track.extend(payload)
        cursor = tick
    end_tick = max(cursor, 16 * TICKS_PER_BEAT)
    track.extend(_varlen(end_tick - cursor))
    track.extend(bytes([0xFF, 0x2F, 0x00]))

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, TICKS_PER_BEAT)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


def parse_tag_marker(song: MidiSong) -> Optional[frozenset[int]]:
    """Recover loop tags from the export marker, if present."""
    for _, text in song.markers:
        if text.startswith(TAG_MARKER_PREFIX):
            body = text[len(TAG_MARKER_PREFIX):]
            try:
                return frozenset(int(part) for part in body.split(",") if part)
            except ValueError:
                return None
    return None
