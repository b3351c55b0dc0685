import struct

import numpy as np
import pytest

import midi_fixtures as fx
from conftest import make_random_loop

from superloop.corpus.midi import (
    MalformedHeader,
    TruncatedChunk,
    UnsupportedFormat,
    parse_midi,
    parse_tag_marker,
    write_loop_midi,
)
from superloop.corpus.loops import song_to_loop
from superloop.representation import encode_loop


class TestParse:
    def test_minimal_single_note(self):
        song = parse_midi(fx.single_note_file(tpq=96))
        assert song.ticks_per_quarter == 96
        assert len(song.tracks) == 1
        (note,) = song.tracks[0].notes
        assert (note.pitch, note.velocity, note.start_tick, note.end_tick) == (60, 100, 0, 96)
        assert song.tempo_map == [(0, 500_000)]

    def test_running_status_and_velocity_zero_off(self):
        # note-on C4, then running-status note-on with velocity 0 as note-off
        events = (
            fx.varlen(0) + bytes([0x90, 60, 100])
            + fx.varlen(48) + bytes([60, 0])      # running status
            + fx.varlen(0) + bytes([62, 80])      # second note via running status
            + fx.varlen(48) + bytes([62, 0])
            + fx.end_of_track()
        )
        song = parse_midi(fx.header(0, 1, 96) + fx.track(events))
        notes = song.tracks[0].notes
        assert len(notes) == 2
        assert {(n.pitch, n.start_tick, n.end_tick) for n in notes} == \
            {(60, 0, 48), (62, 48, 96)}

    def test_format_two_rejected(self):
        with pytest.raises(UnsupportedFormat) as info:
            parse_midi(fx.header(2, 1, 96))
        assert info.value.format == 2
        assert info.value.offset == 8

    def test_missing_mthd(self):
        with pytest.raises(MalformedHeader) as info:
            parse_midi(b"RIFFxxxxxxxxxxxx")
        assert info.value.offset == 0

    def test_truncated_chunk_carries_offset(self):
        data = fx.single_note_file()
        truncated = data[:-4]
        with pytest.raises(TruncatedChunk) as info:
            parse_midi(truncated)
        assert info.value.offset >= 0

    def test_smpte_division_rejected(self):
        with pytest.raises(MalformedHeader):
            parse_midi(fx.header(0, 1, 0x8000 | 25) + fx.track(fx.end_of_track()))

    def test_dangling_note_on_closed_at_track_end(self, caplog):
        events = fx.varlen(0) + bytes([0x90, 60, 100]) + fx.end_of_track(100)
        song = parse_midi(fx.header(0, 1, 96) + fx.track(events))
        (note,) = song.tracks[0].notes
        assert note.end_tick == 100

    def test_format_one_merges_tempo_map(self):
        meta = fx.track(fx.tempo_event(0, 600_000) + fx.end_of_track())
        notes = fx.track(
            fx.varlen(0) + bytes([0x90, 60, 90]) + fx.varlen(96) + bytes([0x80, 60, 0])
            + fx.end_of_track()
        )
        song = parse_midi(fx.header(1, 2, 96) + meta + notes)
        assert song.tempo_map == [(0, 600_000)]
        assert len(song.tracks) == 1

    def test_program_change_groups_tracks(self):
        events = (
            fx.program_change(0, 0, 0)
            + fx.varlen(0) + bytes([0x90, 60, 90]) + fx.varlen(48) + bytes([0x80, 60, 0])
            + fx.program_change(0, 0, 40)
            + fx.varlen(0) + bytes([0x90, 64, 90]) + fx.varlen(48) + bytes([0x80, 64, 0])
            + fx.end_of_track()
        )
        song = parse_midi(fx.header(0, 1, 96) + fx.track(events))
        programs = sorted(t.program for t in song.tracks)
        assert programs == [0, 40]

    def test_four_four_bars(self):
        song = parse_midi(fx.pattern_song(bars=8, tpq=96))
        assert song.four_four_bars() == 8


class TestExportRoundTrip:
    def test_loop_to_midi_and_back(self, vocab):
        rng = np.random.default_rng(0)
        for _ in range(25):
            loop = make_random_loop(rng, max_notes=12, min_notes=1,
                                    single_tag=True, no_overlap=True)
            data = write_loop_midi(loop)
            song = parse_midi(data)
            back = song_to_loop(song, vocab)
            assert back is not None
            assert back.same_notes(loop)
            assert back.tempo_bin == loop.tempo_bin
            assert back.tags == loop.tags

    def test_tokens_survive_round_trip(self, vocab):
        rng = np.random.default_rng(1)
        loop = make_random_loop(rng, max_notes=8, min_notes=2,
                                single_tag=True, no_overlap=True)
        song = parse_midi(write_loop_midi(loop))
        back = song_to_loop(song, vocab)
        assert (encode_loop(back, vocab, 16) == encode_loop(loop, vocab, 16)).all()

    def test_empty_loop_exports_tempo_only(self, vocab):
        from superloop.representation import Loop
        loop = Loop(notes=(), tempo_bin=10, tags=frozenset({3}))
        song = parse_midi(write_loop_midi(loop))
        assert song.tempo_map
        assert all(not t.notes for t in song.tracks)
        assert parse_tag_marker(song) == frozenset({3})

    def test_drums_on_channel_ten(self, vocab):
        from superloop.representation import Loop, NoteEvent
        note = NoteEvent(instrument=17, pitch=128 + 1, onset_beat=0, onset_tick=0,
                         offset_beat=0, offset_tick=12, velocity=25, tempo=0, tag=0)
        loop = Loop(notes=(note,), tempo_bin=0, tags=frozenset({0}))
        song = parse_midi(write_loop_midi(loop))
        (track,) = [t for t in song.tracks if t.notes]
        assert track.channel == 9  # channel 10, zero-indexed

    def test_export_is_format_zero_24_tpq(self, vocab):
        rng = np.random.default_rng(2)
        loop = make_random_loop(rng, max_notes=4, min_notes=1, no_overlap=True)
        data = write_loop_midi(loop)
        _, fmt, n_tracks, division = struct.unpack(">IHHH", data[4:14])
        assert (fmt, n_tracks, division) == (0, 1, 24)
