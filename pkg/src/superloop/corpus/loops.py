"""4-bar loop mining from parsed MIDI songs.

A 4-bar window qualifies as a loop candidate when (i) the bar right
after the window repeats the window's first bar (the book-ending
phrase), (ii) the window starts on an important metrical boundary
(salience above a configurable percentile of the song's bar
boundaries), and (iii) the window's first beat carries the maximum
salience inside the window.  Boundary salience comes from a pluggable
analyzer; the default is rule-based (onset counts, drum/bass accents
and metrical-level weights).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from ..instruments import program_to_class, drum_key_to_index
from ..representation import (
    LOOP_TICKS,
    Loop,
    NoteEvent,
    TICKS_PER_BEAT,
    VocabSpec,
    quantize_tempo,
    quantize_velocity,
)
from .midi import MidiSong, parse_tag_marker

BARS_PER_LOOP = 4


class MetricalAnalyzer(Protocol):
    """Seam for metrical structure models: salience per beat boundary."""

    def boundary_saliences(self, song: MidiSong) -> np.ndarray:
        """One nonnegative salience per beat of the leading 4/4 region."""
        ...


@dataclass(frozen=True)
class RuleBasedAnalyzer:
    """Deterministic stand-in for a learned metrical analyzer.

    salience(beat) = onset_weight * onsets + accent_weight * (drum and
    bass onsets) + level_weight * hierarchy level, where the level
    ranks 16-bar > 8-bar > 4-bar > bar > beat boundaries.  Only the
    ordering of values matters downstream.
    """

    onset_weight: float = 1.0
    accent_weight: float = 2.0
    level_weight: float = 10.0

    def boundary_saliences(self, song: MidiSong) -> np.ndarray:
        n_bars = song.four_four_bars()
        n_beats = n_bars * 4
        saliences = np.zeros(n_beats)
        if n_beats == 0:
            return saliences
        tpq = song.ticks_per_quarter
        onsets = np.zeros(n_beats)
        accents = np.zeros(n_beats)
        for track in song.tracks:
            accented = track.is_drum or _is_bass_program(track.program)
            for note in track.notes:
                beat, remainder = divmod(note.start_tick, tpq)
                if remainder == 0 and beat < n_beats:
                    onsets[beat] += 1
                    if accented:
                        accents[beat] += 1
        levels = np.ones(n_beats)
        for beat in range(0, n_beats, 4):
            bar = beat // 4
            if bar % 16 == 0:
                levels[beat] = 5
            elif bar % 8 == 0:
                levels[beat] = 4
            elif bar % 4 == 0:
                levels[beat] = 3
            else:
                levels[beat] = 2
        return (self.onset_weight * onsets
                + self.accent_weight * accents
                + self.level_weight * levels)


def _is_bass_program(program: int) -> bool:
    return 32 <= program <= 39


def default_metrical_salience(song: MidiSong) -> np.ndarray:
    """Boundary saliences from the default rule-based analyzer."""
    return RuleBasedAnalyzer().boundary_saliences(song)


@dataclass(frozen=True)
class DetectConfig:
    salience_percentile: float = 75.0
    include_velocity: bool = False  # velocity-sensitive bar matching
    max_notes: int = 300
    default_tag: int = 0


@dataclass(frozen=True)
class LoopCandidate:
    source_id: str
    start_bar: int
    n_bars: int
    loop: Loop
    match_score: float
    start_salience: float


def _bar_content(song: MidiSong, bar: int, include_velocity: bool) -> tuple:
    """Multiset signature of one bar: (class, pitch, quantized onset)."""
    tpq = song.ticks_per_quarter
    start = bar * 4 * tpq
    end = start + 4 * tpq
    items = []
    for track in song.tracks:
        cls = program_to_class(track.program, track.is_drum)
        for note in track.notes:
            if start <= note.start_tick < end:
                onset = round((note.start_tick - start) * TICKS_PER_BEAT / tpq)
                entry = (cls, note.pitch, onset)
                if include_velocity:
                    entry += (quantize_velocity(note.velocity),)
                items.append(entry)
    return tuple(sorted(items))


def extract_window_loop(
    song: MidiSong,
    start_bar: int,
    vocab: VocabSpec,
    config: DetectConfig = DetectConfig(),
    tags: Optional[frozenset[int]] = None,
) -> Optional[Loop]:
    """Quantize a 4-bar window onto the loop grid.

    Onsets are rounded to 24 ticks per beat; offsets are clamped to the
    loop end and stretched to at least one tick.  Returns None when the
    window holds no notes or exceeds the note capacity.
    """
    tpq = song.ticks_per_quarter
    window_start = start_bar * 4 * tpq
    window_end = window_start + BARS_PER_LOOP * 4 * tpq
    tempo_bin = quantize_tempo(song.bpm_at(window_start))
    if tags is None:
        tags = parse_tag_marker(song) or frozenset({config.default_tag})
    tag = min(tags)
    notes = []
    for track in song.tracks:
        cls = program_to_class(track.program, track.is_drum)
        for note in track.notes:
            if not window_start <= note.start_tick < window_end:
                continue
            onset = round((note.start_tick - window_start) * TICKS_PER_BEAT / tpq)
            if onset >= LOOP_TICKS:
                continue
            offset = round((note.end_tick - window_start) * TICKS_PER_BEAT / tpq)
            offset = min(offset, LOOP_TICKS)
            if offset <= onset:
                offset = onset + 1
            if track.is_drum:
                pitch = vocab.pitched_values + drum_key_to_index(note.pitch)
            else:
                pitch = min(note.pitch, vocab.pitched_values - 1)
            notes.append(NoteEvent(
                instrument=cls,
                pitch=pitch,
                onset_beat=onset // TICKS_PER_BEAT,
                onset_tick=onset % TICKS_PER_BEAT,
                offset_beat=offset // TICKS_PER_BEAT,
                offset_tick=offset % TICKS_PER_BEAT,
                velocity=quantize_velocity(note.velocity),
                tempo=tempo_bin,
                tag=tag,
            ))
    if not notes or len(notes) > config.max_notes:
        return None
    loop = Loop(notes=tuple(notes), tempo_bin=tempo_bin, tags=frozenset({tag}))
    loop.validate(vocab)
    return loop


def song_to_loop(
    song: MidiSong,
    vocab: VocabSpec,
    tags: Optional[frozenset[int]] = None,
) -> Optional[Loop]:
    """Treat (up to) the first four bars of a song as one loop."""
    return extract_window_loop(song, 0, vocab, tags=tags)


def detect_loops(
    song: MidiSong,
    vocab: VocabSpec,
    analyzer: Optional[MetricalAnalyzer] = None,
    config: DetectConfig = DetectConfig(),
    source_id: str = "",
) -> list[LoopCandidate]:
    """Mine 4-bar loop candidates from a song.

    Applies the three-part heuristic bar by bar, extracts and validates
    qualifying windows, and deduplicates overlapping candidates keeping
    the highest start salience (earlier window on ties).
    """
    analyzer = analyzer if analyzer is not None else RuleBasedAnalyzer()
    n_bars = song.four_four_bars()
    if n_bars < BARS_PER_LOOP + 1:
        return []
    saliences = analyzer.boundary_saliences(song)
    bar_saliences = saliences[::4]
    threshold = float(np.percentile(bar_saliences, config.salience_percentile))

    candidates = []
    bar_cache = {bar: _bar_content(song, bar, config.include_velocity)
                 for bar in range(n_bars)}
    for bar in range(n_bars - BARS_PER_LOOP):
        first = bar_cache[bar]
        if not first:
            continue
        if first != bar_cache[bar + BARS_PER_LOOP]:
            continue  # (i) not book-ended
        start_salience = float(bar_saliences[bar])
        if start_salience < threshold:
            continue  # (ii) start is not an important boundary
        window = saliences[bar * 4:(bar + BARS_PER_LOOP) * 4]
        if start_salience < window.max():
            continue  # (iii) first beat is not the window's peak
        loop = extract_window_loop(song, bar, vocab, config)
        if loop is None:
            continue
        candidates.append(LoopCandidate(
            source_id=source_id,
            start_bar=bar,
            n_bars=BARS_PER_LOOP,
            loop=loop,
            match_score=1.0,
            start_salience=start_salience,
        ))

    kept: list[LoopCandidate] = []
    for candidate in sorted(candidates, key=lambda c: (-c.start_salience, c.start_bar)):
        overlaps = any(
            candidate.start_bar < other.start_bar + BARS_PER_LOOP
            and other.start_bar < candidate.start_bar + BARS_PER_LOOP
            for other in kept
        )
        if not overlaps:
            kept.append(candidate)
    kept.sort(key=lambda c: c.start_bar)
    return kept
