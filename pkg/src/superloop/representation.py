"""Permutation-invariant note-event representation of 4-bar MIDI loops.

A loop is a multiset of note events.  Each event carries nine attributes
(instrument, pitch, onset beat, onset tick, offset beat, offset tick,
velocity, tempo, tag); a loop is flattened into a token sequence of
length T = n_notes * 9 over a partitioned vocabulary where every
attribute owns a contiguous id block plus one "undefined" token.
Inactive (padding) notes set all nine attributes to undefined.

Timing is fixed at 24 ticks per beat, 16 beats per loop (4 bars of 4/4,
384 ticks total).  Beat value 16 is only legal with tick 0 and marks a
loop-end offset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .instruments import DRUM_CLASS

TICKS_PER_BEAT = 24
BEATS_PER_LOOP = 16
LOOP_TICKS = BEATS_PER_LOOP * TICKS_PER_BEAT  # 384

NUM_ATTRIBUTES = 9
ATTRIBUTE_NAMES = (
    "instrument",
    "pitch",
    "onset_beat",
    "onset_tick",
    "offset_beat",
    "offset_tick",
    "velocity",
    "tempo",
    "tag",
)

INSTRUMENT, PITCH, ONSET_BEAT, ONSET_TICK, OFFSET_BEAT, OFFSET_TICK, VELOCITY, TEMPO, TAG = range(9)

# Tempo bins: 32 log-spaced anchors, 40..250 BPM inclusive.
TEMPO_ANCHORS = np.geomspace(40.0, 250.0, 32)


class RepresentationError(ValueError):
    """Base class for representation-level failures."""


class TooManyNotes(RepresentationError):
    pass


class MixedNote(RepresentationError):
    """A note mixes defined and undefined attributes."""


class BadTiming(RepresentationError):
    """Onset/offset values do not describe a playable note."""


class SyntaxViolation(RepresentationError):
    """A token id is illegal for its position's attribute slot."""


class InvalidNote(RepresentationError):
    """Attribute values out of range or inconsistent (e.g. drum/pitch mix)."""


@dataclass(frozen=True)
class RepresentationConfig:
    """Sub-vocabulary sizes; defaults give the full-scale 387-token layout."""

    instrument_classes: int = 18
    pitched_values: int = 128
    drum_values: int = 46
    beat_values: int = BEATS_PER_LOOP + 1  # 0..16
    tick_values: int = TICKS_PER_BEAT      # 0..23
    velocity_bins: int = 32
    tempo_bins: int = 32
    tag_values: int = 40

    def sizes(self) -> tuple[int, ...]:
        return (
            self.instrument_classes,
            self.pitched_values + self.drum_values,
            self.beat_values,
            self.tick_values,
            self.beat_values,
            self.tick_values,
            self.velocity_bins,
            self.tempo_bins,
            self.tag_values,
        )


@dataclass(frozen=True)
class VocabSpec:
    """Partitioned vocabulary layout.

    Attribute sub-vocabularies occupy disjoint contiguous id ranges in
    the attribute order above; the nine per-attribute undefined tokens
    come last.
    """

    sizes: tuple[int, ...]
    offsets: tuple[int, ...]
    undefined_base: int
    total: int
    pitched_values: int
    drum_values: int

    def token(self, attr: int, value: int) -> int:
        if not 0 <= value < self.sizes[attr]:
            raise InvalidNote(
                f"{ATTRIBUTE_NAMES[attr]} value {value} outside [0, {self.sizes[attr]})"
            )
        return self.offsets[attr] + value

    def undefined_token(self, attr: int) -> int:
        return self.undefined_base + attr

    def is_undefined(self, token: int) -> bool:
        return token >= self.undefined_base

    def attribute_of(self, token: int) -> int:
        if not 0 <= token < self.total:
            raise SyntaxViolation(f"token {token} outside vocabulary of size {self.total}")
        if token >= self.undefined_base:
            return token - self.undefined_base
        for attr in range(NUM_ATTRIBUTES - 1, -1, -1):
            if token >= self.offsets[attr]:
                return attr
        raise SyntaxViolation(f"token {token} not mapped")  # pragma: no cover

    def value_of(self, token: int) -> tuple[int, Optional[int]]:
        """Return (attribute, value); value is None for undefined tokens."""
        attr = self.attribute_of(token)
        if token >= self.undefined_base:
            return attr, None
        return attr, token - self.offsets[attr]

    def sub_vocab(self, attr: int) -> range:
        return range(self.offsets[attr], self.offsets[attr] + self.sizes[attr])

    def valid_count(self, attr: int) -> int:
        """Number of syntactically valid tokens in an attribute slot."""
        return self.sizes[attr] + 1

    def to_config(self) -> RepresentationConfig:
        return RepresentationConfig(
            instrument_classes=self.sizes[INSTRUMENT],
            pitched_values=self.pitched_values,
            drum_values=self.drum_values,
            beat_values=self.sizes[ONSET_BEAT],
            tick_values=self.sizes[ONSET_TICK],
            velocity_bins=self.sizes[VELOCITY],
            tempo_bins=self.sizes[TEMPO],
            tag_values=self.sizes[TAG],
        )


def build_vocab(config: RepresentationConfig = RepresentationConfig()) -> VocabSpec:
    """Lay out the partitioned vocabulary for a representation config."""
    sizes = config.sizes()
    offsets = []
    cursor = 0
    for size in sizes:
        offsets.append(cursor)
        cursor += size
    undefined_base = cursor
    total = cursor + NUM_ATTRIBUTES
    return VocabSpec(
        sizes=sizes,
        offsets=tuple(offsets),
        undefined_base=undefined_base,
        total=total,
        pitched_values=config.pitched_values,
        drum_values=config.drum_values,
    )


def build_syntax_mask(vocab: VocabSpec, n_notes: int) -> np.ndarray:
    """Binary (n_notes*9, |V|) matrix of syntactically legal tokens.

    Row t allows attribute (t mod 9)'s sub-vocabulary plus its undefined
    token; rows therefore repeat with period 9.
    """
    if n_notes < 1:
        raise ValueError("n_notes must be >= 1")
    block = np.zeros((NUM_ATTRIBUTES, vocab.total), dtype=bool)
    for attr in range(NUM_ATTRIBUTES):
        block[attr, vocab.offsets[attr]:vocab.offsets[attr] + vocab.sizes[attr]] = True
        block[attr, vocab.undefined_token(attr)] = True
    mask = np.tile(block, (n_notes, 1))
    mask.flags.writeable = False
    return mask


def quantize_velocity(velocity: float) -> int:
    """Raw MIDI velocity 0..127 -> bin 0..31 (floor(v/4), clamped)."""
    v = int(max(0, min(127, velocity)))
    return v // 4


def velocity_bin_center(bin_index: int) -> int:
    """Representative raw velocity for a bin (round-trips quantization)."""
    return bin_index * 4 + 2


def quantize_tempo(bpm: float) -> int:
    """BPM -> nearest log-spaced anchor bin; input clamped to [20, 320]."""
    bpm = max(20.0, min(320.0, float(bpm)))
    return int(np.argmin(np.abs(np.log(TEMPO_ANCHORS) - np.log(bpm))))


def tempo_bin_bpm(bin_index: int) -> float:
    """Anchor BPM of a tempo bin."""
    return float(TEMPO_ANCHORS[bin_index])


@dataclass(frozen=True, order=True)
class NoteEvent:
    """One active note.  Inactive notes exist only in token form.

    Pitch values 0..127 are MIDI pitches; values >= 128 index the drum
    vocabulary and pair only with the drum instrument class.  ``tempo``
    and ``tag`` replicate loop-global information onto every note.
    """

    onset_beat: int
    onset_tick: int
    instrument: int
    pitch: int
    offset_beat: int
    offset_tick: int
    velocity: int
    tempo: int
    tag: int

    @property
    def onset_ticks(self) -> int:
        return self.onset_beat * TICKS_PER_BEAT + self.onset_tick

    @property
    def offset_ticks(self) -> int:
        return self.offset_beat * TICKS_PER_BEAT + self.offset_tick

    @property
    def is_drum(self) -> bool:
        return self.instrument == DRUM_CLASS

    def attribute(self, attr: int) -> int:
        return (
            self.instrument, self.pitch, self.onset_beat, self.onset_tick,
            self.offset_beat, self.offset_tick, self.velocity, self.tempo, self.tag,
        )[attr]

    def validate(self, vocab: VocabSpec) -> None:
        for attr in range(NUM_ATTRIBUTES):
            value = self.attribute(attr)
            if not 0 <= value < vocab.sizes[attr]:
                raise InvalidNote(
                    f"{ATTRIBUTE_NAMES[attr]}={value} outside [0, {vocab.sizes[attr]})"
                )
        if self.onset_beat == BEATS_PER_LOOP and self.onset_tick != 0:
            raise BadTiming("beat 16 is only legal with tick 0")
        if self.offset_beat == BEATS_PER_LOOP and self.offset_tick != 0:
            raise BadTiming("beat 16 is only legal with tick 0")
        if not self.onset_ticks < self.offset_ticks <= LOOP_TICKS:
            raise BadTiming(
                f"onset {self.onset_ticks} must precede offset {self.offset_ticks} <= {LOOP_TICKS}"
            )
        if self.is_drum and self.pitch < vocab.pitched_values:
            raise InvalidNote(f"drum note with melodic pitch {self.pitch}")
        if not self.is_drum and self.pitch >= vocab.pitched_values:
            raise InvalidNote(f"melodic note with drum pitch {self.pitch}")


def canonical_order(notes: Iterable[NoteEvent]) -> tuple[NoteEvent, ...]:
    """Deterministic encoding order: onset ticks, instrument, pitch, rest."""
    return tuple(sorted(notes, key=lambda n: (
        n.onset_ticks, n.instrument, n.pitch,
        n.offset_ticks, n.velocity, n.tempo, n.tag,
    )))


@dataclass(frozen=True)
class Loop:
    """A 4-bar loop: up to n_notes note events plus global tempo and tags."""

    notes: tuple[NoteEvent, ...]
    tempo_bin: int
    tags: frozenset[int] = field(default_factory=lambda: frozenset({0}))

    def validate(self, vocab: VocabSpec, n_notes: Optional[int] = None) -> None:
        if n_notes is not None and len(self.notes) > n_notes:
            raise TooManyNotes(f"{len(self.notes)} notes > capacity {n_notes}")
        if not self.tags:
            raise InvalidNote("loop must carry at least one tag")
        if not 0 <= self.tempo_bin < vocab.sizes[TEMPO]:
            raise InvalidNote(f"tempo bin {self.tempo_bin} out of range")
        for tag in self.tags:
            if not 0 <= tag < vocab.sizes[TAG]:
                raise InvalidNote(f"tag {tag} out of range")
        for note in self.notes:
            note.validate(vocab)
            if note.tempo != self.tempo_bin:
                raise InvalidNote("note tempo differs from loop tempo_bin")
            if note.tag not in self.tags:
                raise InvalidNote(f"note tag {note.tag} not among loop tags")

    def same_notes(self, other: "Loop") -> bool:
        """Note-multiset equality, order-insensitive."""
        return sorted(self.notes) == sorted(other.notes)


def encode_loop(loop: Loop, vocab: VocabSpec, n_notes: int) -> np.ndarray:
    """Flatten a loop into a length n_notes*9 token sequence.

    Active notes come first in canonical order; remaining slots are
    padded with inactive (all-undefined) notes.
    """
    if len(loop.notes) > n_notes:
        raise TooManyNotes(f"{len(loop.notes)} notes > capacity {n_notes}")
    loop.validate(vocab)
    tokens = np.empty(n_notes * NUM_ATTRIBUTES, dtype=np.int64)
    ordered = canonical_order(loop.notes)
    for slot, note in enumerate(ordered):
        base = slot * NUM_ATTRIBUTES
        for attr in range(NUM_ATTRIBUTES):
            tokens[base + attr] = vocab.token(attr, note.attribute(attr))
    for slot in range(len(ordered), n_notes):
        base = slot * NUM_ATTRIBUTES
        for attr in range(NUM_ATTRIBUTES):
            tokens[base + attr] = vocab.undefined_token(attr)
    return tokens


def decode_tokens(tokens: Sequence[int], vocab: VocabSpec) -> Loop:
    """Invert :func:`encode_loop`.

    Inactive notes are dropped.  Global attributes take the majority
    note value (ties resolve to the smallest id) and are normalised
    back onto every note, so the result always satisfies the loop
    invariants even for model-sampled sequences with stray tempo or tag
    tokens.  An empty sequence decodes to an empty loop at tempo bin 0
    with tag {0}.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or len(tokens) % NUM_ATTRIBUTES != 0:
        raise SyntaxViolation("token sequence length must be a multiple of 9")
    notes = []
    for slot in range(len(tokens) // NUM_ATTRIBUTES):
        base = slot * NUM_ATTRIBUTES
        values = []
        undefined = []
        for attr in range(NUM_ATTRIBUTES):
            token = int(tokens[base + attr])
            t_attr, value = vocab.value_of(token)
            if t_attr != attr:
                raise SyntaxViolation(
                    f"position {base + attr}: token {token} belongs to "
                    f"{ATTRIBUTE_NAMES[t_attr]}, expected {ATTRIBUTE_NAMES[attr]}"
                )
            values.append(value)
            undefined.append(value is None)
        if all(undefined):
            continue
        if any(undefined):
            raise MixedNote(f"note slot {slot} mixes defined and undefined attributes")
        note = NoteEvent(
            instrument=values[INSTRUMENT], pitch=values[PITCH],
            onset_beat=values[ONSET_BEAT], onset_tick=values[ONSET_TICK],
            offset_beat=values[OFFSET_BEAT], offset_tick=values[OFFSET_TICK],
            velocity=values[VELOCITY], tempo=values[TEMPO], tag=values[TAG],
        )
        note.validate(vocab)
        notes.append(note)
    if not notes:
        return Loop(notes=(), tempo_bin=0, tags=frozenset({0}))

    def majority(values):
        values = sorted(values)
        return max(set(values), key=lambda v: (values.count(v), -v))

    tempo = majority(n.tempo for n in notes)
    tag = majority(n.tag for n in notes)
    notes = [
        n if (n.tempo, n.tag) == (tempo, tag) else replace(n, tempo=tempo, tag=tag)
        for n in notes
    ]
    loop = Loop(notes=tuple(notes), tempo_bin=tempo, tags=frozenset({tag}))
    loop.validate(vocab)
    return loop


def sequence_passes_mask(tokens: Sequence[int], mask: np.ndarray) -> bool:
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.shape[0] != mask.shape[0]:
        return False
    return bool(mask[np.arange(len(tokens)), tokens].all())


# ---------------------------------------------------------------------------
# Loop JSON schema (the service's wire format):
#   {"notes": [{"instrument": int, "pitch": int, "onset_beat": int,
#               "onset_tick": int, "offset_beat": int, "offset_tick": int,
#               "velocity": int, "tag": int}, ...],
#    "tempo_bpm": float, "tags": [int, ...]}
# Per-note tempo is implied by the loop-level tempo_bpm.
# ---------------------------------------------------------------------------

def loop_to_json(loop: Loop) -> dict:
    bpm = round(tempo_bin_bpm(loop.tempo_bin), 3)
    if bpm == int(bpm):
        bpm = int(bpm)  # integral BPM serialises identically in JSON everywhere
    return {
        "notes": [
            {
                "instrument": n.instrument,
                "pitch": n.pitch,
                "onset_beat": n.onset_beat,
                "onset_tick": n.onset_tick,
                "offset_beat": n.offset_beat,
                "offset_tick": n.offset_tick,
                "velocity": n.velocity,
                "tag": n.tag,
            }
            for n in canonical_order(loop.notes)
        ],
        "tempo_bpm": bpm,
        "tags": sorted(loop.tags),
    }


def loop_from_json(doc: dict, vocab: VocabSpec) -> Loop:
    tempo_bin = quantize_tempo(float(doc.get("tempo_bpm", 120.0)))
    tags = frozenset(int(t) for t in doc.get("tags", [0])) or frozenset({0})
    default_tag = min(tags)
    notes = []
    for item in doc.get("notes", []):
        notes.append(NoteEvent(
            instrument=int(item["instrument"]),
            pitch=int(item["pitch"]),
            onset_beat=int(item["onset_beat"]),
            onset_tick=int(item["onset_tick"]),
            offset_beat=int(item["offset_beat"]),
            offset_tick=int(item["offset_tick"]),
            velocity=int(item["velocity"]),
            tempo=tempo_bin,
            tag=int(item.get("tag", default_tag)),
        ))
    loop = Loop(notes=tuple(notes), tempo_bin=tempo_bin, tags=tags | {n.tag for n in notes})
    loop.validate(vocab)
    return loop


def loop_to_json_str(loop: Loop) -> str:
    return json.dumps(loop_to_json(loop), sort_keys=True)
