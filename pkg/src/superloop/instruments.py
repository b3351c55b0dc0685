"""Instrument class table and General MIDI mappings.

The engine groups the 128 General MIDI programs into 17 melodic classes
(the 16 GM families, with the bass family split into acoustic and
electric/synth) plus one drum class, for 18 classes total.  Drum notes
live on their own 46-entry percussion-key vocabulary.
"""

from __future__ import annotations

# (name, first GM program, last GM program inclusive); drums handled separately.
MELODIC_CLASSES = (
    ("piano", 0, 7),
    ("chromatic_percussion", 8, 15),
    ("organ", 16, 23),
    ("guitar", 24, 31),
    ("acoustic_bass", 32, 32),
    ("electric_bass", 33, 39),
    ("strings", 40, 47),
    ("ensemble", 48, 55),
    ("brass", 56, 63),
    ("reed", 64, 71),
    ("pipe", 72, 79),
    ("synth_lead", 80, 87),
    ("synth_pad", 88, 95),
    ("synth_effects", 96, 103),
    ("ethnic", 104, 111),
    ("percussive", 112, 119),
    ("sound_effects", 120, 127),
)

DRUM_CLASS = len(MELODIC_CLASSES)  # 17
NUM_CLASSES = DRUM_CLASS + 1       # 18

CLASS_NAMES = tuple(name for name, _, _ in MELODIC_CLASSES) + ("drums",)

# Drum vocabulary: GM percussion keys 35..80 inclusive (46 entries).
DRUM_KEY_LOW = 35
DRUM_KEY_HIGH = 80
NUM_DRUMS = DRUM_KEY_HIGH - DRUM_KEY_LOW + 1

DRUM_NAMES = (
    "acoustic_bass_drum", "bass_drum_1", "side_stick", "acoustic_snare",
    "hand_clap", "electric_snare", "low_floor_tom", "closed_hi_hat",
    "high_floor_tom", "pedal_hi_hat", "low_tom", "open_hi_hat",
    "low_mid_tom", "hi_mid_tom", "crash_cymbal_1", "high_tom",
    "ride_cymbal_1", "chinese_cymbal", "ride_bell", "tambourine",
    "splash_cymbal", "cowbell", "crash_cymbal_2", "vibraslap",
    "ride_cymbal_2", "hi_bongo", "low_bongo", "mute_hi_conga",
    "open_hi_conga", "low_conga", "high_timbale", "low_timbale",
    "high_agogo", "low_agogo", "cabasa", "maracas",
    "short_whistle", "long_whistle", "short_guiro", "long_guiro",
    "claves", "hi_wood_block", "low_wood_block", "mute_cuica",
    "open_cuica", "mute_triangle",
)

assert len(DRUM_NAMES) == NUM_DRUMS


def program_to_class(program: int, is_drum: bool = False) -> int:
    """Map a GM program number (and drum-channel flag) to a class index."""
    if is_drum:
        return DRUM_CLASS
    program = max(0, min(127, program))
    for idx, (_, lo, hi) in enumerate(MELODIC_CLASSES):
        if lo <= program <= hi:
            return idx
    raise ValueError(f"program {program} not covered by class table")


def class_to_program(cls: int) -> int:
    """Representative GM program for a melodic class (drums have none)."""
    if cls == DRUM_CLASS:
        raise ValueError("drum class has no GM program; use channel 10")
    name, lo, hi = MELODIC_CLASSES[cls]
    return lo


def class_name(cls: int) -> str:
    return CLASS_NAMES[cls]


def drum_key_to_index(key: int) -> int:
    """GM percussion key -> drum vocabulary index, clamped to the table."""
    return max(0, min(NUM_DRUMS - 1, key - DRUM_KEY_LOW))


def drum_index_to_key(index: int) -> int:
    return DRUM_KEY_LOW + index


_PITCH_CLASS_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


def pitch_name(pitch: int) -> str:
    """Scientific name for a MIDI pitch (middle C = C4 at pitch 60)."""
    return f"{_PITCH_CLASS_NAMES[pitch % 12]}{pitch // 12 - 1}"
