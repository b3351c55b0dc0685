import pytest

from superloop.instruments import DRUM_CLASS
from superloop.representation import (
    LOOP_TICKS,
    Loop,
    NoteEvent,
    TICKS_PER_BEAT,
    build_syntax_mask,
    build_vocab,
)


@pytest.fixture(scope="session")
def vocab():
    return build_vocab()


@pytest.fixture(scope="session")
def mask16(vocab):
    return build_syntax_mask(vocab, 16)


@pytest.fixture(scope="session")
def mask4(vocab):
    return build_syntax_mask(vocab, 4)


def make_random_note(rng, tempo, tag, no_overlap_with=None):
    """One uniformly random valid note.

    ``no_overlap_with`` is a set of (instrument, pitch, onset, offset)
    tuples; the note avoids time-overlapping an existing note of the
    same instrument and pitch (needed for unambiguous MIDI round trips).
    """
    for _ in range(200):
        instrument = int(rng.integers(0, 18))
        if instrument == DRUM_CLASS:
            pitch = 128 + int(rng.integers(0, 46))
        else:
            pitch = int(rng.integers(0, 128))
        onset = int(rng.integers(0, LOOP_TICKS - 1))
        offset = onset + int(rng.integers(1, LOOP_TICKS - onset + 1))
        if no_overlap_with is not None:
            clash = any(
                inst == instrument and p == pitch and onset < f and o < offset
                for inst, p, o, f in no_overlap_with
            )
            if clash:
                continue
            no_overlap_with.add((instrument, pitch, onset, offset))
        return NoteEvent(
            instrument=instrument,
            pitch=pitch,
            onset_beat=onset // TICKS_PER_BEAT,
            onset_tick=onset % TICKS_PER_BEAT,
            offset_beat=offset // TICKS_PER_BEAT,
            offset_tick=offset % TICKS_PER_BEAT,
            velocity=int(rng.integers(0, 32)),
            tempo=tempo,
            tag=tag,
        )
    raise RuntimeError("could not place a non-overlapping note")


def make_random_loop(rng, max_notes=16, min_notes=0, single_tag=True, no_overlap=False):
    """A uniformly random valid loop with up to ``max_notes`` notes."""
    n = int(rng.integers(min_notes, max_notes + 1))
    tempo = int(rng.integers(0, 32))
    tag = int(rng.integers(0, 40))
    occupied = set() if no_overlap else None
    notes = tuple(make_random_note(rng, tempo, tag, occupied) for _ in range(n))
    tags = frozenset({tag}) if (single_tag or not notes) else frozenset(n.tag for n in notes)
    return Loop(notes=notes, tempo_bin=tempo, tags=tags)
