#!/usr/bin/env python3
"""Regenerate the frontend's golden constraint files.

Each golden holds the canonical JSON (sorted keys, no whitespace) of an
EditSpec built with the engine's steering primitives for one client
paint kind.  The frontend test suite asserts byte equality between
these and the client builders, so the two rule tables cannot drift.

Run from the repository root (or anywhere):  python3 scripts/export_goldens.py
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from superloop.instruments import DRUM_CLASS  # noqa: E402
from superloop.representation import (  # noqa: E402
    INSTRUMENT,
    Loop,
    NoteEvent,
    build_vocab,
    loop_to_json,
)
from superloop.steering import (  # noqa: E402
    Constraint,
    EditSpec,
    Regenerate,
    Selector,
    _global_pins,
    action_to_spec,
    canonical_order,
    spec_to_json,
)

N_NOTES = 16


def fixture_loop() -> Loop:
    """A small deterministic loop with piano, bass, and two drum voices."""
    notes = (
        NoteEvent(instrument=0, pitch=60, onset_beat=0, onset_tick=0,
                  offset_beat=1, offset_tick=0, velocity=20, tempo=14, tag=5),
        NoteEvent(instrument=0, pitch=64, onset_beat=2, onset_tick=0,
                  offset_beat=3, offset_tick=0, velocity=18, tempo=14, tag=5),
        NoteEvent(instrument=5, pitch=40, onset_beat=0, onset_tick=0,
                  offset_beat=2, offset_tick=0, velocity=24, tempo=14, tag=5),
        NoteEvent(instrument=DRUM_CLASS, pitch=128 + 1, onset_beat=4, onset_tick=0,
                  offset_beat=4, offset_tick=12, velocity=28, tempo=14, tag=5),
        NoteEvent(instrument=DRUM_CLASS, pitch=128 + 7, onset_beat=6, onset_tick=8,
                  offset_beat=6, offset_tick=20, velocity=16, tempo=14, tag=5),
    )
    return Loop(notes=notes, tempo_bin=14, tags=frozenset({5}))


def lock_spec(current: Loop, locked: int, n_notes: int) -> EditSpec:
    """Lock rule: regenerate everything except the locked instrument."""
    ordered = canonical_order(current.notes)
    slots = [s for s, n in enumerate(ordered) if n.instrument != locked]
    slots += list(range(len(ordered), n_notes))
    selector = Selector.for_slots(slots)
    constraint = Constraint(
        selector=selector, attribute=INSTRUMENT,
        allowed=frozenset(c for c in range(18) if c != locked),
        allow_inactive=True,
    )
    constraints = (constraint,) + _global_pins(current, selector)
    return EditSpec(base=current, constraints=constraints,
                    regenerate=Regenerate(selector=selector))


def main() -> None:
    vocab = build_vocab()
    loop = fixture_loop()
    out_dir = ROOT / "frontend" / "test" / "golden"
    out_dir.mkdir(parents=True, exist_ok=True)

    cases = {
        "scale_c_major_fresh": action_to_spec(
            "constrain_scale", {"root": 0, "scale": "major"}, None, vocab, N_NOTES),
        "scale_a_minor_on_loop": action_to_spec(
            "constrain_scale", {"root": 9, "scale": "minor"}, loop, vocab, N_NOTES),
        "scale_piano_only": action_to_spec(
            "constrain_scale", {"root": 7, "scale": "mixolydian", "instrument": 0},
            loop, vocab, N_NOTES),
        "grid_triplet_drums": action_to_spec(
            "constrain_grid", {"grid": "triplet", "instrument": DRUM_CLASS},
            loop, vocab, N_NOTES),
        "grid_eighth_all": action_to_spec(
            "constrain_grid", {"grid": "eighth"}, loop, vocab, N_NOTES),
        "grid_sixteenth_fresh": action_to_spec(
            "constrain_grid", {"grid": "sixteenth"}, None, vocab, N_NOTES),
        "infill_beats_4_8": action_to_spec(
            "regenerate_region", {"start_beat": 4, "end_beat": 8}, loop, vocab, N_NOTES),
        "infill_with_pitch_band": action_to_spec(
            "regenerate_region",
            {"start_beat": 0, "end_beat": 4, "pitch_range": (48, 72)},
            loop, vocab, N_NOTES),
        "lock_drums": lock_spec(loop, DRUM_CLASS, N_NOTES),
        "density_4_8": action_to_spec(
            "set_density", {"min": 4, "max": 8}, None, vocab, N_NOTES),
    }

    def canonical(doc) -> str:
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    (out_dir / "fixture_loop.json").write_text(canonical(loop_to_json(loop)) + "\n")
    for name, spec in cases.items():
        text = canonical(spec_to_json(spec))
        assert "NaN" not in text and "Infinity" not in text
        (out_dir / f"{name}.json").write_text(text + "\n")
        print(f"wrote {name}.json ({len(text)} bytes)")
    print(f"goldens in {out_dir}")


if __name__ == "__main__":
    main()
