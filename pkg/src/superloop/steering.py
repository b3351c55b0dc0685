"""Compile declarative edit specifications into prior matrices.

An :class:`EditSpec` bundles an optional base loop, note-slot
regeneration directives, hard attribute constraints and a note-count
range.  Compilation produces a prior whose rows are one-hot for kept
material and uniform over the allowed support everywhere else, so the
sampler only ever sees hard (support-restricting) constraints.

A library of named editing actions turns (action, args, current loop)
into an EditSpec by fixed rules; these are the verbs exposed over the
HTTP API and the browser client.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .instruments import DRUM_CLASS
from .representation import (
    ATTRIBUTE_NAMES,
    INSTRUMENT, PITCH, ONSET_BEAT, ONSET_TICK, VELOCITY, TEMPO, TAG,
    NUM_ATTRIBUTES,
    TICKS_PER_BEAT,
    Loop,
    NoteEvent,
    VocabSpec,
    canonical_order,
    encode_loop,
    quantize_tempo,
)
from .superposition import PriorMatrix, _finalize


class Infeasible(ValueError):
    """A constraint emptied a prior row."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(message)


class UnknownAction(ValueError):
    pass


ATTRIBUTE_INDEX = {name: idx for idx, name in enumerate(ATTRIBUTE_NAMES)}

SCALES = {
    "major": (0, 2, 4, 5, 7, 9, 11),
    "minor": (0, 2, 3, 5, 7, 8, 10),
    "harmonic_minor": (0, 2, 3, 5, 7, 8, 11),
    "dorian": (0, 2, 3, 5, 7, 9, 10),
    "mixolydian": (0, 2, 4, 5, 7, 9, 10),
    "pentatonic_major": (0, 2, 4, 7, 9),
    "pentatonic_minor": (0, 3, 5, 7, 10),
    "blues": (0, 3, 5, 6, 7, 10),
    "chromatic": tuple(range(12)),
}

# Onset-tick grids at 24 ticks per beat.
GRIDS = {
    "quarter": (0,),
    "eighth": (0, 12),
    "triplet": (0, 8, 16),
    "sixteenth": (0, 6, 12, 18),
    "sixteenth_triplet": (0, 4, 8, 12, 16, 20),
}


def scale_pitches(root: int, intervals: Sequence[int], n_pitches: int = 128) -> tuple[int, ...]:
    """All melodic pitches whose pitch class lies in the scale."""
    classes = {(root + i) % 12 for i in intervals}
    return tuple(p for p in range(n_pitches) if p % 12 in classes)


@dataclass(frozen=True)
class Selector:
    """Selects note slots, either directly or via base-loop properties.

    ``kind``: "all" | "slots" | "instrument" | "time_window".
    Instrument and time-window selectors resolve against the base loop's
    canonical slot assignment (and to nothing without a base);
    ``pitch_in`` further narrows instrument matches, e.g. to single
    drum voices.
    """

    kind: str = "all"
    slots: tuple[int, ...] = ()
    instrument: Optional[int] = None
    pitch_in: Optional[frozenset[int]] = None
    window: Optional[tuple[int, int]] = None  # [start_tick, end_tick)

    @staticmethod
    def all() -> "Selector":
        return Selector(kind="all")

    @staticmethod
    def for_slots(slots: Sequence[int]) -> "Selector":
        return Selector(kind="slots", slots=tuple(sorted(set(int(s) for s in slots))))

    @staticmethod
    def for_instrument(instrument: int, pitch_in: Optional[Sequence[int]] = None) -> "Selector":
        return Selector(kind="instrument", instrument=int(instrument),
                        pitch_in=frozenset(pitch_in) if pitch_in is not None else None)

    @staticmethod
    def for_window(start_tick: int, end_tick: int) -> "Selector":
        return Selector(kind="time_window", window=(int(start_tick), int(end_tick)))

    def resolve(self, base_notes: tuple[NoteEvent, ...], n_notes: int) -> list[int]:
        """Canonical slot indices this selector matches."""
        if self.kind == "all":
            return list(range(n_notes))
        if self.kind == "slots":
            return [s for s in self.slots if 0 <= s < n_notes]
        if self.kind == "instrument":
            out = []
            for slot, note in enumerate(base_notes):
                if note.instrument != self.instrument:
                    continue
                if self.pitch_in is not None and note.pitch not in self.pitch_in:
                    continue
                out.append(slot)
            return out
        if self.kind == "time_window":
            start, end = self.window
            return [slot for slot, note in enumerate(base_notes)
                    if start <= note.onset_ticks < end]
        raise ValueError(f"unknown selector kind {self.kind!r}")


@dataclass(frozen=True)
class Constraint:
    """Hard support restriction on one attribute of selected slots.

    ``allowed`` holds attribute-local values and must be a nonempty
    subset of the attribute's sub-vocabulary.  ``allow_inactive`` keeps
    the attribute's undefined token in the support so constrained notes
    may still come out inactive.
    """

    selector: Selector
    attribute: int
    allowed: frozenset[int]
    allow_inactive: bool = False

    def validate(self, vocab: VocabSpec) -> None:
        if not self.allowed:
            raise ValueError("constraint with empty allowed set")
        size = vocab.sizes[self.attribute]
        bad = [v for v in self.allowed if not 0 <= v < size]
        if bad:
            raise ValueError(
                f"{ATTRIBUTE_NAMES[self.attribute]} values {sorted(bad)} outside [0, {size})"
            )


@dataclass(frozen=True)
class Regenerate:
    """Reopen slots (or a subset of their attributes) for resampling."""

    selector: Selector
    attributes: Optional[frozenset[int]] = None  # None = all nine

    def attr_set(self) -> frozenset[int]:
        return self.attributes if self.attributes is not None else frozenset(range(NUM_ATTRIBUTES))


@dataclass(frozen=True)
class NoteCountRange:
    """Active-note count range realised over a slot range.

    Within the managed slots (all slots when ``slots`` is None), the
    first ``min`` are forced active, the next ``max - min`` may resolve
    either way, and the rest are pinned inactive.
    """

    min: int
    max: int
    slots: Optional[tuple[int, ...]] = None

    def validate(self, n_slots: int) -> None:
        count = len(self.slots) if self.slots is not None else n_slots
        if not 0 <= self.min <= self.max <= count:
            raise ValueError(
                f"note count range ({self.min}, {self.max}) incompatible with {count} slots"
            )


@dataclass(frozen=True)
class EditSpec:
    base: Optional[Loop] = None
    constraints: tuple[Constraint, ...] = ()
    note_count: Optional[NoteCountRange] = None
    regenerate: Optional[Regenerate] = None


def compile_spec(spec: EditSpec, vocab: VocabSpec, n_notes: int) -> PriorMatrix:
    """Lower an EditSpec to a prior matrix.

    Kept base notes yield one-hot rows, regenerated/unknown rows get
    uniform support over whatever the constraints allow, and the
    note-count range pins its guaranteed-active / maybe-active /
    inactive slot classes.  Raises :class:`Infeasible` (with the row
    index) when constraint intersection empties a row.
    """
    from .representation import build_syntax_mask

    n_positions = n_notes * NUM_ATTRIBUTES
    mask = build_syntax_mask(vocab, n_notes)
    support = mask.copy()

    base_notes: tuple[NoteEvent, ...] = ()
    if spec.base is not None:
        tokens = encode_loop(spec.base, vocab, n_notes)
        base_notes = canonical_order(spec.base.notes)
        support[:] = False
        support[np.arange(n_positions), tokens] = True

    if spec.regenerate is not None:
        regen_attrs = spec.regenerate.attr_set()
        partial = len(regen_attrs) < NUM_ATTRIBUTES
        for slot in spec.regenerate.selector.resolve(base_notes, n_notes):
            base_row = slot * NUM_ATTRIBUTES
            for attr in regen_attrs:
                support[base_row + attr] = mask[base_row + attr]
                if partial and slot < len(base_notes):
                    # Attribute reopened on an otherwise-defined note:
                    # an undefined value would create a mixed note.
                    support[base_row + attr, vocab.undefined_token(attr)] = False

    if spec.note_count is not None:
        spec.note_count.validate(n_notes)
        managed = list(spec.note_count.slots) if spec.note_count.slots is not None \
            else list(range(n_notes))
        for position, slot in enumerate(managed):
            base_row = slot * NUM_ATTRIBUTES
            if position < spec.note_count.min:
                for attr in range(NUM_ATTRIBUTES):
                    support[base_row + attr, vocab.undefined_token(attr)] = False
            elif position >= spec.note_count.max:
                for attr in range(NUM_ATTRIBUTES):
                    support[base_row + attr] = False
                    support[base_row + attr, vocab.undefined_token(attr)] = True

    for constraint in spec.constraints:
        constraint.validate(vocab)
        allowed = np.zeros(vocab.total, dtype=bool)
        for value in constraint.allowed:
            allowed[vocab.token(constraint.attribute, value)] = True
        if constraint.allow_inactive:
            allowed[vocab.undefined_token(constraint.attribute)] = True
        for slot in constraint.selector.resolve(base_notes, n_notes):
            row = slot * NUM_ATTRIBUTES + constraint.attribute
            new = support[row] & allowed
            if not new.any():
                raise Infeasible(
                    row,
                    f"constraint on {ATTRIBUTE_NAMES[constraint.attribute]} "
                    f"emptied row {row} (slot {slot})",
                )
            support[row] = new

    empty = np.flatnonzero(~support.any(axis=1))
    if empty.size:
        raise Infeasible(int(empty[0]), f"row {int(empty[0])} has empty support")
    return _finalize(support.astype(np.float64), provenance="compile")


# ---------------------------------------------------------------------------
# Named editing actions.  Each rule is deterministic in (args, current loop).
# ---------------------------------------------------------------------------

ACTION_NAMES = (
    "generate_fresh",
    "regenerate_region",
    "regenerate_instrument",
    "constrain_scale",
    "constrain_grid",
    "set_density",
    "humanize_velocity",
    "change_tempo",
)


def _require_current(action: str, current: Optional[Loop]) -> Loop:
    if current is None:
        raise ValueError(f"action {action} requires a current loop")
    return current


def _free_slots(current: Loop, n_notes: int) -> list[int]:
    """Padding slots beyond the base loop's notes."""
    return list(range(len(current.notes), n_notes))


def _global_pins(current: Loop, selector: Selector) -> tuple[Constraint, Constraint]:
    """Keep regenerated notes on the loop's global tempo and tags.

    Without these, freed slots could sample stray tempo/tag tokens and
    flip the decode-time majority, rewriting kept notes.
    """
    return (
        Constraint(selector=selector, attribute=TEMPO,
                   allowed=frozenset({current.tempo_bin}), allow_inactive=True),
        Constraint(selector=selector, attribute=TAG,
                   allowed=frozenset(current.tags), allow_inactive=True),
    )


def action_to_spec(
    action: str,
    args: dict,
    current: Optional[Loop],
    vocab: VocabSpec,
    n_notes: int,
) -> EditSpec:
    """Expand a named action into an EditSpec by the built-in rule table.

    See the README action table for the exact semantics of each action
    and its arguments.  Raises :class:`UnknownAction` for names outside
    the table.
    """
    if action not in ACTION_NAMES:
        raise UnknownAction(f"unknown action {action!r}")
    args = dict(args or {})
    builder = _ACTION_BUILDERS[action]
    return builder(args, current, vocab, n_notes)


def _build_generate_fresh(args, current, vocab, n_notes) -> EditSpec:
    constraints = []
    note_count = None
    if "note_count" in args and args["note_count"] is not None:
        lo, hi = args["note_count"]
        note_count = NoteCountRange(min=int(lo), max=int(hi))
    if args.get("tempo_bpm") is not None:
        constraints.append(Constraint(
            selector=Selector.all(), attribute=TEMPO,
            allowed=frozenset({quantize_tempo(args["tempo_bpm"])}),
            allow_inactive=True,
        ))
    if args.get("tags"):
        constraints.append(Constraint(
            selector=Selector.all(), attribute=TAG,
            allowed=frozenset(int(t) for t in args["tags"]),
            allow_inactive=True,
        ))
    return EditSpec(constraints=tuple(constraints), note_count=note_count)


def _build_regenerate_region(args, current, vocab, n_notes) -> EditSpec:
    current = _require_current("regenerate_region", current)
    start_beat = int(args["start_beat"])
    end_beat = int(args["end_beat"])
    if not 0 <= start_beat < end_beat <= 16:
        raise ValueError(f"beat window [{start_beat}, {end_beat}) out of range")
    ordered = canonical_order(current.notes)
    window = Selector.for_window(start_beat * TICKS_PER_BEAT, end_beat * TICKS_PER_BEAT)
    slots = window.resolve(ordered, n_notes) + _free_slots(current, n_notes)
    selector = Selector.for_slots(slots)
    constraints = [Constraint(
        selector=selector, attribute=ONSET_BEAT,
        allowed=frozenset(range(start_beat, end_beat)),
        allow_inactive=True,
    )]
    pitch_range = args.get("pitch_range")
    if pitch_range is not None:
        lo, hi = int(pitch_range[0]), int(pitch_range[1])
        allowed = frozenset(range(lo, hi + 1))
        constraints.append(Constraint(
            selector=selector, attribute=PITCH, allowed=allowed, allow_inactive=True,
        ))
    constraints.extend(_global_pins(current, selector))
    return EditSpec(base=current, constraints=tuple(constraints),
                    regenerate=Regenerate(selector=selector))


def _build_regenerate_instrument(args, current, vocab, n_notes) -> EditSpec:
    current = _require_current("regenerate_instrument", current)
    instrument = _instrument_arg(args)
    ordered = canonical_order(current.notes)
    matches = Selector.for_instrument(instrument).resolve(ordered, n_notes)
    slots = matches + _free_slots(current, n_notes)
    selector = Selector.for_slots(slots)
    constraint = Constraint(
        selector=selector, attribute=INSTRUMENT,
        allowed=frozenset({instrument}), allow_inactive=True,
    )
    constraints = (constraint,) + _global_pins(current, selector)
    return EditSpec(base=current, constraints=constraints,
                    regenerate=Regenerate(selector=selector))


def _build_constrain_scale(args, current, vocab, n_notes) -> EditSpec:
    root = int(args.get("root", 0)) % 12
    name = args.get("scale", "major")
    intervals = SCALES.get(name)
    if intervals is None:
        raise ValueError(f"unknown scale {name!r} (have {sorted(SCALES)})")
    pitches = frozenset(scale_pitches(root, intervals, vocab.pitched_values))
    if current is None:
        constraint = Constraint(
            selector=Selector.all(), attribute=PITCH,
            allowed=pitches, allow_inactive=True,
        )
        return EditSpec(constraints=(constraint,))
    ordered = canonical_order(current.notes)
    if args.get("instrument") is not None:
        slots = Selector.for_instrument(_instrument_arg(args)).resolve(ordered, n_notes)
    else:
        # default target: every melodic (non-drum) note
        slots = [s for s, n in enumerate(ordered) if n.instrument != DRUM_CLASS]
    return _repitch_spec(current, Selector.for_slots(slots), pitches)


def _repitch_spec(current: Loop, selector: Selector, pitches: frozenset[int]) -> EditSpec:
    constraint = Constraint(selector=selector, attribute=PITCH, allowed=pitches)
    return EditSpec(base=current, constraints=(constraint,),
                    regenerate=Regenerate(selector=selector, attributes=frozenset({PITCH})))


def _build_constrain_grid(args, current, vocab, n_notes) -> EditSpec:
    grid = args.get("grid", "sixteenth")
    if isinstance(grid, str):
        ticks = GRIDS.get(grid)
        if ticks is None:
            raise ValueError(f"unknown grid {grid!r} (have {sorted(GRIDS)})")
    else:
        ticks = tuple(int(t) for t in grid)
    allowed = frozenset(ticks)
    if current is None:
        constraint = Constraint(
            selector=Selector.all(), attribute=ONSET_TICK,
            allowed=allowed, allow_inactive=True,
        )
        return EditSpec(constraints=(constraint,))
    ordered = canonical_order(current.notes)
    pitch_in = args.get("pitch_in")
    match = Selector.for_instrument(_instrument_arg(args), pitch_in=pitch_in) \
        if args.get("instrument") is not None else Selector.all()
    slots = match.resolve(ordered, n_notes)
    slots = [s for s in slots if s < len(ordered)]
    selector = Selector.for_slots(slots)
    constraint = Constraint(selector=selector, attribute=ONSET_TICK, allowed=allowed)
    return EditSpec(base=current, constraints=(constraint,),
                    regenerate=Regenerate(selector=selector, attributes=frozenset({ONSET_TICK})))


def _build_set_density(args, current, vocab, n_notes) -> EditSpec:
    lo = int(args["min"])
    hi = int(args["max"])
    constraints = []
    if current is not None:
        constraints.append(Constraint(
            selector=Selector.all(), attribute=TEMPO,
            allowed=frozenset({current.tempo_bin}), allow_inactive=True,
        ))
        constraints.append(Constraint(
            selector=Selector.all(), attribute=TAG,
            allowed=frozenset(current.tags), allow_inactive=True,
        ))
    return EditSpec(constraints=tuple(constraints),
                    note_count=NoteCountRange(min=lo, max=hi))


def _build_humanize_velocity(args, current, vocab, n_notes) -> EditSpec:
    current = _require_current("humanize_velocity", current)
    spread = int(args.get("spread", 2))
    ordered = canonical_order(current.notes)
    n_bins = vocab.sizes[VELOCITY]
    constraints = []
    slots = []
    for slot, note in enumerate(ordered):
        lo = max(0, note.velocity - spread)
        hi = min(n_bins - 1, note.velocity + spread)
        constraints.append(Constraint(
            selector=Selector.for_slots([slot]), attribute=VELOCITY,
            allowed=frozenset(range(lo, hi + 1)),
        ))
        slots.append(slot)
    return EditSpec(base=current, constraints=tuple(constraints),
                    regenerate=Regenerate(selector=Selector.for_slots(slots),
                                          attributes=frozenset({VELOCITY})))


def _build_change_tempo(args, current, vocab, n_notes) -> EditSpec:
    current = _require_current("change_tempo", current)
    bin_index = quantize_tempo(float(args["tempo_bpm"]))
    slots = list(range(len(current.notes)))
    constraint = Constraint(
        selector=Selector.for_slots(slots), attribute=TEMPO,
        allowed=frozenset({bin_index}),
    )
    return EditSpec(base=current, constraints=(constraint,),
                    regenerate=Regenerate(selector=Selector.for_slots(slots),
                                          attributes=frozenset({TEMPO})))


def _instrument_arg(args: dict) -> int:
    from .instruments import CLASS_NAMES
    value = args["instrument"]
    if isinstance(value, str):
        try:
            return CLASS_NAMES.index(value)
        except ValueError:
            raise ValueError(f"unknown instrument class {value!r}") from None
    return int(value)


_ACTION_BUILDERS = {
    "generate_fresh": _build_generate_fresh,
    "regenerate_region": _build_regenerate_region,
    "regenerate_instrument": _build_regenerate_instrument,
    "constrain_scale": _build_constrain_scale,
    "constrain_grid": _build_constrain_grid,
    "set_density": _build_set_density,
    "humanize_velocity": _build_humanize_velocity,
    "change_tempo": _build_change_tempo,
}


# ---------------------------------------------------------------------------
# EditSpec JSON schema (the service request body):
#   {"base": LoopJSON | null,
#    "constraints": [{"selector": SelectorJSON, "attribute": str,
#                     "allowed": [int, ...], "allow_inactive": bool}],
#    "note_count": {"min": int, "max": int, "slots": [int, ...] | null} | null,
#    "regenerate": {"selector": SelectorJSON, "attributes": [str, ...] | null} | null}
# SelectorJSON:
#   {"kind": "all"} | {"kind": "slots", "slots": [int, ...]}
#   | {"kind": "instrument", "instrument": int, "pitch_in": [int, ...] | null}
#   | {"kind": "time_window", "start_tick": int, "end_tick": int}
# ---------------------------------------------------------------------------

def selector_to_json(sel: Selector) -> dict:
    if sel.kind == "all":
        return {"kind": "all"}
    if sel.kind == "slots":
        return {"kind": "slots", "slots": list(sel.slots)}
    if sel.kind == "instrument":
        return {
            "kind": "instrument",
            "instrument": sel.instrument,
            "pitch_in": sorted(sel.pitch_in) if sel.pitch_in is not None else None,
        }
    if sel.kind == "time_window":
        return {"kind": "time_window", "start_tick": sel.window[0], "end_tick": sel.window[1]}
    raise ValueError(f"unknown selector kind {sel.kind!r}")


def selector_from_json(doc: dict) -> Selector:
    kind = doc.get("kind", "all")
    if kind == "all":
        return Selector.all()
    if kind == "slots":
        return Selector.for_slots(doc["slots"])
    if kind == "instrument":
        return Selector.for_instrument(doc["instrument"], doc.get("pitch_in"))
    if kind == "time_window":
        return Selector.for_window(doc["start_tick"], doc["end_tick"])
    raise ValueError(f"unknown selector kind {kind!r}")


def constraint_to_json(c: Constraint) -> dict:
    return {
        "selector": selector_to_json(c.selector),
        "attribute": ATTRIBUTE_NAMES[c.attribute],
        "allowed": sorted(c.allowed),
        "allow_inactive": c.allow_inactive,
    }


def constraint_from_json(doc: dict) -> Constraint:
    return Constraint(
        selector=selector_from_json(doc["selector"]),
        attribute=ATTRIBUTE_INDEX[doc["attribute"]],
        allowed=frozenset(int(v) for v in doc["allowed"]),
        allow_inactive=bool(doc.get("allow_inactive", False)),
    )


def spec_to_json(spec: EditSpec) -> dict:
    from .representation import loop_to_json
    return {
        "base": loop_to_json(spec.base) if spec.base is not None else None,
        "constraints": [constraint_to_json(c) for c in spec.constraints],
        "note_count": (
            {"min": spec.note_count.min, "max": spec.note_count.max,
             "slots": list(spec.note_count.slots) if spec.note_count.slots is not None else None}
            if spec.note_count is not None else None
        ),
        "regenerate": (
            {"selector": selector_to_json(spec.regenerate.selector),
             "attributes": (sorted(ATTRIBUTE_NAMES[a] for a in spec.regenerate.attributes)
                            if spec.regenerate.attributes is not None else None)}
            if spec.regenerate is not None else None
        ),
    }


def spec_from_json(doc: dict, vocab: VocabSpec) -> EditSpec:
    from .representation import loop_from_json
    base = loop_from_json(doc["base"], vocab) if doc.get("base") else None
    constraints = tuple(constraint_from_json(c) for c in doc.get("constraints", []))
    note_count = None
    if doc.get("note_count"):
        nc = doc["note_count"]
        note_count = NoteCountRange(
            min=int(nc["min"]), max=int(nc["max"]),
            slots=tuple(nc["slots"]) if nc.get("slots") is not None else None,
        )
    regenerate = None
    if doc.get("regenerate"):
        rg = doc["regenerate"]
        attrs = rg.get("attributes")
        regenerate = Regenerate(
            selector=selector_from_json(rg["selector"]),
            attributes=frozenset(ATTRIBUTE_INDEX[a] for a in attrs) if attrs is not None else None,
        )
    return EditSpec(base=base, constraints=constraints,
                    note_count=note_count, regenerate=regenerate)
