import numpy as np
import pytest

from conftest import make_random_loop

from superloop.instruments import DRUM_CLASS
from superloop.representation import (
    INSTRUMENT, PITCH, ONSET_TICK, VELOCITY, TEMPO,
    NUM_ATTRIBUTES,
    Loop,
    NoteEvent,
    canonical_order,
    encode_loop,
    quantize_tempo,
)
from superloop.steering import (
    Constraint,
    EditSpec,
    Infeasible,
    NoteCountRange,
    Regenerate,
    Selector,
    UnknownAction,
    action_to_spec,
    compile_spec,
    scale_pitches,
    spec_from_json,
    spec_to_json,
)
from superloop.superposition import one_hot_prior, uniform_prior, validate_prior


def simple_loop(vocab, n=3, with_drums=True):
    notes = [
        NoteEvent(instrument=0, pitch=60, onset_beat=0, onset_tick=0,
                  offset_beat=1, offset_tick=0, velocity=16, tempo=7, tag=2),
        NoteEvent(instrument=4, pitch=36, onset_beat=2, onset_tick=0,
                  offset_beat=3, offset_tick=0, velocity=20, tempo=7, tag=2),
    ]
    if with_drums:
        notes.append(NoteEvent(instrument=DRUM_CLASS, pitch=128 + 7, onset_beat=4,
                               onset_tick=0, offset_beat=4, offset_tick=6,
                               velocity=24, tempo=7, tag=2))
    return Loop(notes=tuple(notes[:n]), tempo_bin=7, tags=frozenset({2}))


class TestScaleEnumeration:
    def test_c_major_has_75_pitches(self):
        # brute-force oracle over all 128 MIDI pitches
        major = {0, 2, 4, 5, 7, 9, 11}
        expected = {p for p in range(128) if p % 12 in major}
        assert len(expected) == 75
        assert set(scale_pitches(0, (0, 2, 4, 5, 7, 9, 11))) == expected


class TestCompile:
    def test_empty_spec_is_uniform_valid(self, vocab, mask4):
        prior = compile_spec(EditSpec(), vocab, 4)
        assert np.allclose(prior.probs, uniform_prior(mask4).probs)
        assert validate_prior(prior, mask4).ok

    def test_base_only_is_one_hot(self, vocab, mask4):
        loop = simple_loop(vocab)
        prior = compile_spec(EditSpec(base=loop), vocab, 4)
        expected = one_hot_prior(encode_loop(loop, vocab, 4), mask4)
        assert (prior.probs == expected.probs).all()

    def test_c_major_constraint_single_slot(self, vocab, mask4):
        constraint = Constraint(
            selector=Selector.for_slots([1]), attribute=PITCH,
            allowed=frozenset(scale_pitches(0, (0, 2, 4, 5, 7, 9, 11))),
        )
        prior = compile_spec(EditSpec(constraints=(constraint,)), vocab, 4)
        row = prior.probs[1 * NUM_ATTRIBUTES + PITCH]
        support = set(np.flatnonzero(row))
        expected = {vocab.token(PITCH, p) for p in range(128)
                    if p % 12 in {0, 2, 4, 5, 7, 9, 11}}
        assert support == expected
        assert len(support) == 75

    def test_note_count_slot_classes(self, vocab):
        prior = compile_spec(
            EditSpec(note_count=NoteCountRange(min=1, max=3)), vocab, 4)
        # slot 0: forced active -> no undefined mass anywhere
        for attr in range(NUM_ATTRIBUTES):
            assert prior.probs[attr, vocab.undefined_token(attr)] == 0.0
        # slots 1, 2: maybe active -> undefined stays in support
        for slot in (1, 2):
            for attr in range(NUM_ATTRIBUTES):
                row = slot * NUM_ATTRIBUTES + attr
                assert prior.probs[row, vocab.undefined_token(attr)] > 0.0
        # slot 3: pinned inactive -> one-hot undefined
        for attr in range(NUM_ATTRIBUTES):
            row = 3 * NUM_ATTRIBUTES + attr
            assert prior.probs[row, vocab.undefined_token(attr)] == 1.0

    def test_compile_output_validates(self, vocab, mask16):
        rng = np.random.default_rng(0)
        loop = make_random_loop(rng, max_notes=8)
        spec = EditSpec(
            base=loop,
            regenerate=Regenerate(selector=Selector.for_slots(range(len(loop.notes), 16))),
            constraints=(Constraint(
                selector=Selector.all(), attribute=ONSET_TICK,
                allowed=frozenset({0, 12}), allow_inactive=True,
            ),) if len(loop.notes) == 0 else (),
        )
        prior = compile_spec(spec, vocab, 16)
        assert validate_prior(prior, mask16).ok

    def test_adding_constraint_never_enlarges_support(self, vocab):
        base_spec = EditSpec(constraints=(Constraint(
            selector=Selector.all(), attribute=PITCH,
            allowed=frozenset(range(40, 80)), allow_inactive=True),))
        wide = compile_spec(base_spec, vocab, 4)
        narrow_spec = EditSpec(constraints=base_spec.constraints + (Constraint(
            selector=Selector.all(), attribute=PITCH,
            allowed=frozenset(range(0, 60)), allow_inactive=True),))
        narrow = compile_spec(narrow_spec, vocab, 4)
        assert ((narrow.probs > 0) <= (wide.probs > 0)).all()

    def test_kept_slots_stay_one_hot_under_edits(self, vocab):
        loop = simple_loop(vocab)
        spec = EditSpec(
            base=loop,
            regenerate=Regenerate(selector=Selector.for_slots([3])),
        )
        prior = compile_spec(spec, vocab, 4)
        tokens = encode_loop(loop, vocab, 4)
        for row in range(3 * NUM_ATTRIBUTES):
            assert prior.probs[row, tokens[row]] == 1.0

    def test_disjoint_intersection_is_infeasible(self, vocab):
        spec = EditSpec(constraints=(
            Constraint(selector=Selector.for_slots([0]), attribute=PITCH,
                       allowed=frozenset({60})),
            Constraint(selector=Selector.for_slots([0]), attribute=PITCH,
                       allowed=frozenset({61})),
        ))
        with pytest.raises(Infeasible) as info:
            compile_spec(spec, vocab, 4)
        assert info.value.row == PITCH

    def test_constraint_on_locked_drum_slot_infeasible(self, vocab):
        loop = simple_loop(vocab)  # slot 2 is the drum note
        spec = EditSpec(base=loop, constraints=(
            Constraint(selector=Selector.for_slots([2]), attribute=PITCH,
                       allowed=frozenset(range(0, 128))),
        ))
        with pytest.raises(Infeasible):
            compile_spec(spec, vocab, 4)


class TestActions:
    def test_generate_fresh_is_empty_spec(self, vocab):
        spec = action_to_spec("generate_fresh", {}, None, vocab, 4)
        assert spec == EditSpec()

    def test_unknown_action(self, vocab):
        with pytest.raises(UnknownAction):
            action_to_spec("transmogrify", {}, None, vocab, 4)

    def test_regenerate_instrument_keeps_others(self, vocab, mask4):
        loop = simple_loop(vocab)
        spec = action_to_spec("regenerate_instrument", {"instrument": "drums"},
                              loop, vocab, 4)
        prior = compile_spec(spec, vocab, 4)
        tokens = encode_loop(loop, vocab, 4)
        ordered = canonical_order(loop.notes)
        for slot, note in enumerate(ordered):
            rows = range(slot * NUM_ATTRIBUTES, (slot + 1) * NUM_ATTRIBUTES)
            if note.instrument == DRUM_CLASS:
                assert any(np.count_nonzero(prior.probs[r]) > 1 for r in rows)
            else:
                for r in rows:
                    assert prior.probs[r, tokens[r]] == 1.0
        # freed slots may only hold drums (or stay inactive)
        drum_slot = next(s for s, n in enumerate(ordered) if n.instrument == DRUM_CLASS)
        instr_row = prior.probs[drum_slot * NUM_ATTRIBUTES + INSTRUMENT]
        support = set(np.flatnonzero(instr_row))
        assert support == {vocab.token(INSTRUMENT, DRUM_CLASS),
                           vocab.undefined_token(INSTRUMENT)}

    def test_constrain_grid_triplets(self, vocab):
        loop = simple_loop(vocab)
        spec = action_to_spec(
            "constrain_grid", {"instrument": "drums", "grid": "triplet"},
            loop, vocab, 4)
        prior = compile_spec(spec, vocab, 4)
        ordered = canonical_order(loop.notes)
        drum_slot = next(s for s, n in enumerate(ordered) if n.instrument == DRUM_CLASS)
        row = prior.probs[drum_slot * NUM_ATTRIBUTES + ONSET_TICK]
        support = {vocab.value_of(int(t))[1] for t in np.flatnonzero(row)}
        assert support == {0, 8, 16}

    def test_humanize_velocity_touches_only_velocity(self, vocab):
        loop = simple_loop(vocab)
        spec = action_to_spec("humanize_velocity", {"spread": 2}, loop, vocab, 4)
        prior = compile_spec(spec, vocab, 4)
        tokens = encode_loop(loop, vocab, 4)
        ordered = canonical_order(loop.notes)
        for slot, note in enumerate(ordered):
            for attr in range(NUM_ATTRIBUTES):
                row = slot * NUM_ATTRIBUTES + attr
                if attr == VELOCITY:
                    values = {vocab.value_of(int(t))[1]
                              for t in np.flatnonzero(prior.probs[row])}
                    assert values == set(
                        range(max(0, note.velocity - 2), min(31, note.velocity + 2) + 1))
                else:
                    assert prior.probs[row, tokens[row]] == 1.0

    def test_change_tempo_pins_new_bin(self, vocab):
        loop = simple_loop(vocab)
        spec = action_to_spec("change_tempo", {"tempo_bpm": 175.0}, loop, vocab, 4)
        prior = compile_spec(spec, vocab, 4)
        new_bin = quantize_tempo(175.0)
        for slot in range(len(loop.notes)):
            row = slot * NUM_ATTRIBUTES + TEMPO
            assert prior.probs[row, vocab.token(TEMPO, new_bin)] == 1.0

    def test_set_density_note_count(self, vocab):
        spec = action_to_spec("set_density", {"min": 4, "max": 8}, None, vocab, 16)
        assert spec.note_count == NoteCountRange(min=4, max=8)

    def test_regenerate_region_constrains_onsets(self, vocab):
        loop = simple_loop(vocab)
        spec = action_to_spec("regenerate_region", {"start_beat": 0, "end_beat": 2},
                              loop, vocab, 4)
        prior = compile_spec(spec, vocab, 4)
        ordered = canonical_order(loop.notes)
        # the beat-0 note is in the region: its onset support is beats 0..1 + undefined
        slot = next(s for s, n in enumerate(ordered) if n.onset_beat == 0)
        from superloop.representation import ONSET_BEAT
        row = prior.probs[slot * NUM_ATTRIBUTES + ONSET_BEAT]
        values = {vocab.value_of(int(t))[1] for t in np.flatnonzero(row)}
        assert values == {0, 1, None}
        # the beat-4 note is outside: kept one-hot
        outside = next(s for s, n in enumerate(ordered) if n.onset_beat == 4)
        tokens = encode_loop(loop, vocab, 4)
        for attr in range(NUM_ATTRIBUTES):
            row_index = outside * NUM_ATTRIBUTES + attr
            assert prior.probs[row_index, tokens[row_index]] == 1.0


class TestSpecJson:
    def test_round_trip(self, vocab):
        loop = simple_loop(vocab)
        spec = action_to_spec("regenerate_instrument", {"instrument": "drums"},
                              loop, vocab, 4)
        doc = spec_to_json(spec)
        back = spec_from_json(doc, vocab)
        assert spec_to_json(back) == doc

    def test_all_actions_produce_serialisable_specs(self, vocab):
        loop = simple_loop(vocab)
        cases = {
            "generate_fresh": {"note_count": (2, 4), "tempo_bpm": 128.0},
            "regenerate_region": {"start_beat": 0, "end_beat": 4},
            "regenerate_instrument": {"instrument": 0},
            "constrain_scale": {"root": 0, "scale": "major"},
            "constrain_grid": {"grid": "eighth"},
            "set_density": {"min": 1, "max": 3},
            "humanize_velocity": {},
            "change_tempo": {"tempo_bpm": 90.0},
        }
        for action, args in cases.items():
            spec = action_to_spec(action, args, loop, vocab, 4)
            doc = spec_to_json(spec)
            compile_spec(spec_from_json(doc, vocab), vocab, 4)
