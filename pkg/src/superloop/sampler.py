"""Random-order autoregressive resolution of a prior into a sequence.

Unresolved positions (rows that are not one-hot) are picked uniformly
at random; each pick costs one full forward pass, then the posterior
row is filtered to the current support, tempered, and sampled.  Two
note-level shortcuts keep outputs decodable and cut forward passes:
sampling an undefined token collapses the whole note to inactive, and
sampling a defined token strips undefined from the note's other rows.

Both fall out of a small per-note constraint propagation that also
enforces what the per-position syntax mask cannot express: drum pitches
pair with the drum class, and onset/offset values must admit a playable
completion (onset < offset <= 384, beat 16 only with tick 0).  The
propagation only ever shrinks supports, so with support enforcement on,
every resolved token stays inside the initial prior's row support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .instruments import DRUM_CLASS
from .model import SuperposedLM
from .representation import (
    INSTRUMENT, PITCH, ONSET_BEAT, ONSET_TICK, OFFSET_BEAT, OFFSET_TICK,
    LOOP_TICKS,
    NUM_ATTRIBUTES,
    TICKS_PER_BEAT,
    Loop,
    VocabSpec,
    decode_tokens,
)
from .steering import EditSpec, compile_spec
from .superposition import EmptySupport, PriorMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 1.0
    seed: int = 0
    enforce_prior_support: bool = True
    max_steps: Optional[int] = None  # defaults to the sequence length


@dataclass
class SampleTrace:
    """Resolution record: order, sampled tokens, forward-pass count."""

    order: list[int] = field(default_factory=list)
    sampled: list[tuple[int, int]] = field(default_factory=list)
    forward_passes: int = 0
    fallback_rows: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "sampled": [[t, v] for t, v in self.sampled],
            "forward_passes": self.forward_passes,
            "fallback_rows": self.fallback_rows,
        }


class _NoteDomain:
    """Per-attribute support bookkeeping for one note slot."""

    def __init__(self, vocab: VocabSpec):
        self.vocab = vocab
        self.def_slices = [
            slice(vocab.offsets[a], vocab.offsets[a] + vocab.sizes[a])
            for a in range(NUM_ATTRIBUTES)
        ]
        self.undef_ids = [vocab.undefined_token(a) for a in range(NUM_ATTRIBUTES)]


def _timing_prune(defined: list[np.ndarray]) -> bool:
    """Arc-prune the four timing attributes; returns active-feasibility.

    ``defined[a]`` is the boolean allowed-value array of attribute a.
    Mutates the onset/offset arrays so every kept value participates in
    at least one playable (onset < offset <= 384) combination.
    """
    ob, ot = defined[ONSET_BEAT], defined[ONSET_TICK]
    fb, ft = defined[OFFSET_BEAT], defined[OFFSET_TICK]
    n_beats, n_ticks = len(ob), len(ot)
    beats = np.arange(n_beats)
    ticks = np.arange(n_ticks)
    grid = beats[:, None] * TICKS_PER_BEAT + ticks[None, :]

    onset_ok = ob[:, None] & ot[None, :] & (grid < LOOP_TICKS)
    offset_valid = (grid >= 1) & (grid <= LOOP_TICKS) & \
        ((beats[:, None] < 16) | (ticks[None, :] == 0))
    offset_ok = fb[:, None] & ft[None, :] & offset_valid
    if not onset_ok.any() or not offset_ok.any():
        return False
    min_onset = int(grid[onset_ok].min())
    max_offset = int(grid[offset_ok].max())
    if min_onset >= max_offset:
        return False

    keep_onset = onset_ok & (grid < max_offset)
    keep_offset = offset_ok & (grid > min_onset)
    ob &= keep_onset.any(axis=1)
    ot &= keep_onset.any(axis=0)
    fb &= keep_offset.any(axis=1)
    ft &= keep_offset.any(axis=0)
    return all(arr.any() for arr in (ob, ot, fb, ft))


def _instrument_pitch_prune(defined: list[np.ndarray], vocab: VocabSpec) -> bool:
    instr, pitch = defined[INSTRUMENT], defined[PITCH]
    n_pitched = vocab.pitched_values
    drum_instr = bool(instr[DRUM_CLASS]) if DRUM_CLASS < len(instr) else False
    melodic_instr = bool(instr[:DRUM_CLASS].any())
    drum_pitch = bool(pitch[n_pitched:].any())
    melodic_pitch = bool(pitch[:n_pitched].any())
    if not drum_instr:
        pitch[n_pitched:] = False
    if not melodic_instr:
        pitch[:n_pitched] = False
    if not drum_pitch and DRUM_CLASS < len(instr):
        instr[DRUM_CLASS] = False
    if not melodic_pitch:
        instr[:DRUM_CLASS] = False
    return bool(instr.any() and pitch.any())


def propagate_note(support: np.ndarray, slot: int, domain: _NoteDomain) -> bool:
    """Restore note-level coherence on one slot's nine support rows.

    Returns True when anything changed.  Raises :class:`EmptySupport`
    when the slot admits neither a playable active note nor an inactive
    one (only reachable with an internally inconsistent prior).
    """
    base = slot * NUM_ATTRIBUTES
    block = support[base:base + NUM_ATTRIBUTES]
    before = block.copy()

    undef_ok = np.array([block[a, domain.undef_ids[a]] for a in range(NUM_ATTRIBUTES)])
    defined = [block[a, domain.def_slices[a]].copy() for a in range(NUM_ATTRIBUTES)]

    active_possible = all(arr.any() for arr in defined)
    while active_possible:
        snapshot = [arr.copy() for arr in defined]
        active_possible = (
            _instrument_pitch_prune(defined, domain.vocab)
            and _timing_prune(defined)
            and all(arr.any() for arr in defined)
        )
        if not active_possible or all(
            np.array_equal(a, b) for a, b in zip(snapshot, defined)
        ):
            break

    inactive_possible = bool(undef_ok.all())
    if not active_possible and not inactive_possible:
        raise EmptySupport(base, f"note slot {slot} admits no active or inactive completion")

    for a in range(NUM_ATTRIBUTES):
        block[a, :] = False
        if active_possible:
            block[a, domain.def_slices[a]] = defined[a]
        if inactive_possible:
            block[a, domain.undef_ids[a]] = True
    return not np.array_equal(before, block)


def _refresh_rows(work: np.ndarray, initial: np.ndarray, support: np.ndarray,
                  rows: np.ndarray) -> None:
    """Re-project working prior rows onto their (shrunken) supports."""
    for t in rows:
        masked = initial[t] * support[t]
        total = masked.sum()
        if total > 0.0:
            work[t] = masked / total
        else:
            count = support[t].sum()
            work[t] = support[t] / count


def sample(
    model: SuperposedLM,
    prior: PriorMatrix,
    syntax_mask: np.ndarray,
    config: SamplerConfig = SamplerConfig(),
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, SampleTrace]:
    """Resolve a prior into a token sequence.

    Returns the sequence and a trace.  With ``enforce_prior_support``
    the posterior row is zeroed outside the current support before
    sampling; when that intersection underflows to nothing at 32-bit
    the row falls back to the prior restricted to its support (logged,
    never fatal).  Terminates in at most one forward pass per initially
    unresolved row.
    """
    vocab = model.config.vocab()
    n_positions = model.config.n_positions
    if prior.probs.shape != (n_positions, vocab.total):
        raise ValueError(
            f"prior shape {prior.probs.shape} does not match model "
            f"({n_positions}, {vocab.total})"
        )
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    domain = _NoteDomain(vocab)
    initial = prior.probs.astype(np.float64, copy=True)

    resolved = np.count_nonzero(initial, axis=1) == 1
    support = np.where(
        (resolved | config.enforce_prior_support)[:, None],
        initial > 0.0,
        syntax_mask,
    )
    support &= syntax_mask
    work = np.zeros_like(initial)
    _refresh_rows(work, initial, support, np.arange(n_positions))

    for slot in range(model.config.n_notes):
        if propagate_note(support, slot, domain):
            rows = np.arange(slot * NUM_ATTRIBUTES, (slot + 1) * NUM_ATTRIBUTES)
            _refresh_rows(work, initial, support, rows)
    resolved = support.sum(axis=1) == 1

    trace = SampleTrace()
    mask_tensor = torch.as_tensor(syntax_mask.copy())
    dtype = next(model.parameters()).dtype
    max_steps = config.max_steps if config.max_steps is not None else n_positions

    steps = 0
    while not resolved.all():
        if steps >= max_steps:
            raise RuntimeError(f"sampler exceeded {max_steps} steps")  # pragma: no cover
        steps += 1
        pending = np.flatnonzero(~resolved)
        t = int(pending[rng.integers(0, len(pending))])

        with torch.no_grad():
            out = model.forward(torch.as_tensor(work, dtype=dtype), mask_tensor)
        trace.forward_passes += 1
        q = out.posterior.cpu().numpy()[t].astype(np.float64)

        weights = q * support[t]
        if weights.sum() <= 0.0:
            logger.warning("posterior support empty at row %d; falling back to prior", t)
            trace.fallback_rows.append(t)
            weights = work[t].copy()
        if config.temperature == 0.0:
            token = int(np.argmax(weights))
        else:
            weights = (weights / weights.max()) ** (1.0 / config.temperature)
            weights /= weights.sum()
            token = int(rng.choice(len(weights), p=weights))

        support[t] = False
        support[t, token] = True
        slot = t // NUM_ATTRIBUTES
        propagate_note(support, slot, domain)
        rows = np.arange(slot * NUM_ATTRIBUTES, (slot + 1) * NUM_ATTRIBUTES)
        _refresh_rows(work, initial, support, rows)
        resolved[rows] = support[rows].sum(axis=1) == 1

        trace.order.append(t)
        trace.sampled.append((t, token))

    tokens = support.argmax(axis=1).astype(np.int64)
    return tokens, trace


def batch_generate(
    model: SuperposedLM,
    spec: EditSpec,
    count: int,
    config: SamplerConfig = SamplerConfig(),
) -> list[Loop]:
    """Compile a spec once and draw ``count`` independent seeded samples."""
    vocab = model.config.vocab()
    from .representation import build_syntax_mask
    syntax_mask = build_syntax_mask(vocab, model.config.n_notes)
    prior = compile_spec(spec, vocab, model.config.n_notes)
    loops = []
    for child_seed in np.random.SeedSequence(config.seed).spawn(count):
        child_rng = np.random.default_rng(child_seed)
        tokens, _ = sample(model, prior, syntax_mask, config, rng=child_rng)
        loops.append(decode_tokens(tokens, vocab))
    return loops
