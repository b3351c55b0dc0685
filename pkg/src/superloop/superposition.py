"""Prior matrices over token sequences and the Random-add scheme.

A prior is a row-stochastic T x |V| matrix: row t is a categorical
belief over the token at position t.  A valid training prior must stay
inside the syntax mask and give the ground-truth token positive
probability, so that the truth is never ruled out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .representation import VocabSpec, SyntaxViolation, sequence_passes_mask

NORMALIZATION_ATOL = 1e-6


class ShapeMismatch(ValueError):
    pass


class EmptySupport(ValueError):
    """An operation zeroed out an entire prior row."""

    def __init__(self, row: int, message: Optional[str] = None):
        self.row = row
        super().__init__(message or f"row {row} has empty support")


@dataclass(frozen=True)
class PriorMatrix:
    """Dense prior over a token sequence.

    ``probs`` is (T, |V|) float64; rows are expected to be normalised.
    ``provenance`` records how the prior was built (scheme name, seed).
    """

    probs: np.ndarray
    provenance: Optional[str] = None

    @property
    def n_positions(self) -> int:
        return self.probs.shape[0]

    def row_support(self, t: int) -> np.ndarray:
        return self.probs[t] > 0.0

    def is_resolved(self, t: int) -> bool:
        """A row is resolved iff it is exactly one-hot."""
        row = self.probs[t]
        return np.count_nonzero(row) == 1 and np.isclose(row.sum(), 1.0)

    def argmax_sequence(self) -> np.ndarray:
        return self.probs.argmax(axis=1).astype(np.int64)


def _finalize(weights: np.ndarray, provenance: Optional[str]) -> PriorMatrix:
    """Row-normalise and freeze a weight matrix into a PriorMatrix."""
    sums = weights.sum(axis=1, keepdims=True)
    empty = np.flatnonzero(sums[:, 0] <= 0.0)
    if empty.size:
        raise EmptySupport(int(empty[0]))
    probs = weights / sums
    probs.flags.writeable = False
    return PriorMatrix(probs=probs, provenance=provenance)


@dataclass(frozen=True)
class SuperpositionSample:
    """A training prior together with the draw that produced it."""

    prior: PriorMatrix
    source_sequence: np.ndarray
    p_pos: float
    p_vocab: np.ndarray


@dataclass
class PriorReport:
    """Per-row findings from :func:`validate_prior`."""

    row_sum_errors: list[tuple[int, float]] = field(default_factory=list)
    negative_rows: list[int] = field(default_factory=list)
    syntax_violation_rows: list[int] = field(default_factory=list)
    truth_zero_rows: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.row_sum_errors or self.negative_rows
                    or self.syntax_violation_rows or self.truth_zero_rows)

    def summary(self) -> str:
        if self.ok:
            return "valid prior"
        parts = []
        if self.row_sum_errors:
            parts.append(f"{len(self.row_sum_errors)} rows with bad sums "
                         f"(first: row {self.row_sum_errors[0][0]})")
        if self.negative_rows:
            parts.append(f"negative entries in rows {self.negative_rows[:5]}")
        if self.syntax_violation_rows:
            parts.append(f"mass outside syntax in rows {self.syntax_violation_rows[:5]}")
        if self.truth_zero_rows:
            parts.append(f"truth token has zero mass in rows {self.truth_zero_rows[:5]}")
        return "; ".join(parts)


def validate_prior(
    prior: PriorMatrix,
    mask: np.ndarray,
    x: Optional[Sequence[int]] = None,
    atol: float = NORMALIZATION_ATOL,
) -> PriorReport:
    """Check the validity contract of a prior.

    Reports rows whose sum strays from 1 beyond ``atol``, rows with
    negative entries, rows putting mass outside the syntax mask, and,
    when the ground-truth sequence ``x`` is supplied, rows assigning its
    token zero probability.
    """
    probs = prior.probs
    if probs.shape != mask.shape:
        raise ShapeMismatch(f"prior {probs.shape} vs mask {mask.shape}")
    report = PriorReport()
    sums = probs.sum(axis=1)
    for t in np.flatnonzero(np.abs(sums - 1.0) > atol):
        report.row_sum_errors.append((int(t), float(sums[t])))
    report.negative_rows = [int(t) for t in np.flatnonzero((probs < 0.0).any(axis=1))]
    outside = probs * ~mask
    report.syntax_violation_rows = [int(t) for t in np.flatnonzero((outside > 0.0).any(axis=1))]
    if x is not None:
        x = np.asarray(x, dtype=np.int64)
        if x.shape[0] != probs.shape[0]:
            raise ShapeMismatch(f"sequence length {x.shape[0]} vs prior rows {probs.shape[0]}")
        at_truth = probs[np.arange(len(x)), x]
        report.truth_zero_rows = [int(t) for t in np.flatnonzero(at_truth <= 0.0)]
    return report


def one_hot_prior(x: Sequence[int], mask: np.ndarray) -> PriorMatrix:
    """Fully determined prior: row t is the indicator of x_t."""
    x = np.asarray(x, dtype=np.int64)
    if not sequence_passes_mask(x, mask):
        raise SyntaxViolation("sequence violates the syntax mask")
    probs = np.zeros(mask.shape, dtype=np.float64)
    probs[np.arange(len(x)), x] = 1.0
    probs.flags.writeable = False
    return PriorMatrix(probs=probs, provenance="one_hot")


def uniform_prior(mask: np.ndarray) -> PriorMatrix:
    """Completely unconstrained prior: uniform over syntax-valid tokens."""
    return _finalize(mask.astype(np.float64), provenance="uniform_valid")


def random_add(
    x: Sequence[int],
    mask: np.ndarray,
    rng: np.random.Generator,
    p_pos: Optional[float] = None,
    p_vocab: Optional[float] = None,
) -> SuperpositionSample:
    """Random-add superposition scheme.

    Draws a scalar position-masking probability p_pos ~ U(0,1) and a
    per-position Bernoulli position mask, then per-position vocabulary
    probabilities and a (T, |V|) Bernoulli vocabulary mask.  The
    combined mask is OR-ed onto the one-hot truth, restricted to the
    syntax mask and row-normalised, so the result always contains the
    truth in its support.

    ``p_pos`` / ``p_vocab`` override the uniform draws (used by tests
    and steering experiments); ``p_vocab`` is broadcast over positions.
    """
    x = np.asarray(x, dtype=np.int64)
    n_positions, vocab_size = mask.shape
    if x.shape[0] != n_positions:
        raise ShapeMismatch(f"sequence length {x.shape[0]} vs mask rows {n_positions}")
    if not sequence_passes_mask(x, mask):
        raise SyntaxViolation("sequence violates the syntax mask")

    drawn_p_pos = float(rng.random()) if p_pos is None else float(p_pos)
    m_pos = rng.random(n_positions) < drawn_p_pos
    if p_vocab is None:
        drawn_p_vocab = rng.random(n_positions)
    else:
        drawn_p_vocab = np.full(n_positions, float(p_vocab))
    m_vocab = rng.random((n_positions, vocab_size)) < drawn_p_vocab[:, None]

    combined = m_pos[:, None] & m_vocab
    one_hot = np.zeros((n_positions, vocab_size), dtype=bool)
    one_hot[np.arange(n_positions), x] = True
    added = one_hot | combined
    weights = (added & mask).astype(np.float64)
    prior = _finalize(weights, provenance="random_add")
    return SuperpositionSample(
        prior=prior, source_sequence=x, p_pos=drawn_p_pos, p_vocab=drawn_p_vocab,
    )


def mix_priors(
    a: PriorMatrix,
    b: PriorMatrix,
    op: str = "intersect",
    rows: Optional[Sequence[int]] = None,
) -> PriorMatrix:
    """Combine two priors.

    ``intersect`` multiplies rows elementwise and renormalises (raising
    :class:`EmptySupport` with the first offending row index when the
    supports are disjoint somewhere); ``overwrite-rows`` replaces the
    listed rows of ``a`` with the corresponding rows of ``b``.
    """
    if a.probs.shape != b.probs.shape:
        raise ShapeMismatch(f"{a.probs.shape} vs {b.probs.shape}")
    if op == "intersect":
        return _finalize(a.probs * b.probs, provenance="intersect")
    if op == "overwrite-rows":
        if rows is None:
            raise ValueError("overwrite-rows requires a row set")
        out = a.probs.copy()
        rows = np.asarray(list(rows), dtype=np.int64)
        out[rows] = b.probs[rows]
        out.flags.writeable = False
        return PriorMatrix(probs=out, provenance="overwrite")
    raise ValueError(f"unknown mix op {op!r}")


# ---------------------------------------------------------------------------
# Sparse prior JSON, the service-facing construction path:
#   {"rows": [{"t": int, "support": [[token_id, weight], ...]}, ...],
#    "default": "uniform-valid" | "truth"}
# Rows not listed fall back to the default: uniform over syntax-valid
# tokens, or the one-hot of a supplied truth sequence.
# ---------------------------------------------------------------------------

def prior_from_sparse(
    doc: dict,
    mask: np.ndarray,
    truth: Optional[Sequence[int]] = None,
) -> PriorMatrix:
    """Build a dense prior from the sparse JSON form."""
    n_positions, _ = mask.shape
    default = doc.get("default", "uniform-valid")
    if default == "uniform-valid":
        weights = mask.astype(np.float64)
    elif default == "truth":
        if truth is None:
            raise ValueError('sparse prior default "truth" requires a base sequence')
        weights = one_hot_prior(truth, mask).probs.copy()
    else:
        raise ValueError(f"unknown sparse prior default {default!r}")
    for row in doc.get("rows", []):
        t = int(row["t"])
        if not 0 <= t < n_positions:
            raise ShapeMismatch(f"row index {t} outside sequence of length {n_positions}")
        weights[t] = 0.0
        for token_id, weight in row["support"]:
            token_id = int(token_id)
            if not mask[t, token_id]:
                raise SyntaxViolation(f"token {token_id} invalid at position {t}")
            if weight < 0:
                raise ValueError(f"negative weight at row {t}")
            weights[t, token_id] = float(weight)
        if weights[t].sum() <= 0.0:
            raise EmptySupport(t)
    return _finalize(weights, provenance="sparse")


def prior_to_sparse(prior: PriorMatrix, vocab: VocabSpec) -> dict:
    """Serialise a prior to the sparse JSON form (all rows explicit)."""
    rows = []
    for t in range(prior.n_positions):
        support = np.flatnonzero(prior.probs[t])
        rows.append({
            "t": t,
            "support": [[int(v), float(prior.probs[t, v])] for v in support],
        })
    return {"rows": rows, "default": "uniform-valid"}
