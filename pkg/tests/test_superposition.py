import numpy as np
import pytest

from conftest import make_random_loop

from superloop.representation import NUM_ATTRIBUTES, encode_loop
from superloop.superposition import (
    EmptySupport,
    PriorMatrix,
    ShapeMismatch,
    mix_priors,
    one_hot_prior,
    prior_from_sparse,
    prior_to_sparse,
    random_add,
    uniform_prior,
    validate_prior,
)


def encode_random(rng, vocab, n_notes):
    loop = make_random_loop(rng, max_notes=n_notes)
    return encode_loop(loop, vocab, n_notes)


class TestValidatePrior:
    def test_one_hot_is_valid(self, vocab, mask4):
        rng = np.random.default_rng(0)
        x = encode_random(rng, vocab, 4)
        prior = one_hot_prior(x, mask4)
        assert validate_prior(prior, mask4, x).ok

    def test_uniform_valid_for_any_x(self, vocab, mask4):
        rng = np.random.default_rng(1)
        prior = uniform_prior(mask4)
        for _ in range(5):
            x = encode_random(rng, vocab, 4)
            assert validate_prior(prior, mask4, x).ok

    def test_bad_row_sum_reported(self, vocab, mask4):
        probs = uniform_prior(mask4).probs.copy()
        probs[3] *= 0.9
        report = validate_prior(PriorMatrix(probs=probs), mask4)
        assert not report.ok
        assert report.row_sum_errors[0][0] == 3

    def test_negative_entry_reported(self, mask4, vocab):
        probs = uniform_prior(mask4).probs.copy()
        probs[2, 0] -= 2.0
        probs[2, 1] += 2.0
        report = validate_prior(PriorMatrix(probs=probs), mask4)
        assert 2 in report.negative_rows

    def test_mass_outside_syntax_reported(self, vocab, mask4):
        probs = uniform_prior(mask4).probs.copy()
        # instrument row: put mass on a pitch token
        probs[0, vocab.token(1, 60)] = 0.5
        probs[0] /= probs[0].sum()
        report = validate_prior(PriorMatrix(probs=probs), mask4)
        assert 0 in report.syntax_violation_rows

    def test_zero_at_truth_reported(self, vocab, mask4):
        rng = np.random.default_rng(2)
        x = encode_random(rng, vocab, 4)
        other = x.copy()
        other[0] = vocab.token(0, (vocab.value_of(int(x[0]))[1] or 0 + 1) % 18)
        prior = one_hot_prior(other, mask4)
        report = validate_prior(prior, mask4, x)
        if (other != x).any():
            assert report.truth_zero_rows

    def test_shape_mismatch(self, mask4, mask16):
        with pytest.raises(ShapeMismatch):
            validate_prior(uniform_prior(mask4), mask16)


class TestOneHot:
    def test_rows_sum_to_exactly_one(self, vocab, mask4):
        rng = np.random.default_rng(3)
        x = encode_random(rng, vocab, 4)
        prior = one_hot_prior(x, mask4)
        assert (prior.probs.sum(axis=1) == 1.0).all()

    def test_syntax_violation_raises(self, vocab, mask4):
        from superloop.representation import SyntaxViolation
        x = np.zeros(mask4.shape[0], dtype=np.int64)  # instrument token everywhere
        with pytest.raises(SyntaxViolation):
            one_hot_prior(x, mask4)


class TestRandomAdd:
    def test_eq1_contract_over_seeds(self, vocab, mask4):
        rng = np.random.default_rng(10)
        for _ in range(100):
            x = encode_random(rng, vocab, 4)
            sample = random_add(x, mask4, rng)
            assert validate_prior(sample.prior, mask4, x).ok

    def test_support_contains_truth_rowwise(self, vocab, mask4):
        rng = np.random.default_rng(11)
        x = encode_random(rng, vocab, 4)
        sample = random_add(x, mask4, rng)
        assert (sample.prior.probs[np.arange(len(x)), x] > 0).all()

    def test_forced_p_pos_zero_is_one_hot(self, vocab, mask4):
        rng = np.random.default_rng(12)
        x = encode_random(rng, vocab, 4)
        sample = random_add(x, mask4, rng, p_pos=0.0)
        assert (sample.prior.probs == one_hot_prior(x, mask4).probs).all()

    def test_forced_all_ones_is_uniform_valid(self, vocab, mask4):
        rng = np.random.default_rng(13)
        x = encode_random(rng, vocab, 4)
        sample = random_add(x, mask4, rng, p_pos=1.0, p_vocab=1.0)
        assert np.allclose(sample.prior.probs, uniform_prior(mask4).probs)

    def test_same_seed_bitwise_identical(self, vocab, mask4):
        rng = np.random.default_rng(14)
        x = encode_random(rng, vocab, 4)
        a = random_add(x, mask4, np.random.default_rng(99)).prior.probs
        b = random_add(x, mask4, np.random.default_rng(99)).prior.probs
        assert (a == b).all()

    def test_non_one_hot_fraction_matches_expectation(self, vocab, mask16):
        # Oracle: P(row t is superposed) = E_p[p] * E_q[1 - (1-q)^(k_t - 1)]
        # computed by numerical quadrature, independent of the implementation.
        from scipy.integrate import quad
        expected_rows = []
        for attr in range(NUM_ATTRIBUTES):
            k = vocab.valid_count(attr)
            integral, _ = quad(lambda q, m=k - 1: 1.0 - (1.0 - q) ** m, 0.0, 1.0)
            expected_rows.append(0.5 * integral)
        expected = float(np.mean(expected_rows))
        assert 0.43 < expected < 0.5  # sanity: band sits around one half

        rng = np.random.default_rng(2024)
        fractions = []
        for _ in range(200):
            x = encode_random(rng, vocab, 16)
            prior = random_add(x, mask16, rng).prior
            non_one_hot = sum(
                1 for t in range(prior.n_positions)
                if np.count_nonzero(prior.probs[t]) > 1
            )
            fractions.append(non_one_hot / prior.n_positions)
        assert abs(np.mean(fractions) - expected) < 0.05


class TestMixPriors:
    def test_intersect_with_uniform_is_identity(self, vocab, mask4):
        rng = np.random.default_rng(20)
        x = encode_random(rng, vocab, 4)
        prior = random_add(x, mask4, rng).prior
        mixed = mix_priors(prior, uniform_prior(mask4), op="intersect")
        assert np.allclose(mixed.probs, prior.probs)

    def test_intersect_one_hot_idempotent(self, vocab, mask4):
        rng = np.random.default_rng(21)
        x = encode_random(rng, vocab, 4)
        prior = one_hot_prior(x, mask4)
        mixed = mix_priors(prior, prior, op="intersect")
        assert (mixed.probs == prior.probs).all()

    def test_disjoint_one_hots_raise(self, vocab, mask4):
        rng = np.random.default_rng(22)
        x = encode_random(rng, vocab, 4)
        y = x.copy()
        value = vocab.value_of(int(y[0]))[1]
        y[0] = vocab.token(0, ((value if value is not None else 0) + 1) % 18)
        with pytest.raises(EmptySupport) as info:
            mix_priors(one_hot_prior(x, mask4), one_hot_prior(y, mask4), op="intersect")
        assert info.value.row == 0

    def test_overwrite_rows(self, vocab, mask4):
        rng = np.random.default_rng(23)
        x = encode_random(rng, vocab, 4)
        a = one_hot_prior(x, mask4)
        b = uniform_prior(mask4)
        mixed = mix_priors(a, b, op="overwrite-rows", rows=[0, 5])
        assert np.allclose(mixed.probs[0], b.probs[0])
        assert np.allclose(mixed.probs[5], b.probs[5])
        assert (mixed.probs[1] == a.probs[1]).all()


class TestSparsePrior:
    def test_default_uniform(self, vocab, mask4):
        prior = prior_from_sparse({"rows": [], "default": "uniform-valid"}, mask4)
        assert np.allclose(prior.probs, uniform_prior(mask4).probs)

    def test_default_truth(self, vocab, mask4):
        rng = np.random.default_rng(30)
        x = encode_random(rng, vocab, 4)
        prior = prior_from_sparse({"rows": [], "default": "truth"}, mask4, truth=x)
        assert (prior.probs == one_hot_prior(x, mask4).probs).all()

    def test_explicit_row(self, vocab, mask4):
        doc = {
            "rows": [{"t": 1, "support": [[vocab.token(1, 60), 1.0], [vocab.token(1, 64), 3.0]]}],
            "default": "uniform-valid",
        }
        prior = prior_from_sparse(doc, mask4)
        assert prior.probs[1, vocab.token(1, 64)] == pytest.approx(0.75)
        assert prior.probs[1, vocab.token(1, 60)] == pytest.approx(0.25)

    def test_invalid_token_rejected(self, vocab, mask4):
        from superloop.representation import SyntaxViolation
        doc = {"rows": [{"t": 0, "support": [[vocab.token(1, 60), 1.0]]}]}
        with pytest.raises(SyntaxViolation):
            prior_from_sparse(doc, mask4)

    def test_round_trip_through_sparse(self, vocab, mask4):
        rng = np.random.default_rng(31)
        x = encode_random(rng, vocab, 4)
        prior = random_add(x, mask4, rng).prior
        doc = prior_to_sparse(prior, vocab)
        back = prior_from_sparse(doc, mask4)
        assert np.allclose(back.probs, prior.probs)
