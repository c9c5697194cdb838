import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shaping_bounds.errors import InvalidDistributionError
from shaping_bounds.info import (
    LN2,
    Channel,
    JointPmf,
    Pmf,
    binary_entropy,
    cross_entropy,
    entropy,
    joint,
    kl_divergence,
    mutual_information,
    output_marginal,
)

from .oracles import kl_bits, mi_bits

BSC01 = [[0.9, 0.1], [0.1, 0.9]]


def pmfs(min_size=2, max_size=6):
    entry = st.one_of(st.just(0.0), st.floats(1e-6, 1.0))
    return st.lists(entry, min_size=min_size, max_size=max_size).filter(
        lambda v: sum(v) > 1e-3).map(lambda v: Pmf(np.array(v) / sum(v)))


def channels(n_in, n_out):
    rows = st.lists(st.floats(1e-3, 1.0), min_size=n_out, max_size=n_out)
    return st.lists(rows, min_size=n_in, max_size=n_in).map(
        lambda r: Channel(np.array(r) / np.array(r).sum(axis=1, keepdims=True)))


class TestConstruction:
    def test_renormalizes_small_drift(self):
        p = Pmf([0.5, 0.5 + 5e-10])
        assert abs(p.probs.sum() - 1.0) < 1e-12

    def test_rejects_large_drift(self):
        with pytest.raises(InvalidDistributionError):
            Pmf([0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(InvalidDistributionError):
            Pmf([1.1, -0.1])

    def test_rejects_nan(self):
        with pytest.raises(InvalidDistributionError):
            Pmf([math.nan, 1.0])

    def test_immutable(self):
        p = Pmf([0.3, 0.7])
        with pytest.raises(ValueError):
            p.probs[0] = 0.5

    def test_channel_rows_checked(self):
        with pytest.raises(InvalidDistributionError):
            Channel([[0.5, 0.5], [0.2, 0.2]])

    def test_joint_checked(self):
        with pytest.raises(InvalidDistributionError):
            JointPmf([[0.5, 0.5], [0.2, 0.2]])

    def test_equality_and_hash(self):
        assert Pmf([0.25, 0.75]) == Pmf([0.25, 0.75])
        assert len({Pmf([0.25, 0.75]), Pmf([0.25, 0.75])}) == 1


class TestEntropy:
    def test_uniform_binary(self):
        assert entropy(Pmf.uniform(2)) == pytest.approx(1.0, abs=1e-15)

    def test_point_mass(self):
        assert entropy([1.0, 0.0]) == 0.0

    def test_closed_form(self):
        expected = -(0.3 * math.log2(0.3) + 0.7 * math.log2(0.7))
        assert entropy([0.3, 0.7]) == pytest.approx(expected, abs=1e-14)
        assert entropy([0.3, 0.7]) == pytest.approx(0.8812908992306927, abs=1e-14)

    def test_binary_entropy(self):
        assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(0.1) == pytest.approx(0.4689955935892812, abs=1e-14)

    @pytest.mark.parametrize("g", [-0.1, 1.5])
    def test_binary_entropy_range(self, g):
        with pytest.raises(ValueError):
            binary_entropy(g)


class TestDivergence:
    def test_identity(self):
        assert kl_divergence([0.2, 0.8], [0.2, 0.8]) == 0.0

    def test_uniform_identity(self):
        assert kl_divergence([0.3, 0.7], [0.5, 0.5]) == pytest.approx(1 - binary_entropy(0.3), abs=1e-14)
        assert kl_divergence([0.3, 0.7], [0.5, 0.5]) == pytest.approx(0.118709100769307, abs=1e-12)

    def test_disjoint_support(self):
        assert kl_divergence([1.0, 0.0], [0.0, 1.0]) == math.inf

    def test_zero_mass_terms(self):
        assert kl_divergence([0.0, 1.0], [0.5, 0.5]) == pytest.approx(1.0)

    def test_cross_entropy(self):
        q, p = [0.3, 0.7], [0.6, 0.4]
        direct = -(0.3 * math.log2(0.6) + 0.7 * math.log2(0.4))
        assert cross_entropy(q, p) == pytest.approx(direct, abs=1e-14)


class TestChannels:
    def test_identity_channel(self):
        assert mutual_information(Pmf.uniform(2), np.eye(2)) == pytest.approx(1.0)

    def test_useless_channel(self):
        assert mutual_information([0.3, 0.7], [[0.5, 0.5], [0.5, 0.5]]) == 0.0

    def test_bsc_uniform(self):
        assert mutual_information(Pmf.uniform(2), BSC01) == pytest.approx(
            1 - binary_entropy(0.1), abs=1e-14)
        assert mutual_information(Pmf.uniform(2), BSC01) == pytest.approx(0.531004406410719, abs=1e-12)

    def test_output_marginal_point_mass(self):
        W = np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]])
        assert np.array_equal(output_marginal(Pmf.point(2, 1), W).probs, W[1])

    def test_output_marginal_bsc(self):
        assert np.allclose(output_marginal(Pmf.uniform(2), BSC01).probs, [0.5, 0.5])
        assert np.allclose(output_marginal([0.7, 0.3], BSC01).probs, [0.66, 0.34], atol=1e-15)

    def test_joint(self):
        assert np.allclose(joint(Pmf.uniform(2), np.eye(2)).probs, np.diag([0.5, 0.5]))
        assert np.allclose(joint(Pmf.uniform(2), BSC01).probs, [[0.45, 0.05], [0.05, 0.45]])

    def test_joint_with_unused_input(self):
        jp = joint([1.0, 0.0], BSC01)
        assert jp.probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            output_marginal(Pmf.uniform(3), BSC01)


@settings(max_examples=200, deadline=None)
@given(pmfs())
def test_entropy_bounds(p):
    h = entropy(p)
    assert -1e-12 <= h <= math.log2(p.support_size) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5).flatmap(lambda k: st.tuples(pmfs(k, k), pmfs(k, k))))
def test_divergence_matches_loop_oracle(pair):
    q, p = pair
    d = kl_divergence(q, p)
    ref = kl_bits(q.probs, p.probs)
    if math.isinf(ref):
        assert math.isinf(d)
    else:
        assert d == pytest.approx(ref, abs=1e-10)
        assert d >= -1e-12
    # unit round trip through nats
    if math.isfinite(d):
        assert (d * LN2) / LN2 == pytest.approx(d, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 4).flatmap(
    lambda k: st.tuples(pmfs(k, k), st.integers(2, 4).flatmap(lambda m: channels(k, m)))))
def test_mutual_information_bounds(args):
    p, ch = args
    i = mutual_information(p, ch)
    assert i >= 0
    assert i <= min(entropy(p), entropy(output_marginal(p, ch))) + 1e-12
    assert i == pytest.approx(mi_bits(p.probs, ch.rows), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 4).flatmap(
    lambda k: st.tuples(pmfs(k, k), st.integers(2, 4).flatmap(lambda m: channels(k, m)))))
def test_joint_marginals(args):
    p, ch = args
    jp = joint(p, ch)
    assert np.allclose(jp.probs.sum(axis=1), p.probs, atol=1e-15)
    assert np.allclose(jp.output_marginal().probs, output_marginal(p, ch).probs, atol=1e-12)
