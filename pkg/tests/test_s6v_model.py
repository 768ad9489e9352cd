import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from s6vldp.height_core import HeightField, is_step_boundary, is_valid, shift
from s6vldp.s6v_model import (
    ADMISSIBLE,
    ModelParams,
    VertexConfig,
    boltzmann_probability,
    boltzmann_weight,
    check_step_sample,
    empirical_field_distribution,
    enumerate_distribution,
    height_distribution,
    height_observable,
    max_weight_ratio,
    sample_heights,
    sample_observables,
    tail_probability,
    total_variation,
    verify_log_concavity,
    verify_weight_inequality,
    vertex_weight,
)

HALF = ModelParams(Fr(1, 2), Fr(1, 2))
unit = st.floats(0.02, 0.98)


def test_weights_at_half():
    assert vertex_weight(HALF, (1, 1, 1, 1)) == 1
    assert vertex_weight(HALF, (0, 1, 0, 1)) == Fr(2, 3)
    assert vertex_weight(HALF, (1, 0, 1, 0)) == Fr(1, 3)
    assert HALF.C == 64


def test_non_conserving_rejected():
    with pytest.raises(ValueError):
        vertex_weight(HALF, (1, 0, 1, 1))
    with pytest.raises(ValueError):
        ModelParams(1.2, 0.5)


@given(unit, unit)
def test_weight_table_relations(a, q):
    P = ModelParams(a, q)
    assert 0 < P.b1 < P.b2 < 1
    assert P.b1 / P.b2 == pytest.approx(q)
    assert (1 - P.b2) / (1 - P.b1) == pytest.approx(a)
    # outgoing weights sum to one for every incoming pattern
    for i1 in (0, 1):
        for j1 in (0, 1):
            outs = [c for c in ADMISSIBLE if (c.i1, c.j1) == (i1, j1)]
            assert sum(vertex_weight(P, c) for c in outs) == pytest.approx(1.0)


def test_admissible_configs():
    assert len(ADMISSIBLE) == 6
    assert all(c.admissible for c in ADMISSIBLE)
    assert not VertexConfig(1, 0, 1, 1).admissible


def test_weight_ratio_bound():
    assert max_weight_ratio(HALF) <= 64
    # the bound is not universal: for small a the worst ratio exceeds the constant
    P = ModelParams(0.01, 0.5)
    assert max_weight_ratio(P) > P.C


def test_all_horizontal_2x2():
    h = HeightField.horizontal(2, 2)
    assert boltzmann_probability(HALF, h) == Fr(16, 81)
    assert boltzmann_weight(HALF.as_float(), h) == pytest.approx(math.log(16 / 81))


@pytest.mark.parametrize("M,N", [(2, 2), (3, 2), (3, 3), (4, 2)])
def test_top_height_law(M, N):
    # every path stays horizontal through the first M-1 columns
    dist = height_distribution(HALF, M, N)
    assert dist[N] == HALF.b2 ** ((M - 1) * N)


def test_single_vertex_enumeration():
    d = enumerate_distribution(HALF, 1, 1)
    assert sorted(d.values()) == [Fr(1, 3), Fr(2, 3)]


def test_enumeration_exact_total():
    d = enumerate_distribution(HALF, 3, 3)
    assert sum(d.values()) == 1
    assert all(p > 0 for p in d.values())
    assert all(is_valid(h) and is_step_boundary(h) for h in d)


@pytest.mark.parametrize("M,N", [(1, 1), (2, 2), (3, 2), (2, 4), (4, 4)])
def test_enumerator_matches_boltzmann(M, N):
    d = enumerate_distribution(HALF, M, N)
    for h, p in d.items():
        assert boltzmann_probability(HALF, h) == p


@pytest.mark.parametrize("M,N", [(1, 3), (2, 1), (2, 3), (3, 3), (4, 3), (5, 5)])
def test_transfer_matrix_matches_enumeration(M, N):
    # two independent routes to the law of the observable
    P = ModelParams(0.3, 0.7)
    d = enumerate_distribution(P, M, N)
    marg = np.zeros(N + 1)
    for h, p in d.items():
        marg[height_observable(h)] += p
    assert np.allclose(marg, np.array(height_distribution(P, M, N), float), atol=1e-12)


def test_enumeration_guard():
    with pytest.raises(ValueError):
        enumerate_distribution(HALF, 6, 5)
    with pytest.raises(ValueError):
        tail_probability(HALF, 9, 9)


def test_tail_examples():
    t = tail_probability(HALF, 2, 1)
    assert t[0] == 1 and t[1] == Fr(2, 3) and t[5] == 0
    assert t.to_csv().splitlines()[0] == "r,prob,stderr"


def test_observable_on_first_column():
    for h in enumerate_distribution(HALF, 3, 3):
        assert height_observable(h, 1, 3) == 3


@given(st.integers(0, 10 ** 6))
def test_observable_monotone(seed):
    h = HeightField(sample_heights(HALF, 6, 6, 1, seed)[0])
    for M in range(1, 6):
        for N in range(0, 6):
            assert height_observable(h, M + 1, N) <= height_observable(h, M, N)
            assert height_observable(h, M, N + 1) >= height_observable(h, M, N)
            assert 0 <= height_observable(h, M, N) <= N


def test_observable_out_of_window():
    with pytest.raises(IndexError):
        height_observable(HeightField.horizontal(2, 2), 3, 2)


def test_exact_and_mc_tails_agree():
    ex = tail_probability(HALF, 3, 3)
    mc = tail_probability(HALF, 3, 3, mode="mc", n_samples=20000, seed=3)
    for r in range(4):
        se = max(mc.stderr[r], 1e-12)
        assert abs(float(ex[r]) - mc[r]) <= 3 * se + 1e-12


def test_sampler_deterministic_and_thread_free():
    P = HALF.as_float()
    a = sample_heights(P, 5, 4, 300, seed=11)
    b = sample_heights(P, 5, 4, 300, seed=11, threads=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_heights(P, 5, 4, 300, seed=12))
    assert all(check_step_sample(HeightField(x)) for x in a[:50])


def test_replica_prefix_stable():
    P = HALF.as_float()
    assert np.array_equal(sample_observables(P, 4, 4, 50, 5), sample_observables(P, 4, 4, 500, 5)[:50])


def test_sampler_vs_enumerator_small():
    P = ModelParams(0.3, 0.7)
    emp = empirical_field_distribution(sample_heights(P, 2, 2, 200_000, seed=1))
    assert total_variation(emp, enumerate_distribution(P, 2, 2)) < 0.01


@given(st.integers(0, 10 ** 6), st.integers(-4, 4))
def test_weight_shift_invariant(seed, k):
    P = HALF.as_float()
    h = HeightField(sample_heights(P, 4, 3, 1, seed)[0])
    assert boltzmann_weight(P, shift(h, k)) == pytest.approx(boltzmann_weight(P, h))


def test_weight_inequality_trivial_pair():
    h = HeightField(sample_heights(HALF, 4, 4, 1, 0)[0])
    rep = verify_weight_inequality(HALF.as_float(), h, h, (2, 2), 0)
    assert rep.boundary_size == 0 and rep.slack == pytest.approx(0.0) and rep.passed


def test_upsilon_injective_on_enumerated_pairs():
    from s6vldp.height_core import k_star, upsilon

    fields = list(enumerate_distribution(HALF, 3, 3))
    p = (2, 3)
    for r in range(4):
        for rp in range(r + 1, 4):
            seen = set()
            pairs = [(h, hp) for h in fields if h[p] == r for hp in fields if hp[p] == rp]
            for h, hp in pairs:
                img = upsilon(h, hp, p, k_star(h, hp, p))
                assert img not in seen
                seen.add(img)


@pytest.mark.parametrize("M,N", [(3, 3), (4, 4)])
def test_log_concavity_small(M, N):
    rep = verify_log_concavity(HALF, M, N)
    assert rep.passed and rep.pairs_checked == (N + 1) ** 2


def test_lower_tail_rate_shrinks_below_mean():
    # mean height / N is 3 - 2 sqrt 2 ~ 0.1716; between jumps of ceil(sN) the rate decreases
    s = 0.15
    rates = []
    for N in range(8, 12):
        d = height_distribution(HALF.as_float(), N, N)
        rates.append(-math.log(sum(d[math.ceil(s * N):])) / N ** 2)
    assert all(x > y > 0 for x, y in zip(rates, rates[1:]))
    assert rates[-1] < 1e-4


def test_weak_midpoint_convexity_4x4():
    M = N = 4
    P = HALF.as_float()
    dist = height_distribution(P, M, N)
    tails = [sum(dist[r:]) for r in range(N + 1)]

    def rate(v):
        r = math.ceil(v * N - 1e-12)
        if r > N:
            return math.inf
        return -math.log(tails[max(r, 0)]) / N ** 2

    eps = (2 * math.log(N) + (M * N) ** (7 / 8) * P.log_C) / (2 * N ** 2)
    grid = [r / N for r in range(N + 1)]
    for v1 in grid:
        for v2 in grid:
            assert rate(v1) / 2 + rate(v2) / 2 + eps >= rate((v1 + v2) / 2 - N ** (-1 / 6))
