import itertools
import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from s6vldp.potential_theory import Field
from s6vldp.q_analysis import inv_product
from s6vldp.rate_functions import R_s, RateParams
from s6vldp.schur_gas import (
    GasParams,
    Partition,
    R_N,
    decomposition_gap,
    empirical_energy,
    log_weight_energy,
    log_weight_product,
    loggas_decomposition_gap,
    moment_match_gap,
    multiplicative_expectation,
    partitions,
    potential_VN,
    schur_dim,
    size_law_check,
    smoothed_energy,
    staircase,
    zmeasure_weight,
)

partition_st = st.lists(st.integers(0, 6), max_size=5).map(lambda v: Partition(tuple(sorted(v, reverse=True))))


def test_partition_normalises():
    assert Partition((3, 1, 0, 0)).parts == (3, 1)
    assert Partition(()).size == 0
    with pytest.raises(ValueError):
        Partition((1, 2))


@given(partition_st, st.integers(0, 3))
def test_shifted_round_trip(lam, extra):
    N = max(len(lam) + extra, 1)
    ell = lam.shifted(N)
    assert (np.diff(ell) < 0).all() and ell[-1] >= 0
    assert Partition.from_shifted(ell) == lam


def test_partition_iterator_in_box():
    got = list(partitions(3, 4))
    assert len(got) == len(set(got)) == math.comb(7, 3)
    assert all(len(p) <= 3 and (not p.parts or p.parts[0] <= 4) for p in got)


def _ssyt_count(lam: Partition, K: int) -> int:
    cells = [(r, c) for r, n in enumerate(lam.parts) for c in range(n)]
    count = 0
    for fill in itertools.product(range(K), repeat=len(cells)):
        t = dict(zip(cells, fill))
        rows = all(t[r, c] <= t[r, c + 1] for r, c in cells if (r, c + 1) in t)
        cols = all(t[r, c] < t[r + 1, c] for r, c in cells if (r + 1, c) in t)
        count += rows and cols
    return count


def test_schur_dim_examples():
    assert schur_dim(Partition(()), 4) == 1
    assert schur_dim(Partition((1,)), 2) == 2
    assert schur_dim(Partition((2, 1)), 3) == 8
    assert schur_dim(Partition((1, 1, 1)), 2) == 0


@pytest.mark.parametrize("parts,K", [((2, 1), 3), ((2, 2), 3), ((3, 1), 2), ((2, 1, 1), 3), ((3,), 3)])
def test_schur_dim_counts_tableaux(parts, K):
    lam = Partition(parts)
    assert schur_dim(lam, K) == _ssyt_count(lam, K)


def test_zmeasure_geometric_case():
    for k in range(5):
        assert zmeasure_weight(Fr(1, 2), 1, 1, Partition((k,))) == Fr(1, 2) ** (k + 1)
    assert zmeasure_weight(Fr(1, 2), 1, 1, Partition((2,))) == Fr(1, 8)
    assert zmeasure_weight(0.3, 1, 1, Partition((2,))) == pytest.approx(0.7 * 0.09)


def test_zmeasure_truncated_mass():
    masses = []
    for L in (5, 20, 60):
        masses.append(sum(zmeasure_weight(0.5, 2, 2, lam) for lam in partitions(2, L)))
    assert masses[0] < masses[1] < masses[2] or masses[1] == masses[2]
    assert masses[-1] == pytest.approx(1.0, abs=1e-10)


def test_size_law():
    assert size_law_check(0.5, 1, 1) < 1e-14
    assert size_law_check(0.5, 2, 2) < 1e-10
    mean = sum(lam.size * zmeasure_weight(0.5, 2, 3, lam) for lam in partitions(2, 60))
    assert mean == pytest.approx(6.0, abs=1e-6)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_empty_partition_reduction(N):
    # with z' = 0 only the empty partition survives
    zeta, q = 1.7, 0.5
    val, bound = multiplicative_expectation(0.5, q, N, 1, zeta)
    assert bound == pytest.approx(0.0, abs=1e-15)
    assert val == pytest.approx(inv_product(N, q, zeta), rel=1e-12)


def test_multiplicative_expectation_21():
    val, _ = multiplicative_expectation(0.5, 0.5, 1, 2, 1.0)
    assert val == pytest.approx(0.349518, abs=1e-6)
    vals = [multiplicative_expectation(0.5, 0.5, 2, 2, z)[0] for z in (0.1, 1, 10)]
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("M,N", [(1, 1), (2, 1), (2, 2), (3, 2), (3, 3)])
@pytest.mark.parametrize("zeta", [0.1, 1.0, 10.0])
def test_moment_match(M, N, zeta):
    assert moment_match_gap(0.5, 0.5, M, N, zeta) < 1e-8


def test_moment_match_other_params():
    assert moment_match_gap(0.3, 0.7, 2, 3, 2.0) < 1e-8


# -- log-gas form -------------------------------------------------------------


def test_shifted_validation():
    g = GasParams(0.5, 0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        log_weight_product([3, 3, 0], g, 3)
    with pytest.raises(ValueError):
        smoothed_energy([1, 2, 0], 3, lambda x: x)
    with pytest.raises(ValueError):
        GasParams(0.5, 0.5, 1.5, 0.0).extra(3)


def test_R_N_approaches_limit():
    P = RateParams(0.5, 0.5, 1.0)
    limit = R_s(P, 0.0)
    assert limit == pytest.approx(-1.153426, abs=1e-6)
    g = GasParams(0.5, 0.5, 1.0, 0.0)
    gaps = []
    for N in (50, 100, 200, 400):
        gap = abs(R_N(g, N) - limit)
        # the finite-N correction is of order log N / N, not 1/N
        assert gap < 2 * math.log(N) / N
        gaps.append(gap)
    assert all(x > y for x, y in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("alpha", [1, 2, 3])
@pytest.mark.parametrize("N", [4, 16, 64])
def test_finite_field_bracket(alpha, N):
    s = 0.7
    x = np.linspace(0.05, 6, 300)
    diff = potential_VN(x, GasParams(0.5, 0.5, alpha, s), N) - Field(0.5, 0.5, alpha, s)(x)
    bound = math.log(2) / N + np.log((x + alpha - 1) / x) / N
    assert (diff <= 1e-12).all()
    assert (np.abs(diff) <= bound + 1e-12).all()


def test_atomic_vs_smoothed_energy():
    gaps = []
    for N in (8, 16, 32):
        ell = staircase(N)
        V = lambda t, N=N: potential_VN(t, GasParams(0.5, 0.5, 1.0, 0.5), N)
        gaps.append(abs(empirical_energy(ell / N, V) - smoothed_energy(ell, N, V)))
    assert gaps[0] > gaps[1] > gaps[2]


def test_decomposition_smoke():
    D = loggas_decomposition_gap(0.5, 0.5, 4, 1.0, 0.0, Partition(()))
    assert math.isfinite(D) and D >= 0


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_decomposition_gap_decays(alpha):
    g = GasParams(0.5, 0.5, alpha, 0.5)
    D = [decomposition_gap(staircase(N), g, N) for N in (4, 8, 16, 32)]
    assert all(x > y for x, y in zip(D, D[1:]))
    assert D[-1] < 0.1


def test_decomposition_s_shift():
    # moving s by one lattice step changes both sides by nearly the same amount
    errs = []
    for N in (8, 16, 32):
        ell = staircase(N)
        g0, g1 = GasParams(0.5, 0.5, 1.0, 0.5), GasParams(0.5, 0.5, 1.0, 0.5 + 1 / N)
        dp = log_weight_product(ell, g1, N) - log_weight_product(ell, g0, N)
        de = log_weight_energy(ell, g1, N) - log_weight_energy(ell, g0, N)
        errs.append(abs(dp - de) / N ** 2)
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-3


@given(partition_st)
def test_product_weight_finite(lam):
    N = max(len(lam), 1)
    assert math.isfinite(log_weight_product(lam.shifted(N), GasParams(0.5, 0.5, 1.0, 0.2), N))
