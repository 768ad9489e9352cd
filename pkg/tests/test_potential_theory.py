import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from s6vldp import potential_theory as pt
from s6vldp.potential_theory import (
    C_alpha,
    ClosedFormEquilibrium,
    EquilibriumError,
    Field,
    GridDensity,
    cell_kernel_column,
    default_domain,
    effective_field,
    energy,
    equilibrium_energy,
    equilibrium_energy_F,
    integral_identity,
    log_potential,
    log_potential_U,
    phi_closed_form,
    project_capped_simplex,
    solve_equilibrium,
    uniform_density,
    variational_constant,
)

F_INF_HALF = 1.905465
LAMBDA_HALF = 1.405465


@pytest.fixture(scope="module")
def solved_half():
    hi = default_domain(0.5, 0.5, 1.0)
    return solve_equilibrium(Field(0.5, 0.5), hi, 2000), hi


# -- kernel and energy ------------------------------------------------------------


def test_kernel_diagonal_exact():
    dx = 0.01
    assert cell_kernel_column(3, dx)[0] == pytest.approx(1.5 - math.log(dx), rel=1e-14)


@pytest.mark.parametrize("m", [3, 9, 10, 11, 40])
def test_kernel_offsets_by_quadrature(m):
    dx = 0.1
    val, _ = integrate.dblquad(lambda y, x: -math.log(abs(x - y)), 0, dx, m * dx, (m + 1) * dx, epsabs=1e-13)
    assert cell_kernel_column(m + 1, dx)[m] == pytest.approx(val / dx ** 2, abs=1e-10)


def test_uniform_unit_energy():
    rho = uniform_density(0.0, 1.0, 4000)
    zero = lambda x: np.zeros_like(x)
    assert energy(zero, rho) == pytest.approx(1.5, abs=2e-3)
    assert energy(lambda x: np.full_like(x, 2.5), rho) == pytest.approx(energy(zero, rho) + 2.5, abs=1e-12)


def test_energy_relabel_symmetric():
    rng = np.random.default_rng(0)
    v = rng.random(50)
    v /= v.sum() * 0.1
    a = GridDensity(0.0, 5.0, v)
    b = GridDensity(0.0, 5.0, v[::-1])
    zero = lambda x: np.zeros_like(x)
    assert energy(zero, a) == pytest.approx(energy(zero, b), rel=1e-12)


def test_effective_field_example():
    rho = uniform_density(0.0, 1.0, 1000)
    zero = lambda x: np.zeros_like(x)
    assert effective_field(zero, rho, 2.0)[0] == pytest.approx(-(2 * math.log(2) - 1), abs=1e-10)
    # symmetric density gives a symmetric potential about its centre
    ys = np.array([0.2, 0.4])
    assert np.allclose(log_potential(rho, ys), log_potential(rho, 1 - ys))


# -- projection -----------------------------------------------------------------


@given(st.lists(st.floats(-5, 5), min_size=20, max_size=60), st.floats(0.05, 0.2))
def test_projection_feasible_and_optimal(z, dx):
    z = np.array(z)
    if 1 / dx > z.size:
        return
    p = project_capped_simplex(z, dx)
    assert p.min() >= 0 and p.max() <= 1
    assert p.sum() * dx == pytest.approx(1.0, abs=1e-9)
    # optimality: the shift z - p is constant on the free cells
    free = (p > 1e-9) & (p < 1 - 1e-9)
    if free.sum() > 1:
        shifts = (z - p)[free]
        assert shifts.max() - shifts.min() < 1e-8


def test_projection_rejects_short_grid():
    with pytest.raises(ValueError):
        project_capped_simplex(np.zeros(5), 0.1)


# -- field and closed form ---------------------------------------------------------


def test_field_form():
    V = Field(0.5, 0.5, 2.0, 1.0)
    x = np.array([0.5, 2.0])
    expect = x * math.log(2) + math.log(2) * np.minimum(x, 1.0) - (np.log(x + 1) - 1) + x * np.log(x / (x + 1))
    assert np.allclose(V(x), expect)
    assert np.isfinite(V(np.array([0.0])))[0]
    with pytest.raises(ValueError):
        Field(0.5, 0.5, 0.5)


def test_closed_form_reference():
    cf = phi_closed_form(0.5, 0.5, 1.0)
    assert cf.c == pytest.approx(1 / 3) and cf.d == pytest.approx(3.0)
    assert cf.saturated
    assert cf(np.array([1.0]))[0] == pytest.approx(1 / 3, abs=1e-12)
    assert cf(np.array([0.2, 3.5]))[0] == 1.0 and cf(np.array([3.5]))[0] == 0.0


@pytest.mark.parametrize("a,q,al", [(0.5, 0.5, 1.0), (0.9, 0.9, 2.0), (0.3, 0.6, 3.0), (0.7, 0.5, 1.5)])
def test_closed_form_mass(a, q, al):
    cf = ClosedFormEquilibrium(a, q, al)
    f = lambda x: float(cf(np.array([x]))[0])
    mass = integrate.quad(f, 0, cf.d, points=[cf.c], limit=200, epsabs=1e-12)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_C_alpha_values():
    assert C_alpha(1.0) == -1.5
    assert C_alpha(2.0) == pytest.approx(-1.613706, abs=1e-6)
    assert C_alpha(1 + 1e-9) == pytest.approx(-1.5, abs=1e-7)
    with pytest.raises(ValueError):
        C_alpha(0.5)


def test_F_inf_reference():
    assert pt.F_inf_closed_form(0.5, 0.5, 1.0) == pytest.approx(F_INF_HALF, abs=1e-6)
    assert equilibrium_energy(0.5, 0.5, 1.0, math.inf) == pt.F_inf_closed(0.5, 0.5, 1.0)


def test_variational_constant_reference():
    assert variational_constant(0.5, 0.5, 1.0) == pytest.approx(LAMBDA_HALF, abs=1e-6)


def _full_potential(cf, y):
    """Potential of the closed form on a fine grid plus ``V/2``, a route independent of the closed potential."""
    rho = cf.on_grid(cf.d + 1, 20000)
    return log_potential(rho, y) + Field(cf.a, cf.q, cf.alpha)(y) / 2


@pytest.mark.parametrize("a,q,al", [(0.5, 0.5, 1.0), (0.9, 0.9, 1.0), (0.9, 0.9, 2.0)])
def test_variational_sign_pattern(a, q, al):
    cf = ClosedFormEquilibrium(a, q, al)
    lam = variational_constant(a, q, al)
    inside = np.linspace(cf.c, cf.d, 22)[1:-1]
    assert np.abs(_full_potential(cf, inside) - lam).max() < 1e-5
    right = np.linspace(cf.d + 0.05, cf.d + 5, 40)
    u = _full_potential(cf, right)
    assert (u >= lam - 1e-6).all() and (np.diff(u) > 0).all()
    if cf.saturated and cf.c > 0.05:
        left = np.linspace(0.01, cf.c - 0.01, 20)
        assert (_full_potential(cf, left) <= lam + 1e-6).all()


@pytest.mark.parametrize("y", [5.0, 1.0, 0.2, 3.0, 1 / 3])
def test_log_potential_branches(y):
    closed, quad = log_potential_U(0.5, 0.5, 1.0, y)
    assert closed == pytest.approx(quad, abs=1e-6)


def test_log_potential_continuous_at_edge():
    cf = ClosedFormEquilibrium(0.5, 0.5, 1.0)
    left = pt.log_potential_closed(cf, cf.d - 1e-7)
    right = pt.log_potential_closed(cf, cf.d + 1e-7)
    assert left == pytest.approx(right, abs=1e-5)


@pytest.mark.parametrize("a,q,al", [(0.5, 0.5, 1.0), (0.9, 0.9, 2.0)])
def test_potential_integral(a, q, al):
    cf = ClosedFormEquilibrium(a, q, al)
    assert pt.potential_integral_closed(cf) == pytest.approx(pt.potential_integral_quad(cf), abs=1e-6)


def test_potential_integral_branch_continuity():
    a = q = math.sqrt(0.5)
    lo = ClosedFormEquilibrium(a, q, 2.0 - 1e-9)
    hi = ClosedFormEquilibrium(a, q, 2.0 + 1e-9)
    assert lo.saturated and not hi.saturated
    assert pt.potential_integral_closed(lo) == pytest.approx(pt.potential_integral_closed(hi), abs=1e-5)


def test_appendix_sub_results():
    cf = ClosedFormEquilibrium(0.5, 0.5, 1.0)
    c = cf.c
    assert pt.square_log_closed(c) == pytest.approx(-1.5 * c * c + c * c * math.log(c), abs=1e-12)
    assert pt.square_log_closed(c) == pytest.approx(pt.square_log_quad(c), abs=1e-6)
    assert pt.cross_log_closed(cf) == pytest.approx(pt.cross_log_quad(cf), abs=1e-6)
    assert pt.saturated_field_integral_closed(cf) == pytest.approx(pt.saturated_field_integral_quad(cf), abs=1e-6)


# -- integral identities ----------------------------------------------------------


def test_integral_identity_examples():
    assert integral_identity("J", 0, 0, 1, 1, 1)[0] == pytest.approx(math.pi / 2)
    assert integral_identity("J", 0, 0, 1, 1, 2)[0] == pytest.approx(math.pi / 4)
    val, res = integral_identity("I-", 0, 1, 1, 1, 1)
    assert val == pytest.approx(0.0, abs=1e-15) and res < 1e-8


def test_integral_identity_errors():
    with pytest.raises(ValueError):
        integral_identity("J", 0, 0, 2, 1, 2)
    with pytest.raises(ValueError):
        integral_identity("K", 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        integral_identity("I+", 0, 0, 1, 1, 1)


pos = st.floats(0.2, 3.0)


@given(pos, pos, pos, pos, st.sampled_from(["I-", "I+", "J"]))
def test_integral_identities_first_order(a, b, c, d, kind):
    _, res = integral_identity(kind, a, b, c, d, 1)
    assert res < 1e-8


@given(pos, pos, st.sampled_from(["I-", "I+"]))
def test_integral_identities_second_order(a, b, kind):
    _, res = integral_identity(kind, a, b, 1, 1, 2)
    assert res < 1e-8


# -- solver -------------------------------------------------------------------------


def test_solver_reference(solved_half):
    r, hi = solved_half
    cf = ClosedFormEquilibrium(0.5, 0.5, 1.0)
    rho = r.density
    assert rho.values.min() >= 0 and rho.values.max() <= 1
    assert rho.mass == pytest.approx(1.0, abs=1e-12)
    assert rho.saturation_edge(1e-6) == pytest.approx(cf.c, abs=0.02)
    assert rho.support(1e-6)[1] == pytest.approx(cf.d, abs=0.02)
    l1 = float(np.abs(rho.values - cf.cell_averages(rho.edges)).sum() * rho.dx)
    assert l1 < 0.02
    assert r.energy == pytest.approx(F_INF_HALF, abs=5e-3)
    assert r.converged and r.max_residual <= 1e-4
    assert r.lagrange == pytest.approx(pt.variational_constant(0.5, 0.5) + 0.5 * float(rho.values @ pt.gauss_cell_average(Field(0.5, 0.5), rho.edges[:-1], rho.edges[1:])) * rho.dx, abs=1e-3)
    # compact support well inside the domain
    assert rho.support(1e-9)[1] < hi


def test_solver_grid_stable(solved_half):
    r, hi = solved_half
    r2 = solve_equilibrium(Field(0.5, 0.5), hi, 4000)
    assert abs(r2.energy - r.energy) < 1e-3


def test_solver_unsaturated_case():
    r = equilibrium_energy_F(0.9, 0.9, 2.0, math.inf, dx=0.02)
    assert r.energy == pytest.approx(pt.F_inf_closed(0.9, 0.9, 2.0), abs=5e-3)


def test_solver_strict_failure():
    with pytest.raises(EquilibriumError) as exc:
        solve_equilibrium(Field(0.5, 0.5), 8.0, 400, max_iter=1, polish=False, tol=1e-12)
    assert exc.value.residuals


def test_solver_rejects_short_domain():
    with pytest.raises(ValueError):
        solve_equilibrium(Field(0.5, 0.5), 0.5, 100)


def test_capped_energy_stabilises():
    e5 = equilibrium_energy(0.5, 0.5, 1.0, 5.0)
    assert abs(e5 - F_INF_HALF) < 5e-3
    ys = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0]
    vals = [equilibrium_energy(0.5, 0.5, 1.0, y) for y in ys]
    assert all(x <= y + 1e-7 for x, y in zip(vals, vals[1:]))


def test_capped_grid_has_cap_node():
    r = equilibrium_energy_F(0.5, 0.5, 1.0, 1.234, dx=0.01)
    assert np.min(np.abs(r.density.edges - 1.234)) < 1e-12
