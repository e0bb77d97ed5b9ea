import numpy as np
import pytest

from adiaspec.filters import FilterFunction
from adiaspec.interactions import Interaction, tfim_schedule
from adiaspec.lattice import lattice_preset
from adiaspec.linresp import (
    ResponseSetup,
    ground_expectation,
    kubo_commutator,
    kubo_time_integral,
    response_residual,
    switched_evolution,
)
from adiaspec.operators import LocalOperator, sigma_x, sigma_y, sigma_z
from adiaspec.spectral import GapError, LowestK

W = FilterFunction(1.0)


def _single(op):
    return Interaction({frozenset({0}): LocalOperator((0,), op)})


def _tfim_setup(L, g=1.5):
    lat = lattice_preset(f"chain:{L}")
    sch = tfim_schedule(lat, g, g)
    h_init = sch.eval(0.0, 0)
    v = Interaction({frozenset({x}): LocalOperator((x,), sigma_z) for x in lat.sites})
    j = LocalOperator((L // 2,), sigma_z)
    return lat, h_init, v, j


def test_two_level_commutator_closed_form():
    # H = sz, V = sx: d<sx>/dalpha at the ground state of sz + a sx is -1,
    # while <sy> has no first-order response
    h = _single(sigma_z)
    v = _single(sigma_x)
    assert kubo_commutator(h, v, LocalOperator((0,), sigma_x), (0,), W) == pytest.approx(-1.0)
    assert kubo_commutator(h, v, LocalOperator((0,), sigma_y), (0,), W) == pytest.approx(0.0, abs=1e-14)


def test_two_level_against_derivative_oracle():
    h = _single(sigma_z)
    v = _single(sigma_x)
    f = kubo_commutator(h, v, LocalOperator((0,), sigma_x), (0,), W)
    a = 1e-5
    vals = []
    for sign in (+1, -1):
        evals, evecs = np.linalg.eigh(sigma_z + sign * a * sigma_x)
        g = evecs[:, 0]
        vals.append(float(np.real(g.conj() @ sigma_x @ g)))
    assert f == pytest.approx((vals[0] - vals[1]) / (2 * a), abs=1e-6)


def test_identity_and_energy_have_no_response():
    lat, h_init, v, _ = _tfim_setup(4)
    ident = LocalOperator((), np.eye(1, dtype=complex))
    assert kubo_commutator(h_init, v, ident, lat.sites, FilterFunction(0.9)) == pytest.approx(0.0, abs=1e-14)
    # J = the assembled initial Hamiltonian as one big term
    from adiaspec.interactions import assemble_hamiltonian

    h_full = assemble_hamiltonian(h_init, lat.sites)
    j_h = LocalOperator(lat.sites, h_full)
    assert abs(kubo_commutator(h_init, v, j_h, lat.sites, FilterFunction(0.9))) <= 1e-10


def test_time_integral_two_level_closed_form():
    h = _single(sigma_z)
    v = _single(sigma_x)
    j = LocalOperator((0,), sigma_x)
    deltas = [0.2, 0.1, 0.05]
    res = kubo_time_integral(h, v, j, (0,), deltas)
    # regulated integral in closed form: -4 / (delta^2 + 4)
    for d, val in zip(res.deltas, res.values):
        assert val == pytest.approx(-4.0 / (d**2 + 4.0), abs=1e-12)
    assert res.limit == pytest.approx(-1.0, abs=1e-12)
    f = kubo_commutator(h, v, j, (0,), W)
    assert abs(res.limit - f) <= 1e-8
    assert res.richardson == pytest.approx(-1.0, abs=1e-4)


def test_time_integral_commuting_perturbation_vanishes():
    h = _single(sigma_z)
    v = _single(sigma_z)  # commutes with H, block-off-diagonal part is zero
    j = LocalOperator((0,), sigma_x)
    res = kubo_time_integral(h, v, j, (0,), [0.1, 0.05])
    assert np.abs(res.values).max() == 0.0
    assert res.limit == 0.0


def test_time_integral_rejects_bad_delta():
    h = _single(sigma_z)
    with pytest.raises(ValueError):
        kubo_time_integral(h, _single(sigma_x), LocalOperator((0,), sigma_x), (0,), [0.1, -0.2])


def test_formula_equality_on_tfim():
    lat, h_init, v, j = _tfim_setup(4)
    w = FilterFunction(0.9)
    f = kubo_commutator(h_init, v, j, lat.sites, w)
    res = kubo_time_integral(h_init, v, j, lat.sites, [0.1, 0.05, 0.025])
    assert abs(res.limit - f) <= 1e-6
    assert f != 0.0


def test_switched_evolution_tracks_first_order():
    lat, h_init, v, j = _tfim_setup(3)
    w = FilterFunction(0.9)
    alpha, eps = 0.05, 0.1
    setup = ResponseSetup(h_init, v, j, alpha, eps, lat.sites, step=2e-3)
    out = response_residual(setup, w)
    assert out["omega_ground"] == pytest.approx(0.0, abs=1e-12)
    # driven value approaches omega_0 + alpha f at rate O(eps + alpha^2)
    assert abs(out["residual"]) <= 2.0 * (eps + alpha)
    # identity observable stays exactly normalized
    ident = LocalOperator((), np.eye(1, dtype=complex))
    setup_i = ResponseSetup(h_init, v, ident, alpha, eps, lat.sites, step=2e-3)
    assert switched_evolution(setup_i) == pytest.approx(1.0, abs=1e-10)


def test_switched_evolution_alpha_zero_is_static():
    lat, h_init, v, j = _tfim_setup(3)
    setup = ResponseSetup(h_init, v, j, 0.0, 0.2, lat.sites, step=2e-3)
    om = switched_evolution(setup)
    om0 = ground_expectation(h_init, j, lat.sites)
    assert om == pytest.approx(om0, abs=1e-10)


def test_setup_validation():
    lat, h_init, v, j = _tfim_setup(3)
    with pytest.raises(ValueError):
        ResponseSetup(h_init, v, j, 0.5, 0.1, lat.sites, s_trunc=-5.0)
    # gap closure on the sigma grid: enormous coupling flips the patch
    lat2 = lattice_preset("chain:2")
    h2 = Interaction({frozenset({x}): LocalOperator((x,), sigma_z) for x in lat2.sites})
    v2 = Interaction({frozenset({x}): LocalOperator((x,), -sigma_z) for x in lat2.sites})
    with pytest.raises(GapError):
        ResponseSetup(h2, v2, LocalOperator((0,), sigma_x), 1.0, 0.1, lat2.sites,
                      selector=LowestK(1))


def test_residual_decreases_with_epsilon():
    lat, h_init, v, j = _tfim_setup(3)
    w = FilterFunction(0.9)
    rs = []
    for eps in (0.4, 0.2, 0.1):
        setup = ResponseSetup(h_init, v, j, 0.05, eps, lat.sites, step=2e-3)
        rs.append(abs(response_residual(setup, w)["residual"]))
    assert rs[0] > rs[1] > rs[2]
