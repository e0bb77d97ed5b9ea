import numpy as np
import pytest

from adiaspec.counterdiabatic import (
    DressingBuilder,
    build_dressing,
    dressed_projector,
    dressing_defect,
)
from adiaspec.filters import FilterFunction
from adiaspec.interactions import free_rotation_schedule, frozen_schedule, tfim_schedule
from adiaspec.lattice import lattice_preset
from adiaspec.operators import sigma_x, sigma_z, spectral_norm
from adiaspec.spectral import LowestK, diagonalize_and_patch

W = FilterFunction(0.9)


def test_time_independent_schedule_gives_trivial_dressing():
    lat = lattice_preset("chain:3")
    sch = frozen_schedule(tfim_schedule(lat, 1.5, 1.5).eval(0.0, 0))
    d = build_dressing(sch, lat.sites, 0.5, 2, 0.1, W, LowestK(1))
    for a in d.a_ops:
        assert spectral_norm(a) < 1e-12
    assert np.abs(d.u - np.eye(8)).max() < 1e-12


def test_two_level_first_order_generator():
    # A_1 = theta' / (2 dE) * (cos(theta) sx - sin(theta) sz), dE = 2
    lat = lattice_preset("chain:1")
    th1 = np.pi / 3
    sch = free_rotation_schedule(lat, 0.0, th1, "linear")
    s = 0.4
    d = build_dressing(sch, (0,), s, 1, 0.05, FilterFunction(1.0), LowestK(1))
    th, thp, de = th1 * s, th1, 2.0
    expected = thp / (2 * de) * (np.cos(th) * sigma_x - np.sin(th) * sigma_z)
    assert np.abs(d.a_ops[0] - expected).max() < 1e-10
    assert d.residuals[0] <= 1e-6


def test_orders_residuals_small_on_tfim():
    lat = lattice_preset("chain:4")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    d = build_dressing(sch, lat.sites, 0.5, 2, 0.1, W, LowestK(1))
    assert all(r <= 1e-6 for r in d.residuals)
    for a in d.a_ops:
        assert np.abs(a - a.conj().T).max() < 1e-10
    assert np.abs(d.u @ d.u.conj().T - np.eye(16)).max() < 1e-10


def test_dressed_projector_properties():
    lat = lattice_preset("chain:4")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    d = build_dressing(sch, lat.sites, 0.5, 0, 0.1, W, LowestK(1))
    assert np.abs(dressed_projector(d) - d.patch.projector).max() < 1e-12

    d1 = build_dressing(sch, lat.sites, 0.5, 1, 0.1, W, LowestK(1))
    pi = dressed_projector(d1)
    assert np.abs(pi @ pi - pi).max() < 1e-10
    assert np.abs(pi - pi.conj().T).max() < 1e-10
    assert np.trace(pi).real == pytest.approx(np.trace(d1.patch.projector).real)


def test_dressed_projector_is_order_eps_from_bare():
    lat = lattice_preset("chain:4")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    builder = DressingBuilder(sch, lat.sites, 1, W, LowestK(1))
    dists = []
    for eps in (0.2, 0.1, 0.05):
        d = builder.build(0.5, eps)
        dists.append(spectral_norm(dressed_projector(d) - d.patch.projector))
    assert dists[0] / dists[1] == pytest.approx(2.0, abs=0.2)
    assert dists[1] / dists[2] == pytest.approx(2.0, abs=0.2)


def test_defect_without_dressing_measures_patch_motion():
    lat = lattice_preset("chain:4")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    eps, s, h = 0.1, 0.5, 1e-3
    defect = dressing_defect(sch, lat.sites, s, 0, eps, W, LowestK(1), h_s=h)
    _, pp = diagonalize_and_patch(sch.hamiltonian(lat.sites, s + h), LowestK(1))
    _, pm = diagonalize_and_patch(sch.hamiltonian(lat.sites, s - h), LowestK(1))
    pdot_norm = spectral_norm((pp.projector - pm.projector) / (2 * h))
    assert defect == pytest.approx(eps * pdot_norm, rel=1e-4)


def test_defect_scaling_orders():
    lat = lattice_preset("chain:4")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    eps_grid = [0.32, 0.16, 0.08, 0.04]
    for n in (1, 2):
        builder = DressingBuilder(sch, lat.sites, n, W, LowestK(1))
        defects = [builder.defect(0.5, e) for e in eps_grid]
        slope = np.polyfit(np.log(eps_grid), np.log(defects), 1)[0]
        assert abs(slope - (n + 1)) <= 0.2
        assert slope >= n + 0.8


def test_endpoint_triviality_with_bump_schedule():
    lat = lattice_preset("chain:4")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    builder = DressingBuilder(sch, lat.sites, 2, W, LowestK(1))
    for s_end in (0.0, 1.0):
        d = builder.build(s_end, 0.1)
        for a in d.a_ops:
            assert spectral_norm(a) <= 1e-8
        assert np.abs(d.u - np.eye(16)).max() <= 1e-7


def test_counter_drive_reproduces_defect():
    lat = lattice_preset("chain:4")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    builder = DressingBuilder(sch, lat.sites, 2, W, LowestK(1))
    eps = 0.1
    d = builder.build(0.5, eps)
    r = builder.counter_drive(d)
    pi = dressed_projector(d)
    defect = builder.defect(0.5, eps)
    assert spectral_norm(r @ pi - pi @ r) == pytest.approx(defect, rel=1e-3)
    # the drive itself is of the next order in eps
    r2 = builder.counter_drive(builder.build(0.5, eps / 2))
    assert spectral_norm(r) / spectral_norm(r2) == pytest.approx(8.0, rel=0.3)


def test_order_caps_and_smoothness_guard():
    lat = lattice_preset("chain:2")
    sch = tfim_schedule(lat, 2.0, 1.5, "bump")
    with pytest.raises(ValueError):
        DressingBuilder(sch, lat.sites, 5, W, LowestK(1))
    sch.smoothness_m = 1
    with pytest.raises(ValueError):
        DressingBuilder(sch, lat.sites, 2, W, LowestK(1))
