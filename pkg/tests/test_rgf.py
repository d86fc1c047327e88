import io
import warnings

import numpy as np
import pytest

import oracles as O
from dsfkit import MPS, PRESETS, RgfGrid, StructuralError, build_plan, preset_model, run_protocol
from dsfkit.circuit import PAULI, forward_lightcone
from dsfkit.exact import Statevector, lanczos_ground_state
from dsfkit.rgf import center_site, mirror_symmetrize, oracle_rgf, oracle_rgf_grid, perturbation_unitary


def test_perturbation_unitary_algebra():
    for ax in "XYZ":
        u = perturbation_unitary(ax)
        assert np.abs(u.conj().T @ u - np.eye(2)).max() < 1e-12
        assert np.abs(u @ u + 1j * PAULI[ax]).max() < 1e-15
    uz = perturbation_unitary("Z")
    assert np.allclose(uz, np.diag([1 - 1j, 1 + 1j]) / np.sqrt(2))
    assert np.allclose(perturbation_unitary("X") @ [1, 0], np.array([1, -1j]) / np.sqrt(2))


def test_center_site():
    assert center_site(8) == 3 and center_site(50) == 24 and center_site(7) == 3


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_first_column_zero(name, preset_runs12):
    grid = preset_runs12[name][2]
    assert np.abs(grid.values[:, 0]).max() < 1e-8
    assert np.abs(grid.values).max() <= 1 + 1e-12


def test_protocol_matches_oracle_heisenberg8(heis8):
    model, gs, _ = heis8
    plan = build_plan(model, 0.3, 8, 2)
    grid = run_protocol(gs, model, plan, exact_evolution=True)
    ref = oracle_rgf_grid(model, "Z", "Z", grid.jc, grid.times, units="pauli")
    assert np.abs(grid.values - ref).max() < 1e-8


def test_oracle_against_kron_expm(heis8):
    model, _, _ = heis8
    t = [0.0, 0.6, 1.2]
    ref = O.dense_rgf(O.xxz_dense(8), 8, "Z", "Z", 3, t)
    assert np.abs(oracle_rgf_grid(model, "Z", "Z", 3, t) - ref).max() < 1e-12
    assert oracle_rgf(model, "Z", "Z", 4, 3, 0.0) == 0
    assert abs(oracle_rgf(model, "Z", "X", 3, 3, 0.0)) < 1e-12
    # reference table entry at i = jc + 1, t = 0.6
    assert oracle_rgf(model, "Z", "Z", 4, 3, 0.6) == pytest.approx(ref[4, 1], abs=1e-12)


def test_cross_channel_against_oracle():
    model = preset_model("two_soliton", 8)
    gs, _ = lanczos_ground_state(model)
    plan = build_plan(model, 0.4, 6, 1)
    grid = run_protocol(gs, model, plan, "X", "X", exact_evolution=True)
    ref = oracle_rgf_grid(model, "X", "X", grid.jc, grid.times, units="pauli")
    assert np.abs(grid.values - ref).max() < 1e-8


def test_light_cone_is_strict():
    from dsfkit.exact import expect_pauli_all, trotter_evolve

    model = preset_model("kcuf3", 12)
    gs, _ = lanczos_ground_state(model)
    plan = build_plan(model, 0.6, 3, 2)
    grid = run_protocol(gs, model, plan, subtract_background=False)
    jc = grid.jc
    for k in range(4):
        free = expect_pauli_all(trotter_evolve(model, gs, plan.with_steps(k)), "Z")
        cone = forward_lightcone(list(plan.step_gates) * k, jc)
        outside = [j for j in range(12) if j not in cone]
        assert all(j in outside for j in range(12) if abs(j - jc) > 2 * k + 2)
        if outside:
            assert np.abs(grid.values[outside, k] - free[outside]).max() < 1e-12


def test_background_subtraction_and_norm_check():
    model = preset_model("kcuf3", 6)
    plan = build_plan(model, 0.6, 2, 2)
    psi = Statevector.basis([0, 0, 1, 0, 1, 1])
    grid = run_protocol(psi, model, plan)
    assert grid.meta["background_subtracted"] == 1
    bad = Statevector(6, psi.data * 1.1)
    with pytest.raises(StructuralError):
        run_protocol(bad, model, plan)


def test_mps_engine_matches_exact(heis8):
    model, gs, _ = heis8
    plan = build_plan(model, 0.6, 6, 2)
    a = run_protocol(gs, model, plan)
    b = run_protocol(MPS.from_statevector(gs, 256, 1e-14), model, plan, truncation_tol=1e-14)
    assert np.abs(a.values - b.values).max() < 1e-10


def test_mirror_symmetrize_properties(heis8):
    model, gs, _ = heis8
    plan = build_plan(model, 0.6, 10, 2)
    grid = run_protocol(gs, model, plan)
    once = mirror_symmetrize(grid)
    twice = mirror_symmetrize(once)
    assert np.abs(once.values - twice.values).max() < 1e-15
    sym = RgfGrid(once.values, grid.dt, grid.jc, "Z", "Z", "pauli")
    assert np.abs(mirror_symmetrize(sym).values - sym.values).max() < 1e-15
    exact = run_protocol(gs, model, plan, exact_evolution=True)
    # both grids sit within the Trotter error of the exact one
    trotter_scale = np.abs(grid.values - exact.values).max()
    assert np.abs(once.values - exact.values)[:, :].max() <= 2 * trotter_scale + 1e-12
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        odd = RgfGrid(np.zeros((7, 3)), 0.6, 3, "Z", "Z")
        assert mirror_symmetrize(odd) is odd
        assert w


def test_csv_roundtrip(heis8):
    model, gs, _ = heis8
    grid = run_protocol(gs, model, build_plan(model, 0.6, 4, 2))
    buf = io.StringIO()
    grid.write_csv(buf)
    back = RgfGrid.read_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.values, grid.values)
    assert (back.dt, back.jc, back.alpha, back.beta, back.units) == (grid.dt, grid.jc, "Z", "Z", "pauli")
    out = io.StringIO()
    back.write_csv(out)
    assert out.getvalue() == buf.getvalue()
    with pytest.raises((StructuralError, ValueError)):
        RgfGrid.read_csv(io.StringIO("n,3\ndata\n1,2\n"))


def test_zero_steps():
    model = preset_model("xx", 6)
    gs, _ = lanczos_ground_state(model)
    grid = run_protocol(gs, model, build_plan(model, 0.6, 0, 2))
    assert grid.values.shape == (6, 1) and np.abs(grid.values).max() < 1e-12


@pytest.mark.parametrize("ab", ["XZ", "ZX", "XY"])
def test_mixed_channels_against_oracle(ab):
    model = preset_model("two_soliton", 8)
    gs, _ = lanczos_ground_state(model)
    plan = build_plan(model, 0.4, 6, 1)
    grid = run_protocol(gs, model, plan, ab[0], ab[1], exact_evolution=True)
    ref = oracle_rgf_grid(model, ab[0], ab[1], grid.jc, grid.times, units="pauli")
    assert np.abs(grid.values - ref).max() < 1e-8
