import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from dsfkit import AliasingError, DsfGrid, NormalizationError, RgfGrid, build_plan, preset_model, run_protocol
from dsfkit.exact import lanczos_ground_state
from dsfkit.rgf import mirror_symmetrize
from dsfkit.spectrum import (
    dsf_from_rgf,
    dsf_pipeline,
    line_scan,
    max1_normalize,
    omega_axis,
    q_axis,
    resolution_report,
    spacetime_fourier,
    sum_rule_integral,
    sum_rule_normalize,
)


def test_axes():
    qs = q_axis(50)
    assert qs[0] > -np.pi and qs[-1] == pytest.approx(np.pi)
    assert np.allclose(np.diff(qs), 2 * np.pi / 50, atol=1e-15)
    assert np.argmin(np.abs(qs - np.pi)) == 49
    ws = omega_axis(21, 0.6)
    assert ws[0] >= -np.pi / 0.6 - 1e-12 and ws[-1] < np.pi / 0.6
    assert np.allclose(np.diff(ws), 2 * np.pi / (21 * 0.6), atol=1e-12)
    assert np.allclose(omega_axis(20, 0.6)[[0, 10]], [-np.pi / 0.6, 0.0], atol=1e-12)


def test_zero_grid():
    g = RgfGrid(np.zeros((6, 9)), 0.5, 2, "Z", "Z")
    assert np.abs(spacetime_fourier(g).values).max() == 0


def test_separable_cosine():
    n, samples, dt = 8, 16, 0.5
    ws = omega_axis(samples, dt)
    w0 = ws[samples // 2 + 3]
    vals = np.zeros((n, samples), dtype=complex)
    vals[3] = np.cos(w0 * dt * np.arange(samples))
    gq = spacetime_fourier(RgfGrid(vals, dt, 3, "Z", "Z"))
    mag = np.abs(gq.values)
    peaks = set(np.flatnonzero(mag[0] > 1e-9))
    assert peaks == {samples // 2 + 3, samples // 2 - 3}
    assert np.allclose(mag, mag[0][None, :], atol=1e-12)


def test_transform_matches_naive_loop():
    model = preset_model("xx", 8)
    gs, _ = lanczos_ground_state(model)
    grid = run_protocol(gs, model, build_plan(model, 0.6, 11, 2), exact_evolution=True)
    gq = spacetime_fourier(grid)
    ref = O.naive_transform(grid.values, grid.jc, grid.dt, gq.q_axis, gq.omega_axis)
    assert np.abs(gq.values - ref).max() < 1e-12


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 16), samples=st.integers(1, 32), seed=st.integers(0, 1000))
def test_linearity_parseval_and_naive(n, samples, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    b = rng.standard_normal((n, samples))
    jc = int(rng.integers(0, n))
    ga, gb = RgfGrid(a, 0.3, jc, "Z", "Z"), RgfGrid(b, 0.3, jc, "Z", "Z")
    fa, fb = spacetime_fourier(ga).values, spacetime_fourier(gb).values
    fab = spacetime_fourier(RgfGrid(2 * a - 3 * b, 0.3, jc, "Z", "Z")).values
    assert np.abs(fab - (2 * fa - 3 * fb)).max() < 1e-9
    assert np.sum(np.abs(fa) ** 2) == pytest.approx(n * samples * np.sum(np.abs(a) ** 2), rel=1e-8)
    if n * samples <= 64:
        ref = O.naive_transform(a, jc, 0.3, q_axis(n), omega_axis(samples, 0.3))
        assert np.abs(fa - ref).max() < 1e-12


@settings(max_examples=15, deadline=None)
@given(half=st.integers(1, 8), samples=st.integers(2, 20), seed=st.integers(0, 1000))
def test_mirror_commutes_with_transform(half, samples, seed):
    n = 2 * half
    rng = np.random.default_rng(seed)
    grid = RgfGrid(rng.standard_normal((n, samples)) + 0j, 0.4, n // 2 - 1, "Z", "Z")
    sym = spacetime_fourier(mirror_symmetrize(grid)).values
    raw = spacetime_fourier(grid).values
    qs = q_axis(n)
    mirror_idx = [int(np.argmin(np.abs(np.angle(np.exp(1j * (qs + q)))))) for q in qs]
    assert np.abs(sym - 0.5 * (raw + raw[mirror_idx])).max() < 1e-10


def test_dsf_prefactor_and_real_input():
    gq = spacetime_fourier(RgfGrid(np.zeros((4, 5)), 0.5, 1, "Z", "Z", "spin"))
    gq.values = np.full(gq.values.shape, 2.0 + 0j)
    assert np.abs(dsf_from_rgf(gq).values).max() == 0
    gq.values = np.full(gq.values.shape, 1j)
    d = dsf_from_rgf(gq)
    assert np.allclose(d.values[:, gq.omega_axis > 0], -1 / np.pi)
    assert np.all(d.values[:, gq.omega_axis <= 0] == 0)
    with pytest.raises(ValueError):
        dsf_from_rgf(gq, -1.0)


def test_pauli_units_converted():
    vals = np.random.default_rng(1).standard_normal((4, 6)) + 0j
    a = dsf_from_rgf(spacetime_fourier(RgfGrid(vals, 0.5, 1, "Z", "Z", "pauli")))
    b = dsf_from_rgf(spacetime_fourier(RgfGrid(vals / 4, 0.5, 1, "Z", "Z", "spin")))
    assert np.abs(a.values - b.values).max() < 1e-15


def _heis8_channels(mirror=True):
    model = preset_model("kcuf3", 8)
    gs, _ = lanczos_ground_state(model)
    plan = build_plan(model, 0.6, 20, 2)
    return {
        ab: dsf_pipeline(run_protocol(gs, model, plan, ab[0], ab[1]), mirror=mirror)
        for ab in ("XX", "YY", "ZZ")
    }


def test_sum_rule_paths_agree_and_idempotent():
    ch = _heis8_channels()
    full = sum_rule_normalize(ch)
    assert sum_rule_integral(full) == pytest.approx(0.75, abs=1e-10)
    z3 = sum_rule_normalize(ch["ZZ"], isotropic=True)
    assert sum_rule_integral(z3, isotropic=True) == pytest.approx(0.75, abs=1e-10)
    assert np.abs(z3.values - full["ZZ"].values).max() < 1e-6
    again = sum_rule_normalize(z3, isotropic=True)
    assert np.abs(again.values - z3.values).max() < 1e-15
    assert float(again.meta["sum_rule_scale"]) == pytest.approx(float(z3.meta["sum_rule_scale"]), rel=1e-14)
    with pytest.raises(NormalizationError):
        sum_rule_integral(ch["ZZ"])
    with pytest.raises(NormalizationError):
        sum_rule_normalize(ch["ZZ"].with_values(np.zeros_like(ch["ZZ"].values)), isotropic=True)


def test_line_scan_and_max1():
    d = _heis8_channels()["ZZ"]
    w, v, q = line_scan(d, np.pi)
    assert q == pytest.approx(np.pi) and np.array_equal(v, d.values[-1])
    _, _, q2 = line_scan(d, np.pi / 2 + 0.1)
    assert q2 == pytest.approx(np.pi / 2)
    with pytest.raises(ValueError):
        line_scan(d, 4.0)
    assert max1_normalize(d).values.max() == pytest.approx(1.0)


def test_dsf_csv_roundtrip():
    d = sum_rule_normalize(_heis8_channels()["ZZ"], isotropic=True)
    buf = io.StringIO()
    d.write_csv(buf)
    back = DsfGrid.read_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.values, d.values) and np.array_equal(back.omega_axis, d.omega_axis)
    assert back.normalization == "sum_rule" and back.channel == "ZZ"


def test_resolution_report():
    r = resolution_report(50, 20, 0.6)
    assert r.dk == pytest.approx(0.12566370614359174, abs=1e-14)
    assert r.product == pytest.approx(4 * np.pi**2 / 600, abs=1e-14)
    g = resolution_report(50, 20, 0.6, gates=3 * 50 * 20)
    assert g.product_from_gates == pytest.approx(g.product, abs=1e-12)
    d = resolution_report(50, 20, 0.6, depth=6 * 20)
    assert d.product_from_depth == pytest.approx(d.product, abs=1e-12)
    two = resolution_report(4, 10, 0.5, dimensionality=2, gates=6 * 16 * 10, depth=12 * 10, ny=4)
    assert two.product_from_gates == pytest.approx(two.product, rel=1e-12)
    assert two.product_from_depth == pytest.approx(two.product, rel=1e-12)
    with pytest.raises(AliasingError):
        resolution_report(50, 20, 1.5, e_max=3.0)
