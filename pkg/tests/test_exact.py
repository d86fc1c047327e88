import numpy as np
import pytest

import oracles as O
from dsfkit import PRESETS, SizeLimitError, StructuralError, build_nn_xxz, build_nnn_xxz, build_plan, preset_model
from dsfkit.circuit import inverse_gates
from dsfkit.exact import (
    Statevector,
    apply_gates,
    apply_one_site,
    exact_evolve,
    expect_pauli,
    expect_pauli_all,
    fidelity,
    lanczos_ground_state,
    trotter_evolve,
)


def random_state(n, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return Statevector(n, v / np.linalg.norm(v))


def test_lanczos_energies():
    _, e2 = lanczos_ground_state(build_nn_xxz(2, 1, 1))
    assert e2 == pytest.approx(-1.5, abs=1e-12)
    _, e8 = lanczos_ground_state(build_nn_xxz(8, 1, 1), tol=1e-10)
    assert e8 == pytest.approx(O.dense_ground(O.xxz_dense(8))[0], abs=1e-8)
    _, e12 = lanczos_ground_state(build_nn_xxz(12, 1, 0))
    assert e12 == pytest.approx(O.xx_ground_energy(12), abs=1e-9)


def test_lanczos_residual_and_determinism():
    m = preset_model("cscox3", 10)
    a, e = lanczos_ground_state(m)
    b, _ = lanczos_ground_state(m)
    assert np.array_equal(a.data, b.data)
    from dsfkit.model import hamiltonian_sparse

    H = hamiltonian_sparse(m)
    assert np.linalg.norm(H @ a.data - e * a.data) < 1e-8


def test_exact_evolve_matches_expm():
    import scipy.linalg

    m = build_nn_xxz(6, 1, 1)
    psi = random_state(6)
    out = exact_evolve(m, psi, 0.6)
    ref = scipy.linalg.expm(-0.6j * O.xxz_dense(6)) @ psi.data
    assert np.abs(out.data - ref).max() < 1e-12
    assert np.array_equal(exact_evolve(m, psi, 0.0).data, psi.data)
    with pytest.raises(SizeLimitError):
        exact_evolve(build_nn_xxz(15), Statevector.basis([0] * 15), 0.1)


def test_pure_zz_is_diagonal_and_trotter_exact():
    m = build_nnn_xxz(5, 1.0, 0.0, 0.0, 0.0)
    psi = Statevector.basis([0, 1, 1, 0, 1])
    out = exact_evolve(m, psi, 1.3)
    assert np.allclose(out.probabilities(), psi.probabilities(), atol=1e-14)
    r = random_state(5, 3)
    t = trotter_evolve(m, r, build_plan(m, 0.7, 1, 2))
    assert np.abs(t.data - exact_evolve(m, r, 0.7).data).max() < 1e-12


def _step_error(model, dt, order, psi):
    t = trotter_evolve(model, psi, build_plan(model, dt, 1, order))
    return np.linalg.norm(t.data - exact_evolve(model, psi, dt).data)


def test_per_step_error_scaling():
    psi = random_state(6, 1)
    heis = build_nn_xxz(6, 1, 1)
    ratio2 = _step_error(heis, 0.6, 2, psi) / _step_error(heis, 0.3, 2, psi)
    assert 6.0 < ratio2 < 10.0
    fid = fidelity(trotter_evolve(heis, psi, build_plan(heis, 0.6, 1, 2)), exact_evolve(heis, psi, 0.6))
    assert 0.98 < fid < 1.0
    cs = preset_model("cscox3", 6)
    ratio1 = _step_error(cs, 0.8, 1, psi) / _step_error(cs, 0.4, 1, psi)
    assert 3.0 < ratio1 < 5.0


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_unitarity_and_sz_conservation(name):
    m = preset_model(name, 8)
    psi = Statevector.basis([0, 1, 1, 0, 1, 0, 0, 1])
    psi = Statevector(8, psi.data + random_state(8, 2).data * 0)  # basis state keeps Sz sharp
    sz0 = expect_pauli_all(psi, "Z").sum()
    for out in (trotter_evolve(m, psi, build_plan(m, 0.5, 3, 2)), exact_evolve(m, psi, 1.5)):
        assert abs(out.norm() - 1) < 1e-10
        assert abs(expect_pauli_all(out, "Z").sum() - sz0) < 1e-8


def test_palindrome_inverse():
    m = preset_model("cscox3", 7)
    plan = build_plan(m, 0.4, 1, 2)
    gates = list(plan.step_gates)
    sets = [sorted(g.sites for g in layer) for layer in plan.layers]
    assert sets == sets[::-1]
    psi = random_state(7, 4)
    back = apply_gates(apply_gates(psi.copy(), gates), inverse_gates(gates))
    assert np.abs(back.data - psi.data).max() < 1e-10


def test_nnn_gates_use_swaps():
    plan = build_plan(preset_model("cscox3", 6), 0.8, 1, 1)
    assert all(abs(g.sites[1] - g.sites[0]) == 1 for g in plan.step_gates if g.two_qubit)
    assert any(g.kind == "swap" for g in plan.step_gates)


def test_plan_model_mismatch():
    plan = build_plan(preset_model("kcuf3", 6), 0.6, 1, 2)
    with pytest.raises(StructuralError):
        trotter_evolve(preset_model("xx", 6), random_state(6), plan)


def test_expectations():
    z = Statevector.basis([0] * 4)
    assert all(expect_pauli(z, s, "Z") == 1 for s in range(4))
    plus = z.copy()
    apply_one_site(plus, np.array([[1, 1], [1, -1]]) / np.sqrt(2), 2)
    assert expect_pauli(plus, 2, "X") == pytest.approx(1.0, abs=1e-14)
    gs, _ = lanczos_ground_state(build_nn_xxz(8, 1, 1))
    assert np.abs(expect_pauli_all(gs, "Z")).max() < 1e-8
