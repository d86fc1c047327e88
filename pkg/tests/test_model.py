import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from dsfkit import InvalidModelError, PRESETS, SizeLimitError, SpinChainModel, build_nn_xxz, build_nnn_xxz, preset_model
from dsfkit.model import PauliSumOperator, ground_energy_dense, hamiltonian_dense, hamiltonian_sparse


def test_nn_term_counts_and_coefficients():
    m = build_nn_xxz(2, 1.0, 1.0)
    assert len(m.terms) == 3
    assert all(t.coefficient == 0.5 for t in m.terms)
    m0 = build_nn_xxz(2, 1.0, 0.0)
    assert sorted(t.axes for t in m0.terms) == ["XX", "YY"]
    assert len(build_nn_xxz(50, 1.0, 1.0).terms) == 147


def test_nnn_term_counts_and_coefficients():
    m = build_nnn_xxz(3, 1.0, 0.145, 0.095, 0.145)
    nn = [t for t in m.terms if t.site_indices[1] - t.site_indices[0] == 1]
    nnn = [t for t in m.terms if t.site_indices[1] - t.site_indices[0] == 2]
    assert (len(nn), len(nnn)) == (6, 3)
    cs = preset_model("cscox3", 50)
    zz = {t.coefficient for t in cs.terms if t.axes == "ZZ" and t.site_indices[1] - t.site_indices[0] == 2}
    assert len(zz) == 1 and zz.pop() == pytest.approx(-0.0475, abs=1e-15)
    ising = build_nnn_xxz(4, 1.0, 0.0, 0.0, 0.0)
    assert {t.axes for t in ising.terms} == {"ZZ"}
    n = 7
    assert len(build_nnn_xxz(n, 1.0, 0.3, 0.2, 0.4).terms) == 3 * (n - 1) + 3 * (n - 2)


def test_invalid_models():
    with pytest.raises(InvalidModelError):
        build_nn_xxz(1)
    with pytest.raises(InvalidModelError):
        build_nnn_xxz(2, 1.0, 0.5, 0.1, 0.1)
    with pytest.warns(UserWarning):
        build_nnn_xxz(4, 1.0, 1.5, 0.0, 0.0)


def test_dense_energies():
    assert ground_energy_dense(build_nn_xxz(2, 1, 1)) == pytest.approx(-1.5, abs=1e-12)
    assert ground_energy_dense(build_nn_xxz(2, 1, 0)) == pytest.approx(-1.0, abs=1e-12)
    ref, _ = O.dense_ground(O.xxz_dense(8, 1, 1))
    assert ground_energy_dense(build_nn_xxz(8, 1, 1)) == pytest.approx(ref, abs=1e-10)
    with pytest.raises(SizeLimitError):
        ground_energy_dense(build_nn_xxz(15))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_match_kron_oracle(name):
    p = PRESETS[name]
    H = O.xxz_dense(7, 1.0, p.epsilon, p.jp_ratio, p.epsilonp, p.nnn_form)
    assert np.array_equal(hamiltonian_dense(preset_model(name, 7)), H) or np.abs(
        hamiltonian_dense(preset_model(name, 7)) - H
    ).max() < 1e-14


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_hermitian_and_u1(name):
    H = hamiltonian_dense(preset_model(name, 8))
    assert np.array_equal(H, H.conj().T)
    Sz = sum(O.site_op(8, i, O.SZ) for i in range(8))
    assert np.abs(H @ Sz - Sz @ H).max() < 1e-12


def test_isotropic_su2():
    H = hamiltonian_dense(build_nn_xxz(6, 1.0, 1.0))
    for P in (O.SX, O.SY, O.SZ):
        tot = sum(O.site_op(6, i, P) for i in range(6))
        assert np.abs(H @ tot - tot @ H).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(3, 7),
    J=st.floats(0.1, 2.0),
    eps=st.floats(0.0, 1.0),
    jp=st.floats(-0.5, 0.5),
    epsp=st.floats(0.0, 1.0),
)
def test_matvec_matches_sparse_and_text_roundtrip(n, J, eps, jp, epsp):
    m = build_nnn_xxz(n, J, eps, jp, epsp)
    op = PauliSumOperator(m)
    v = np.random.default_rng(n).standard_normal(2**n) + 0j
    assert np.allclose(op.matvec(v), hamiltonian_sparse(m) @ v, atol=1e-12)
    back = SpinChainModel.from_text(m.to_text())
    assert back.terms == m.terms and back.n == m.n
