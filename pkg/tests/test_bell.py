import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eraser_sim import ConfigError, NormError
from eraser_sim import bell
from eraser_sim.bell import QubitState, TwoQubitState

s2 = 1 / math.sqrt(2)
components = st.lists(st.floats(-1, 1), min_size=8, max_size=8).filter(
    lambda v: sum(x * x for x in v) > 1e-3)


def random_state(v) -> TwoQubitState:
    a = np.array(v[:4]) + 1j * np.array(v[4:])
    return TwoQubitState(a / np.linalg.norm(a))


def basis2(label: str) -> TwoQubitState:
    return QubitState.basis(label[0]).tensor(QubitState.basis(label[1]))


def test_cnot_examples():
    plus0 = QubitState.basis("+").tensor(QubitState.basis("0"))
    assert bell.apply_cnot(plus0).isclose(TwoQubitState([s2, 0, 0, s2]))
    assert bell.apply_cnot(basis2("00")).isclose(basis2("00"))
    assert bell.apply_cnot(basis2("10")).isclose(basis2("11"))
    assert bell.bell_state().isclose(TwoQubitState([s2, 0, 0, s2]))


def test_norm_errors():
    with pytest.raises(NormError):
        TwoQubitState([1, 1, 0, 0])
    with pytest.raises(NormError):
        QubitState([1, 1])
    with pytest.raises(NormError):
        TwoQubitState([1, 0])
    with pytest.raises(ConfigError):
        QubitState.basis("2")


def test_rewrite_in_diagonal_examples():
    assert np.allclose(bell.rewrite_in_diagonal(bell.bell_state()), [0.5, 0.5, 0.5, -0.5])
    # |0>|+> has the single coefficient on 0+
    assert np.allclose(bell.rewrite_in_diagonal(basis2("0+")), [1, 0, 0, 0])


@given(components)
def test_rewrite_is_involution(v):
    s = random_state(v)
    twice = bell.rewrite_in_diagonal(bell.rewrite_in_diagonal(s))
    assert np.allclose(twice, s.amplitudes, atol=1e-12)


def test_measure_examples():
    rng = np.random.default_rng(0)
    s = bell.bell_state()
    assert np.allclose(bell.outcome_probabilities(s, "idler", "diagonal"), [0.5, 0.5])
    label, post, p = bell.measure(s, "idler", "diagonal", rng)
    assert p == pytest.approx(0.5)
    expected = basis2("++") if label == "+" else basis2("--")
    assert post.isclose(expected)
    label, post, p = bell.measure(s, "idler", "computational", rng)
    assert post.isclose(basis2(label * 2))
    label, post, p = bell.measure(basis2("00"), "signal", "computational", rng)
    assert (label, p) == ("0", 1.0)
    with pytest.raises(ConfigError):
        bell.measure(s, "both", "diagonal", rng)
    with pytest.raises(ConfigError):
        bell.measure(s, "idler", "circular", rng)


@given(components, st.sampled_from(bell.SLOTS), st.sampled_from(bell.BASES), st.integers(0, 2**32 - 1))
def test_collapsed_state_normalized(v, slot, basis, seed):
    s = random_state(v)
    _, post, p = bell.measure(s, slot, basis, np.random.default_rng(seed))
    assert 0 < p <= 1 + 1e-12
    assert abs(np.vdot(post.amplitudes, post.amplitudes).real - 1) < 1e-12


def test_partial_trace_examples():
    assert np.allclose(bell.partial_trace_idler(bell.bell_state()).matrix, 0.5 * np.eye(2), atol=1e-15)
    psi = np.array([0.6, 0.8j])
    phi = np.array([s2, -s2])
    rho = bell.partial_trace_idler(TwoQubitState(np.kron(psi, phi))).matrix
    assert np.allclose(rho, np.outer(psi, psi.conj()), atol=1e-15)


def test_partial_trace_random_sweep():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        rho = bell.partial_trace_idler(random_state(rng.uniform(-1, 1, 8))).matrix
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-12


def test_density_matrix_validation():
    with pytest.raises(NormError):
        bell.DensityMatrix(np.eye(2))
    with pytest.raises(NormError):
        bell.DensityMatrix(np.array([[0.5, 1], [0, 0.5]]))
    with pytest.raises(NormError):
        bell.DensityMatrix(np.array([[1.5, 0], [0, -0.5]]))


@given(components, st.sampled_from(bell.BASES), st.sampled_from(bell.BASES))
def test_order_independence_analytic(v, sb, ib):
    s = random_state(v)
    a = bell.joint_distribution(s, sb, ib, "signal_first")
    b = bell.joint_distribution(s, sb, ib, "idler_first")
    assert np.max(np.abs(a - b)) < 1e-12
    assert a.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("basis", bell.BASES)
def test_order_independence_sampled(basis):
    s = bell.bell_state()
    p = bell.joint_distribution(s, "diagonal", basis)
    n = 10_000
    for order, seed in (("signal_first", 1), ("idler_first", 2)):
        counts = bell.sample_joint(s, n, "diagonal", basis, seed, order)
        assert counts.sum() == n
        for c, q in zip(counts.ravel(), p.ravel()):
            if q == 0:
                assert c == 0
            else:
                assert abs(c - n * q) < 3 * math.sqrt(n * q * (1 - q))


def test_correlation_tables():
    n = 10_000
    diag = bell.correlation_table(n, "diagonal", 3)
    comp = bell.correlation_table(n, "computational", 3)
    assert diag.counts[0, 1] == diag.counts[1, 0] == 0
    for c in (diag.counts[0, 0], diag.counts[1, 1]):
        assert abs(c - n / 2) < 3 * math.sqrt(n / 4)
    for c in comp.counts.ravel():
        assert abs(c - n / 4) < 3 * math.sqrt(n * 0.25 * 0.75)
    # signal marginal does not depend on the idler basis
    for t in (diag, comp):
        m = t.counts.sum(axis=1)[0]
        assert abs(m - n / 2) < 3 * math.sqrt(n / 4)
    assert diag.to_dict() == {"basis": "diagonal", "counts": diag.counts.tolist(), "n": n, "seed": 3}
    with pytest.raises(ConfigError):
        bell.correlation_table(10, "polar", 0)
    with pytest.raises(ConfigError):
        bell.correlation_table(0, "diagonal", 0)


def test_correlation_determinism(tmp_path):
    a = bell.correlation_table(500, "computational", 9)
    b = bell.correlation_table(500, "computational", 9)
    assert np.array_equal(a.counts, b.counts)
    p = tmp_path / "t.json"
    bell.write_correlation_json(p, a)
    assert '"basis": "computational"' in p.read_text()


def test_sign_tables(g):
    assert bell.qubit_sign_table() == {"0": 0, "1": 0, "+": 1, "-": -1}
    assert bell.wave_sign_table(g) == {"D1": 1, "D2": -1, "D3": 0, "D4": 0}
    ok, pairs = bell.structural_correspondence(g)
    assert ok and set(pairs) == {"D1", "D2", "D3", "D4"}


def test_mapping_table():
    m = bell.WAVE_TO_QUBIT
    assert (m["upper"], m["lower"], m["D4"], m["D3"], m["D1"], m["D2"]) == ("0", "1", "0", "1", "+", "-")


def test_swapped_mapping_breaks_correspondence(g):
    w = bell.wave_sign_table(g)
    q = bell.qubit_sign_table()
    swapped = dict(bell.WAVE_TO_QUBIT, D1="-", D2="+")
    assert any(w[d] != q[swapped[d]] for d in w)
