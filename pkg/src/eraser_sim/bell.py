"""Two-qubit reduction of the eraser: signal slot first, idler second.

Basis states are ordered |00>, |01>, |10>, |11> with the left digit the
signal. The diagonal basis is |+-> = (|0> +- |1>) / sqrt(2).

The wave picture maps onto the qubits through a fixed dictionary
(``WAVE_TO_QUBIT``): upper slit <-> |0>, lower slit <-> |1>, which-path
detector D4 <-> idler 0, D3 <-> idler 1, eraser detector D1 <-> idler +,
D2 <-> idler -.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import wave
from .errors import ConfigError, NormError
from .geometry import DetectorId, ExperimentGeometry

NORM_TOL = 1e-12
INV_SQRT2 = 1 / math.sqrt(2)
SLOTS = ("signal", "idler")
BASES = ("computational", "diagonal")
OUTCOME_LABELS = {"computational": ("0", "1"), "diagonal": ("+", "-")}

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * INV_SQRT2
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

WAVE_TO_QUBIT: dict[str, str] = {
    "upper": "0",
    "lower": "1",
    DetectorId.D4.value: "0",
    DetectorId.D3.value: "1",
    DetectorId.D1.value: "+",
    DetectorId.D2.value: "-",
}


def _check_norm(v: np.ndarray) -> None:
    n2 = float(np.vdot(v, v).real)
    if abs(n2 - 1) > NORM_TOL:
        raise NormError(f"state norm^2 = {n2!r}, expected 1")


@dataclass(frozen=True)
class QubitState:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape != (2,):
            raise NormError("a qubit has two amplitudes")
        _check_norm(a)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def basis(cls, label: str) -> "QubitState":
        vecs = {"0": [1, 0], "1": [0, 1], "+": [INV_SQRT2, INV_SQRT2], "-": [INV_SQRT2, -INV_SQRT2]}
        if label not in vecs:
            raise ConfigError(f"unknown basis label {label!r}")
        return cls(np.array(vecs[label], dtype=complex))

    def tensor(self, other: "QubitState") -> "TwoQubitState":
        return TwoQubitState(np.kron(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class TwoQubitState:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape != (4,):
            raise NormError("a two-qubit state has four amplitudes")
        _check_norm(a)
        object.__setattr__(self, "amplitudes", a)

    def matrix(self) -> np.ndarray:
        """Amplitudes as a 2x2 array indexed [signal, idler]."""
        return self.amplitudes.reshape(2, 2)

    def isclose(self, other: "TwoQubitState", tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.amplitudes - other.amplitudes)) < tol)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ConfigError("density matrix must be 2x2")
        if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
            raise NormError("density matrix not Hermitian")
        if abs(np.trace(m) - 1) > NORM_TOL:
            raise NormError(f"density matrix trace {np.trace(m).real!r}")
        if np.min(np.linalg.eigvalsh(m)) < -NORM_TOL:
            raise NormError("density matrix not positive semidefinite")
        object.__setattr__(self, "matrix", m)


def bell_state() -> TwoQubitState:
    """(|00> + |11>) / sqrt(2), prepared by CNOT on |+>|0>."""
    return apply_cnot(QubitState.basis("+").tensor(QubitState.basis("0")))


def apply_cnot(s: TwoQubitState) -> TwoQubitState:
    """Flip the idler when the signal is |1>."""
    _check_norm(s.amplitudes)
    return TwoQubitState(CNOT @ s.amplitudes)


def rewrite_in_diagonal(s: "TwoQubitState | np.ndarray") -> np.ndarray:
    """Coefficients over {0+, 0-, 1+, 1-}: the idler slot in the |+-> basis.

    The change of basis is its own inverse, so applying it to the returned
    coefficients gives back the computational ones.
    """
    amps = s.amplitudes if isinstance(s, TwoQubitState) else np.asarray(s, dtype=complex)
    return (amps.reshape(2, 2) @ HADAMARD.T).reshape(-1)


def _slot_projector(slot: str, basis: str, outcome: int) -> np.ndarray:
    vec = np.eye(2, dtype=complex)[outcome] if basis == "computational" else HADAMARD[outcome]
    p = np.outer(vec, vec.conj())
    eye = np.eye(2)
    return np.kron(p, eye) if slot == "signal" else np.kron(eye, p)


def _validate(slot: str, basis: str) -> None:
    if slot not in SLOTS:
        raise ConfigError(f"slot must be one of {SLOTS}")
    if basis not in BASES:
        raise ConfigError(f"basis must be one of {BASES}")


def outcome_probabilities(s: TwoQubitState, slot: str, basis: str) -> np.ndarray:
    _validate(slot, basis)
    return np.array([np.vdot(s.amplitudes, _slot_projector(slot, basis, o) @ s.amplitudes).real for o in (0, 1)])


def measure(s: TwoQubitState, slot: str, basis: str, rng: np.random.Generator):
    """Projective measurement of one slot.

    Returns (outcome label, collapsed state, probability of that outcome).
    """
    _validate(slot, basis)
    _check_norm(s.amplitudes)
    probs = outcome_probabilities(s, slot, basis)
    o = 0 if rng.random() < probs[0] else 1
    if probs[o] <= 0:
        o = 1 - o
    post = _slot_projector(slot, basis, o) @ s.amplitudes / math.sqrt(probs[o])
    return OUTCOME_LABELS[basis][o], TwoQubitState(post), float(probs[o])


def partial_trace_idler(s: TwoQubitState) -> DensityMatrix:
    m = s.matrix()
    return DensityMatrix(m @ m.conj().T)


def joint_distribution(s: TwoQubitState, signal_basis: str, idler_basis: str,
                       order: str = "signal_first") -> np.ndarray:
    """P[signal outcome, idler outcome] from sequential projective measurements.

    ``order`` is "signal_first" or "idler_first"; both give the same table
    because the two slot projectors commute.
    """
    if order not in ("signal_first", "idler_first"):
        raise ConfigError("order must be signal_first or idler_first")
    out = np.zeros((2, 2))
    for i in (0, 1):
        for j in (0, 1):
            ps = _slot_projector("signal", signal_basis, i)
            pi = _slot_projector("idler", idler_basis, j)
            first, second = (ps, pi) if order == "signal_first" else (pi, ps)
            v = second @ (first @ s.amplitudes)
            out[i, j] = np.vdot(v, v).real
    return out


def sample_joint(s: TwoQubitState, n: int, signal_basis: str, idler_basis: str,
                 seed: int, order: str = "signal_first") -> np.ndarray:
    """Counts[signal, idler] from ``n`` shots of sequential measurement."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if order not in ("signal_first", "idler_first"):
        raise ConfigError("order must be signal_first or idler_first")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    first_slot, second_slot = ("signal", "idler") if order == "signal_first" else ("idler", "signal")
    bases = {"signal": signal_basis, "idler": idler_basis}
    # each shot: draw the first outcome, then the second from the collapsed state
    p_first = outcome_probabilities(s, first_slot, bases[first_slot])
    u = rng.random((n, 2))
    counts = np.zeros((2, 2), dtype=np.int64)
    for o1 in (0, 1):
        if p_first[o1] <= 0:
            continue
        post = TwoQubitState(_slot_projector(first_slot, bases[first_slot], o1) @ s.amplitudes / math.sqrt(p_first[o1]))
        p_second = outcome_probabilities(post, second_slot, bases[second_slot])
        sel = (u[:, 0] >= p_first[0]) if o1 else (u[:, 0] < p_first[0])
        o2 = (u[sel, 1] >= p_second[0]).astype(int)
        for v in (0, 1):
            c = int(np.sum(o2 == v))
            i, j = (o1, v) if first_slot == "signal" else (v, o1)
            counts[i, j] += c
    return counts


@dataclass(frozen=True)
class CorrelationTable:
    basis: str
    counts: np.ndarray  # [signal +/-, idler outcome]
    n: int
    seed: int

    def frequencies(self) -> np.ndarray:
        return self.counts / self.n

    def to_dict(self) -> dict:
        return {"basis": self.basis, "counts": self.counts.tolist(), "n": self.n, "seed": self.seed}


def correlation_table(n: int, idler_basis: str, seed: int) -> CorrelationTable:
    """Bell pairs with the signal read in the diagonal basis."""
    if idler_basis not in BASES:
        raise ConfigError(f"idler basis must be one of {BASES}")
    counts = sample_joint(bell_state(), n, "diagonal", idler_basis, seed)
    return CorrelationTable(idler_basis, counts, n, seed)


def write_correlation_json(path: str | Path, table: CorrelationTable) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2) + "\n")


# -- structural correspondence with the wave model ----------------------------

def _sign(v: float, tol: float = 1e-12) -> int:
    return 0 if abs(v) <= tol else (1 if v > 0 else -1)


def qubit_sign_table() -> dict[str, int]:
    """Sign of <X_signal> given each idler outcome of the Bell state.

    X = |+><+| - |-><-| is the qubit counterpart of the fringe phase read
    on the screen.
    """
    s = bell_state()
    out = {}
    for basis in BASES:
        p = joint_distribution(s, "diagonal", basis)
        for j, label in enumerate(OUTCOME_LABELS[basis]):
            out[label] = _sign((p[0, j] - p[1, j]) / (p[0, j] + p[1, j]))
    return out


def fringe_reference_point(g: ExperimentGeometry, points: int = 4001) -> float:
    """Screen point where the D1 pattern's interference term peaks."""
    y = np.linspace(*g.screen_extent, points)
    return float(y[np.argmax(-wave.interference_term(y, g))])


def wave_cross_term(det, y, g: ExperimentGeometry):
    """2 Re(conj(a psi1) b psi2) for the detector's slit coefficients (a, b)."""
    a, b = wave.SIGNAL_COEFFICIENTS[DetectorId.parse(det)]
    psi1, psi2 = wave.slit_amplitudes(y, g)
    return 2 * np.real(np.conj(a * psi1) * b * psi2)


def wave_sign_table(g: ExperimentGeometry, y_ref: Optional[float] = None) -> dict[str, int]:
    """Sign of each idler detector's interference term at a D1 fringe maximum."""
    y = fringe_reference_point(g) if y_ref is None else y_ref
    psi1, psi2 = wave.slit_amplitudes(y, g)
    scale = abs(psi1) * abs(psi2)
    return {d.value: _sign(float(wave_cross_term(d, y, g)), tol=1e-9 * scale)
            for d in (DetectorId.D1, DetectorId.D2, DetectorId.D3, DetectorId.D4)}


def structural_correspondence(g: ExperimentGeometry) -> tuple[bool, dict[str, tuple[int, int]]]:
    """Compare wave and qubit correlation signs through ``WAVE_TO_QUBIT``."""
    w = wave_sign_table(g)
    q = qubit_sign_table()
    pairs = {det: (w[det], q[WAVE_TO_QUBIT[det]]) for det in w}
    return all(a == b for a, b in pairs.values()), pairs
