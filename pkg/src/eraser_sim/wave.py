"""Stationary wave amplitudes and screen densities.

Amplitudes are plain Python/numpy complex numbers. Every function accepts
scalars or arrays of screen coordinates and broadcasts.

Normalization convention: the marginal screen density ``c (|psi1|^2 +
|psi2|^2)`` integrates to one over the screen extent, and each conditional
density is the joint density divided by its detector probability, so that
``sum_d P(d) * conditional_density(d, y) == marginal_density(y)`` holds
pointwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import DetectorId, ExperimentGeometry, detector_probabilities

R_EPSILON = 1e-9
INV_SQRT2 = 1 / math.sqrt(2)


def plane_wave(k, x):
    """exp(i k x)."""
    return np.exp(1j * np.multiply(k, x))


def spherical_wave(k, r):
    """exp(i k r) / r, the outgoing wave of a point source."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r >= R_EPSILON)):
        raise DomainError(f"spherical wave evaluated at r < {R_EPSILON}")
    out = np.exp(1j * k * r) / r
    return out[()] if out.ndim == 0 else out


def slit_distances(x, y, g: ExperimentGeometry):
    """Distances (r1, r2) from the upper and lower slit to the point (x, y)."""
    r1 = np.hypot(x, np.subtract(y, g.slit_upper_y))
    r2 = np.hypot(x, np.subtract(y, g.slit_lower_y))
    return r1, r2


def field_amplitudes(x, y, g: ExperimentGeometry):
    """Single-slit waves (psi1, psi2) at an arbitrary point behind the slits."""
    r1, r2 = slit_distances(x, y, g)
    return spherical_wave(g.wave_number, r1), spherical_wave(g.wave_number, r2)


def _check_on_screen(y, g: ExperimentGeometry) -> None:
    lo, hi = g.screen_extent
    y = np.asarray(y, dtype=float)
    if np.any(~((y >= lo) & (y <= hi))):
        raise DomainError(f"screen point outside extent [{lo}, {hi}]")


def slit_amplitudes(y, g: ExperimentGeometry):
    """(psi1, psi2) at the screen point (screen_distance, y)."""
    _check_on_screen(y, g)
    return field_amplitudes(g.screen_distance, y, g)


def eraser_transform(upper, lower):
    """Map idler branch amplitudes onto the eraser outputs (D1, D2).

    Each reflection multiplies by i; the upper branch is reflected into D1
    and transmitted into D2, the lower branch the other way round. The
    1/sqrt(2) keeps the map unitary.
    """
    upper = np.asarray(upper, dtype=complex)
    lower = np.asarray(lower, dtype=complex)
    d1 = INV_SQRT2 * (1j * upper - lower)
    d2 = INV_SQRT2 * (-upper + 1j * lower)
    if d1.ndim == 0:
        return complex(d1), complex(d2)
    return d1, d2


# (upper, lower) coefficients of the signal wave left behind by each idler click.
SIGNAL_COEFFICIENTS: dict[DetectorId, tuple[complex, complex]] = {
    DetectorId.D1: (1j, -1),
    DetectorId.D2: (-1, 1j),
    DetectorId.D3: (0, 1),
    DetectorId.D4: (1, 0),
}


def normalization(g: ExperimentGeometry) -> float:
    """Constant c making c * (|psi1|^2 + |psi2|^2) a probability density on the screen."""
    lo, hi = g.screen_extent
    L = g.screen_distance
    total = 0.0
    for ys in (g.slit_upper_y, g.slit_lower_y):
        # integral of 1 / (L^2 + (y - ys)^2)
        total += (math.atan((hi - ys) / L) - math.atan((lo - ys) / L)) / L
    return 1.0 / total


def _amplitude_scale(det: DetectorId, g: ExperimentGeometry) -> float:
    c = normalization(g)
    if det.is_eraser:
        return math.sqrt(c)
    return math.sqrt(2 * c)


def _require_reachable(det: DetectorId, g: ExperimentGeometry) -> DetectorId:
    det = DetectorId.parse(det)
    if det is DetectorId.D0:
        raise ConfigError("D0 is the signal screen, not an idler detector")
    if det.is_eraser and g.mirrors_in:
        raise ConfigError(f"{det.value} is unreachable with mirrors in")
    return det


def conditional_amplitude(det, y, g: ExperimentGeometry):
    """Signal amplitude at the screen given that idler detector ``det`` fired."""
    det = _require_reachable(det, g)
    psi1, psi2 = slit_amplitudes(y, g)
    a, b = SIGNAL_COEFFICIENTS[det]
    return _amplitude_scale(det, g) * (a * psi1 + b * psi2)


def interference_term(y, g: ExperimentGeometry):
    """Im(conj(psi1) * psi2) on the screen."""
    psi1, psi2 = slit_amplitudes(y, g)
    return np.imag(np.conj(psi1) * psi2)


def conditional_density(det, y, g: ExperimentGeometry):
    """Screen density of signal hits in coincidence with ``det``.

    D1 carries fringes (-2 Im term), D2 the complementary anti-fringes
    (+2 Im term); D3 and D4 carry a single-slit clump.
    """
    det = _require_reachable(det, g)
    psi1, psi2 = slit_amplitudes(y, g)
    s = _amplitude_scale(det, g) ** 2
    a1 = np.abs(psi1) ** 2
    a2 = np.abs(psi2) ** 2
    if det is DetectorId.D3:
        return s * a2
    if det is DetectorId.D4:
        return s * a1
    im = np.imag(np.conj(psi1) * psi2)
    sign = -1.0 if det is DetectorId.D1 else 1.0
    return s * (a1 + a2 + sign * 2 * im)


def joint_density(det, y, g: ExperimentGeometry):
    """P(det) * conditional_density(det, y)."""
    det = _require_reachable(det, g)
    return detector_probabilities(g)[det] * conditional_density(det, y, g)


def marginal_density(y, g: ExperimentGeometry):
    """Unconditioned screen density; independent of ``mirrors_in``."""
    psi1, psi2 = slit_amplitudes(y, g)
    return normalization(g) * (np.abs(psi1) ** 2 + np.abs(psi2) ** 2)


@dataclass(frozen=True)
class JointState:
    """Entangled pair at one screen point, one (signal, idler) factor per slit branch.

    The idler factors are the amplitudes of orthogonal idler paths, so the
    branches never interfere in the signal density until the eraser mixes
    them.
    """

    branch_upper: tuple[complex, complex]
    branch_lower: tuple[complex, complex]
    normalization: float

    @classmethod
    def at(cls, y, g: ExperimentGeometry) -> "JointState":
        psi1, psi2 = slit_amplitudes(y, g)
        return cls((complex(psi1), 1 + 0j), (complex(psi2), 1 + 0j), math.sqrt(normalization(g)))

    def signal_density(self) -> float:
        n2 = self.normalization ** 2
        return n2 * sum(abs(s) ** 2 * abs(i) ** 2 for s, i in (self.branch_upper, self.branch_lower))

    def detector_amplitude(self, det, g: ExperimentGeometry) -> complex:
        """Joint amplitude for the signal here and the idler at ``det``.

        A which-path beamsplitter reflects (factor i) into D3/D4 and
        transmits toward the eraser, each with amplitude 1/sqrt(2); with
        mirrors in, the reflection is total.
        """
        det = _require_reachable(det, g)
        (s1, i1), (s2, i2) = self.branch_upper, self.branch_lower
        if det.is_which_path:
            r = 1j if g.mirrors_in else 1j * INV_SQRT2
            s, i = (s1, i1) if det is DetectorId.D4 else (s2, i2)
            return self.normalization * r * s * i
        d1_up, d2_up = eraser_transform(INV_SQRT2 * i1, 0)
        d1_lo, d2_lo = eraser_transform(0, INV_SQRT2 * i2)
        if det is DetectorId.D1:
            return self.normalization * (s1 * d1_up + s2 * d1_lo)
        return self.normalization * (s1 * d2_up + s2 * d2_lo)


def screen_grid(g: ExperimentGeometry, points: int) -> np.ndarray:
    if points < 2:
        raise ConfigError("screen grid needs at least 2 points")
    lo, hi = g.screen_extent
    return np.linspace(lo, hi, points)


def density_profiles(g: ExperimentGeometry, points: int = 1001) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Marginal plus every reachable conditional density on a uniform grid."""
    y = screen_grid(g, points)
    out = {"marginal": marginal_density(y, g)}
    for det in detector_probabilities(g):
        out[det.value] = conditional_density(det, y, g)
    return y, out


def write_density_csv(path: str | Path, y, density) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "density"])
        for yi, di in zip(np.asarray(y), np.asarray(density)):
            w.writerow([repr(float(yi)), repr(float(di))])
