"""Pilot-wave trajectories of the signal particle (m = hbar = 1).

The signal moves in the (x, y) plane behind the slits with velocity
``grad S`` of the wave selected by the idler's record:

* which-path regime: the single slit wave of the branch the pair was born
  in, ``exp(i k r_j) / r_j``; trajectories are straight radial lines;
* eraser regime: ``i psi1 - psi2`` (idler heading for D1) or
  ``-psi1 + i psi2`` (D2); the familiar wiggly trajectories.

The idler is not integrated. Its branch is the slit of origin and its
eraser outcome is drawn from the joint Born weight at the signal's position
when the switch happens.

Statistical weights
-------------------
Point-source waves ``e^{ikr}/r`` live in three dimensions; the plane z = 0
is invariant under the flow, but an in-plane ensemble is a measure-zero
slice of the 3-D one and is not equivariant on its own. Each trajectory
therefore carries the weight

    (launch flux per solid angle) * dz0/dz_end / v_x(end)

where ``dz_end/dz0`` is integrated along the path from
``d ln J / dt = d^2 S / dz^2`` at z = 0. The first factor makes the launch a
stationary stream, the second restores the out-of-plane density and the
last turns arrival flux into screen density. With these weights the endpoint
histogram reproduces ``|psi|^2`` on the screen.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from . import wave
from .errors import ConfigError, DomainError, NodeError, PhaseUndefined, StepError
from .geometry import DetectorId, ExperimentGeometry

AMPLITUDE_FLOOR = 1e-15
LAUNCH_RADIUS = 1e-3  # in wavelengths
NEAR_FIELD = 0.05  # single-slit distance, as a fraction of L, where steps start shrinking
MAX_FLIGHT = 10.0  # in units of the on-axis flight time
MAX_NODE_RETRIES = 20
LOOKAHEAD_PASSES = 6

STAGES = ("pre_eraser", "post_eraser_to_D1", "post_eraser_to_D2", "at_whichpath_detector")
PRE, TO_D1, TO_D2, WHICH_PATH = range(4)
REGIME_LABEL = {PRE: "which_path", TO_D1: "eraser_D1", TO_D2: "eraser_D2", WHICH_PATH: "which_path"}


# -- polar form --------------------------------------------------------------

@dataclass(frozen=True)
class PolarField:
    R: float
    S: float

    def value(self) -> complex:
        return self.R * complex(math.cos(self.S), math.sin(self.S))


def unwrap_to(phase, reference):
    """Shift ``phase`` by a multiple of 2 pi to lie nearest ``reference``."""
    return phase - 2 * np.pi * np.round((phase - reference) / (2 * np.pi))


def polar_decompose(a: complex, prev_phase: Optional[float] = None, need_phase: bool = True) -> PolarField:
    """Amplitude and phase of ``a``; the phase is NaN at a node unless required."""
    R = abs(a)
    if R < AMPLITUDE_FLOOR:
        if need_phase:
            raise PhaseUndefined(f"|a| = {R:.3g} below {AMPLITUDE_FLOOR}")
        return PolarField(R, math.nan)
    S = math.atan2(a.imag, a.real)
    if prev_phase is not None:
        S = float(unwrap_to(S, prev_phase))
    return PolarField(R, S)


def two_particle_amplitude_sq(R1, S1, R1p, S1p, R2, S2, R2p, S2p):
    """|R1 R1' e^{i(S1+S1')} + R2 R2' e^{i(S2+S2')}|^2 by the law of cosines."""
    a = np.multiply(R1, R1p)
    b = np.multiply(R2, R2p)
    dphi = (np.add(S2, S2p)) - (np.add(S1, S1p))
    return a * a + b * b + 2 * a * b * np.cos(dphi)


def two_particle_phase(R1, S1, R1p, S1p, R2, S2, R2p, S2p):
    """Phase of the summed two-branch amplitude, in (-pi, pi]."""
    a = np.multiply(R1, R1p)
    b = np.multiply(R2, R2p)
    if np.any((np.abs(a) < AMPLITUDE_FLOOR) & (np.abs(b) < AMPLITUDE_FLOOR)):
        raise PhaseUndefined("both branch amplitudes vanish")
    p1 = np.add(S1, S1p)
    p2 = np.add(S2, S2p)
    return np.arctan2(a * np.sin(p1) + b * np.sin(p2), a * np.cos(p1) + b * np.cos(p2))


# -- configurations ------------------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    signal_pos: tuple[float, float]
    idler_branch: str  # "upper" or "lower"
    idler_stage: str = "pre_eraser"
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.idler_branch not in ("upper", "lower"):
            raise ConfigError(f"idler_branch must be upper/lower, got {self.idler_branch!r}")
        if self.idler_stage not in STAGES:
            raise ConfigError(f"unknown idler stage {self.idler_stage!r}")


def wave_coefficients(branch: str, stage: str) -> tuple[complex, complex]:
    """(upper, lower) slit coefficients of the wave guiding the signal."""
    if stage == "post_eraser_to_D1":
        return wave.SIGNAL_COEFFICIENTS[DetectorId.D1]
    if stage == "post_eraser_to_D2":
        return wave.SIGNAL_COEFFICIENTS[DetectorId.D2]
    return (1, 0) if branch == "upper" else (0, 1)


def _field(x, y, c1, c2, g: ExperimentGeometry):
    """Effective wave, its in-plane gradient and d^2/dz^2 at z = 0."""
    k = g.wave_number
    f = fx = fy = fzz = 0j
    rmin = np.inf
    for c, ys in ((c1, g.slit_upper_y), (c2, g.slit_lower_y)):
        dy = y - ys
        r = np.hypot(x, dy)
        p = np.exp(1j * k * r) / r
        dp = p * (1j * k - 1 / r)  # d/dr of e^{ikr}/r
        f = f + c * p
        fx = fx + c * dp * x / r
        fy = fy + c * dp * dy / r
        fzz = fzz + c * dp / r
        rmin = np.minimum(rmin, r)
    return f, fx, fy, fzz, rmin


def _velocity(x, y, c1, c2, g):
    f, fx, fy, fzz, rmin = _field(x, y, c1, c2, g)
    node = np.abs(f) < AMPLITUDE_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        vx = np.imag(fx / f)
        vy = np.imag(fy / f)
        dlnj = np.imag(fzz / f)
    return vx, vy, dlnj, rmin, node, f


def _velocity_gradient_norm(x, y, c1, c2, g):
    """Frobenius norm of the in-plane Jacobian of the guidance velocity."""
    k = g.wave_number
    f = 0j
    grad = [0j, 0j]
    hxx = hxy = hyy = 0j
    for c, ys in ((c1, g.slit_upper_y), (c2, g.slit_lower_y)):
        dy = y - ys
        r = np.hypot(x, dy)
        p = np.exp(1j * k * r) / r
        d1 = p * (1j * k - 1 / r)
        d2 = p * (-k * k - 2j * k / r + 2 / r ** 2)
        ux, uy = x / r, dy / r
        f = f + c * p
        grad[0] = grad[0] + c * d1 * ux
        grad[1] = grad[1] + c * d1 * uy
        t = d1 / r
        hxx = hxx + c * (d2 * ux * ux + t * (1 - ux * ux))
        hxy = hxy + c * (d2 * ux * uy - t * ux * uy)
        hyy = hyy + c * (d2 * uy * uy + t * (1 - uy * uy))
    with np.errstate(divide="ignore", invalid="ignore"):
        gx, gy = grad[0] / f, grad[1] / f
        jxx = np.imag(hxx / f - gx * gx)
        jxy = np.imag(hxy / f - gx * gy)
        jyy = np.imag(hyy / f - gy * gy)
    return np.sqrt(jxx ** 2 + 2 * jxy ** 2 + jyy ** 2)


def guidance_velocity(c: Configuration, g: ExperimentGeometry, regime: Optional[str] = None) -> np.ndarray:
    """grad S of the guiding wave at the signal position (m = 1).

    ``regime`` overrides the idler stage of ``c`` (any name in ``STAGES``).
    """
    x, y = c.signal_pos
    if not x > 0:
        raise DomainError("signal position must lie past the slit plane (x > 0)")
    c1, c2 = wave_coefficients(c.idler_branch, regime or c.idler_stage)
    vx, vy, _, _, node, f = _velocity(np.float64(x), np.float64(y), c1, c2, g)
    if node:
        raise NodeError(f"guiding amplitude {abs(f):.3g} at {c.signal_pos}")
    return np.array([float(vx), float(vy)])


def effective_phase(x, y, g: ExperimentGeometry, coefficients: tuple[complex, complex]):
    """Phase of ``c1 psi1 + c2 psi2`` assembled from its polar parts."""
    c1, c2 = coefficients
    r1, r2 = wave.slit_distances(x, y, g)
    k = g.wave_number
    return two_particle_phase(1 / r1, k * r1, abs(c1), np.angle(c1),
                              1 / r2, k * r2, abs(c2), np.angle(c2))


def eraser_outcome_probability(x, y, g: ExperimentGeometry):
    """P(idler -> D1 | signal at (x, y)) once the idler crosses the eraser."""
    p1, p2 = wave.field_amplitudes(x, y, g)
    d1 = np.abs(1j * p1 - p2) ** 2
    d2 = np.abs(-p1 + 1j * p2) ** 2
    return d1 / (d1 + d2)


# -- trajectories -------------------------------------------------------------

@dataclass(frozen=True)
class Timeline:
    """When the idler reaches the eraser, measured from pair creation.

    ``t_screen`` defaults to the on-axis flight time. If ``t_eraser`` exceeds
    it, the signal flies entirely in the which-path regime.
    """

    t_eraser: float
    t_screen: Optional[float] = None

    def screen_time(self, g: ExperimentGeometry) -> float:
        return g.flight_time if self.t_screen is None else self.t_screen

    def switches_in_flight(self, g: ExperimentGeometry) -> bool:
        return self.t_eraser <= self.screen_time(g)


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (N, 2) x, y
    stages: np.ndarray  # stage codes, see STAGES
    idler_branch: str
    idler_outcome: Optional[DetectorId] = None
    regime_switch_time: Optional[float] = None
    landed: bool = False
    weight: float = math.nan
    launch_angle: float = math.nan
    outcome_draw: float = math.nan  # uniform deciding the eraser outcome

    @property
    def endpoint(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def points(self) -> list[Configuration]:
        return list(self.configurations())

    def configurations(self) -> Iterator[Configuration]:
        for t, (x, y), s in zip(self.times, self.positions, self.stages):
            yield Configuration((float(x), float(y)), self.idler_branch, STAGES[int(s)], float(t))


def default_dt(g: ExperimentGeometry) -> float:
    """1e-3 of the on-axis flight time."""
    return 1e-3 * g.screen_distance / g.wave_number


def launch_point(g: ExperimentGeometry, branch: str, angle: float) -> tuple[float, float]:
    """Start point a small distance from a slit, heading ``angle`` from the axis."""
    ys = g.slit_upper_y if branch == "upper" else g.slit_lower_y
    r0 = LAUNCH_RADIUS * g.wavelength
    return (r0 * math.cos(angle), ys + r0 * math.sin(angle))


@dataclass
class _Batch:
    """Mutable state of a set of trajectories integrated in lockstep."""

    x: np.ndarray
    y: np.ndarray
    lnj: np.ndarray
    t: np.ndarray
    upper: np.ndarray
    stage: np.ndarray
    u: np.ndarray
    c1: np.ndarray = field(init=False)
    c2: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n = len(self.x)
        self.c1 = np.where(self.upper, 1, 0).astype(complex)
        self.c2 = np.where(self.upper, 0, 1).astype(complex)
        self.outcome = np.zeros(n, dtype=np.int8)  # 0 none, 1..4 = D1..D4
        self.outcome[self.stage == TO_D1] = 1
        self.outcome[self.stage == TO_D2] = 2
        wp = self.stage == WHICH_PATH
        self.outcome[wp] = np.where(self.upper[wp], 4, 3)
        self.switch_t = np.full(n, np.nan)
        self.done = np.zeros(n, dtype=bool)
        self.landed = np.zeros(n, dtype=bool)
        self.node = np.zeros(n, dtype=bool)
        self.w0 = np.ones(n)
        self.weight = np.full(n, np.nan)
        self.sync_coefficients(np.arange(n))

    def sync_coefficients(self, idx) -> None:
        st = self.stage[idx]
        up = self.upper[idx]
        c1 = np.where(up, 1, 0).astype(complex)
        c2 = np.where(up, 0, 1).astype(complex)
        for code, det in ((TO_D1, DetectorId.D1), (TO_D2, DetectorId.D2)):
            a, b = wave.SIGNAL_COEFFICIENTS[det]
            c1 = np.where(st == code, a, c1)
            c2 = np.where(st == code, b, c2)
        self.c1[idx] = c1
        self.c2[idx] = c2


def _switch(b: _Batch, idx: np.ndarray, g: ExperimentGeometry) -> None:
    """Idler reaches the eraser (or a which-path detector with mirrors in)."""
    if len(idx) == 0:
        return
    b.switch_t[idx] = b.t[idx]
    if g.mirrors_in:
        b.stage[idx] = WHICH_PATH
        b.outcome[idx] = np.where(b.upper[idx], 4, 3)
        return
    p = eraser_outcome_probability(b.x[idx], b.y[idx], g)
    to_d1 = b.u[idx] < p
    b.stage[idx] = np.where(to_d1, TO_D1, TO_D2)
    b.outcome[idx] = np.where(to_d1, 1, 2)
    b.sync_coefficients(idx)


def _rk4(b: _Batch, a: np.ndarray, h: np.ndarray, g, k1=None):
    x, y, lj = b.x[a], b.y[a], b.lnj[a]
    c1, c2 = b.c1[a], b.c2[a]
    if k1 is None:
        k1 = _velocity(x, y, c1, c2, g)
    k2 = _velocity(x + h / 2 * k1[0], y + h / 2 * k1[1], c1, c2, g)
    k3 = _velocity(x + h / 2 * k2[0], y + h / 2 * k2[1], c1, c2, g)
    k4 = _velocity(x + h * k3[0], y + h * k3[1], c1, c2, g)
    xn = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    yn = y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    ljn = lj + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    node = k1[4] | k2[4] | k3[4] | k4[4]
    return xn, yn, ljn, node


class _Recorder:
    def __init__(self, n: int, every: Optional[int]):
        self.every = every
        self.chunks: list[tuple[np.ndarray, ...]] = []

    def add(self, b: _Batch, idx) -> None:
        idx = np.asarray(idx)
        if len(idx):
            self.chunks.append((idx.copy(), b.t[idx].copy(), b.x[idx].copy(), b.y[idx].copy(), b.stage[idx].copy()))

    def collect(self, n: int):
        if not self.chunks:
            return [(np.empty(0), np.empty((0, 2)), np.empty(0, dtype=np.int8))] * n
        idx, t, x, y, s = (np.concatenate(c) for c in zip(*self.chunks))
        order = np.argsort(idx, kind="stable")
        idx, t, x, y, s = idx[order], t[order], x[order], y[order], s[order]
        bounds = np.searchsorted(idx, np.arange(n + 1))
        out = []
        for i in range(n):
            sl = slice(bounds[i], bounds[i + 1])
            out.append((t[sl], np.column_stack([x[sl], y[sl]]), s[sl]))
        return out


def _integrate(b: _Batch, g: ExperimentGeometry, timeline: Timeline, dt: float,
               rec: _Recorder) -> None:
    """Advance every unfinished trajectory of ``b`` to the screen."""
    L = g.screen_distance
    lam = g.wavelength
    # a single slit wave has |grad v| = k / r; full steps beyond r_near
    rate_ref = g.wave_number / (NEAR_FIELD * L)
    switching = timeline.switches_in_flight(g)
    t_sw = timeline.t_eraser
    t_max = MAX_FLIGHT * timeline.screen_time(g)
    y_lim = max(abs(v) for v in g.screen_extent) + L

    if switching:
        _switch(b, np.flatnonzero(~b.done & (b.t >= t_sw) & (b.outcome == 0)), g)
    v0 = _velocity(b.x, b.y, b.c1, b.c2, g)
    fresh = ~b.done & (b.lnj == 0)
    # launch flux per solid angle: |psi|^2 r0^2 v_r
    r0 = LAUNCH_RADIUS * lam
    ys = np.where(b.upper, g.slit_upper_y, g.slit_lower_y)
    vr = (v0[0] * b.x + v0[1] * (b.y - ys)) / r0
    b.w0 = np.where(fresh, np.abs(v0[5]) ** 2 * r0 ** 2 * vr, b.w0)
    rec.add(b, np.flatnonzero(~b.done))

    step = 0
    while True:
        a = np.flatnonzero(~b.done)
        if len(a) == 0:
            break
        k1 = _velocity(b.x[a], b.y[a], b.c1[a], b.c2[a], g)
        speed = np.hypot(k1[0], k1[1])
        # shrink where the flow varies fast: near the slits, nodes and saddles
        rate = _velocity_gradient_norm(b.x[a], b.y[a], b.c1[a], b.c2[a], g)
        h = dt * np.minimum(1.0, rate_ref / rate)
        pending = switching & (b.outcome[a] == 0) & (b.t[a] < t_sw)
        if switching:
            h = np.where(pending, np.minimum(h, t_sw - b.t[a]), h)
        xn, yn, ljn, node = _rk4(b, a, h, g, k1)
        # redo steps that ran into much faster-varying flow than they were sized for
        for _ in range(LOOKAHEAD_PASSES):
            ahead = np.maximum(
                _velocity_gradient_norm(xn, yn, b.c1[a], b.c2[a], g),
                _velocity_gradient_norm((b.x[a] + xn) / 2, (b.y[a] + yn) / 2, b.c1[a], b.c2[a], g),
            )
            h_ahead = dt * np.minimum(1.0, rate_ref / ahead)
            redo = h_ahead < h / 2
            if not np.any(redo):
                break
            h[redo] = h_ahead[redo]
            k1r = tuple(v[redo] for v in k1)
            xn[redo], yn[redo], ljn[redo], node[redo] = _rk4(b, a[redo], h[redo], g, k1r)
        if np.any(speed * h > lam):
            raise StepError(f"step displacement {np.max(speed * h):.3g} exceeds one wavelength {lam:.3g}; reduce dt")

        hit = (xn >= L) & ~node
        if np.any(hit):
            _land(b, a[hit], h[hit], g)
        bad = node & ~hit
        b.node[a[bad]] = True
        b.done[a[bad]] = True

        move = ~hit & ~bad
        am = a[move]
        b.x[am], b.y[am], b.lnj[am] = xn[move], yn[move], ljn[move]
        b.t[am] = b.t[am] + h[move]
        lost = (np.abs(b.y[am]) > y_lim) | (b.x[am] < -L) | (b.t[am] > t_max)
        b.done[am[lost]] = True

        crossed = am[:0]
        if switching:
            crossed = am[pending[move] & (b.t[am] >= t_sw)]
            if len(crossed):
                # snap so the switch sits exactly at t_eraser
                b.t[crossed] = t_sw
                _switch(b, crossed, g)
                rec.add(b, crossed)

        step += 1
        if rec.every and step % rec.every == 0:
            keep = ~lost
            if switching:
                keep &= ~np.isin(am, crossed)
            rec.add(b, am[keep])


def _land(b: _Batch, idx: np.ndarray, h: np.ndarray, g: ExperimentGeometry) -> None:
    """Redo the final step with a length that ends exactly on the screen."""
    L = g.screen_distance
    x0 = b.x[idx]
    xn, _, _, _ = _rk4(b, idx, h, g)
    hh = h * (L - x0) / (xn - x0)
    for _ in range(3):
        xs, ys, ljs, _ = _rk4(b, idx, hh, g)
        vx = _velocity(xs, ys, b.c1[idx], b.c2[idx], g)[0]
        hh = hh + (L - xs) / vx
    xs, ys, ljs, _ = _rk4(b, idx, hh, g)
    vx = _velocity(xs, ys, b.c1[idx], b.c2[idx], g)[0]
    b.x[idx], b.y[idx], b.lnj[idx] = xs, ys, ljs
    b.t[idx] = b.t[idx] + hh
    lo, hi = g.screen_extent
    b.landed[idx] = (ys >= lo) & (ys <= hi)
    b.weight[idx] = b.w0[idx] * np.exp(-ljs) / vx
    b.done[idx] = True


def _settle_late_outcomes(b: _Batch, g: ExperimentGeometry) -> None:
    """Outcome for idlers that reach the eraser only after the signal landed."""
    late = (b.outcome == 0) & b.done & ~b.node
    if not np.any(late):
        return
    idx = np.flatnonzero(late)
    if g.mirrors_in:
        b.outcome[idx] = np.where(b.upper[idx], 4, 3)
        return
    p = eraser_outcome_probability(b.x[idx], b.y[idx], g)
    b.outcome[idx] = np.where(b.u[idx] < p, 1, 2)


_OUTCOME_DET = {1: DetectorId.D1, 2: DetectorId.D2, 3: DetectorId.D3, 4: DetectorId.D4}


def _run(starts_x, starts_y, upper, stage, t0, u, g, timeline, dt, record_every):
    n = len(starts_x)
    b = _Batch(np.array(starts_x, dtype=float), np.array(starts_y, dtype=float), np.zeros(n),
               np.array(t0, dtype=float), np.array(upper, dtype=bool), np.array(stage, dtype=np.int8),
               np.array(u, dtype=float))
    rec = _Recorder(n, record_every)
    _integrate(b, g, timeline, dt, rec)
    rec.add(b, np.flatnonzero(~b.node))
    _settle_late_outcomes(b, g)
    return b, rec


def _check_dt(g, dt):
    dt = default_dt(g) if dt is None else float(dt)
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    return dt


def integrate_trajectory(start: Configuration, g: ExperimentGeometry, timeline: Timeline,
                         dt: Optional[float] = None, u: float = 0.5,
                         record_every: int = 1) -> Trajectory:
    """Integrate one signal trajectory from ``start`` to the screen.

    ``u`` in [0, 1) is the uniform draw that fixes the eraser outcome: D1 if
    it falls below the Born probability at the switch point.
    """
    dt = _check_dt(g, dt)
    x, y = start.signal_pos
    stage = STAGES.index(start.idler_stage)
    b, rec = _run([x], [y], [start.idler_branch == "upper"], [stage], [start.time], [u],
                  g, timeline, dt, record_every)
    if b.node[0]:
        raise NodeError(f"trajectory from {start.signal_pos} hit a node of the guiding wave")
    t, pos, st = rec.collect(1)[0]
    return _make_trajectory(b, 0, t, pos, st)


def _make_trajectory(b: _Batch, i: int, t, pos, st, angle=math.nan) -> Trajectory:
    sw = b.switch_t[i]
    return Trajectory(
        times=t, positions=pos, stages=st,
        idler_branch="upper" if b.upper[i] else "lower",
        idler_outcome=_OUTCOME_DET.get(int(b.outcome[i])),
        regime_switch_time=None if math.isnan(sw) else float(sw),
        landed=bool(b.landed[i]),
        weight=float(b.weight[i]),
        launch_angle=angle,
        outcome_draw=float(b.u[i]),
    )


@dataclass
class Ensemble:
    trajectories: list[Trajectory]
    timeline: Timeline
    seed: int
    nodes_resampled: int = 0

    def __len__(self) -> int:
        return len(self.trajectories)

    def endpoints(self) -> np.ndarray:
        return np.array([tr.endpoint[1] for tr in self.trajectories])

    def weights(self) -> np.ndarray:
        return np.array([tr.weight for tr in self.trajectories])

    def landed(self) -> np.ndarray:
        return np.array([tr.landed for tr in self.trajectories])

    def outcomes(self) -> list[Optional[DetectorId]]:
        return [tr.idler_outcome for tr in self.trajectories]

    def endpoint_histogram(self, edges, detector=None) -> np.ndarray:
        """Weighted, normalized histogram of landed endpoints.

        ``detector`` restricts to trajectories whose idler ended there.
        """
        sel = self.landed()
        if detector is not None:
            det = DetectorId.parse(detector)
            sel &= np.array([o is det for o in self.outcomes()])
        h, _ = np.histogram(self.endpoints()[sel], edges, weights=self.weights()[sel])
        s = h.sum()
        return h / s if s > 0 else h


def _draws(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def sample_ensemble(n: int, g: ExperimentGeometry, timeline: Timeline, seed: int,
                    dt: Optional[float] = None, record_every: Optional[int] = None) -> Ensemble:
    """Integrate ``n`` trajectories launched from both slits.

    Trajectory ``i`` starts at slit ``i % 2`` (even: upper) in angular
    stratum ``i // 2`` of the forward half plane, jittered by its own
    sub-seed. The uniform draw deciding its eraser outcome alternates
    between the lower and upper half of [0, 1) from stratum to stratum,
    which keeps the D1 and D2 subsets interleaved in angle. Trajectories
    that hit a node are relaunched with a fresh draw from the same
    sub-seed. ``record_every=None`` stores only start, switch and end
    points.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    dt = _check_dt(g, dt)
    gens = _draws(seed, n)
    i = np.arange(n)
    upper = i % 2 == 0
    stratum = i // 2
    n_up = (n + 1) // 2
    per_slit = np.where(upper, n_up, n - n_up)
    first = np.array([gen.random(2) for gen in gens])
    angle = -np.pi / 2 + np.pi * (stratum + first[:, 0]) / per_slit
    u = ((stratum % 2) + first[:, 1]) / 2

    stage0 = np.zeros(n, dtype=np.int8)
    resampled = 0
    result_b = None
    todo = i
    records: dict[int, tuple] = {}
    for attempt in range(MAX_NODE_RETRIES + 1):
        pts = [launch_point(g, "upper" if upper[j] else "lower", angle[j]) for j in todo]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        b, rec = _run(xs, ys, upper[todo], stage0[todo], np.zeros(len(todo)), u[todo],
                      g, timeline, dt, record_every)
        recs = rec.collect(len(todo))
        for local, j in enumerate(todo):
            if not b.node[local]:
                records[int(j)] = (b, local, recs[local])
        bad = todo[b.node]
        if len(bad) == 0:
            break
        resampled += len(bad)
        for j in bad:
            jit = gens[j].random(2)
            angle[j] = -np.pi / 2 + np.pi * (stratum[j] + jit[0]) / per_slit[j]
            u[j] = ((stratum[j] % 2) + jit[1]) / 2
        todo = bad
    else:
        raise NodeError(f"{len(todo)} trajectories still hit nodes after {MAX_NODE_RETRIES} relaunches")

    trajectories = []
    for j in range(n):
        bb, local, (t, pos, st) = records[j]
        trajectories.append(_make_trajectory(bb, local, t, pos, st, float(angle[j])))
    return Ensemble(trajectories, timeline, seed, resampled)


# -- export --------------------------------------------------------------------

def write_trajectories_csv(path: str | Path, trajectories: list[Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["traj_id", "t", "x", "y", "regime"])
        for tid, tr in enumerate(trajectories):
            for t, (x, y), s in zip(tr.times, tr.positions, tr.stages):
                w.writerow([tid, repr(float(t)), repr(float(x)), repr(float(y)), REGIME_LABEL[int(s)]])


def ensemble_summary(ens: Ensemble, g: ExperimentGeometry, bins: int = 20) -> dict:
    edges = np.linspace(*g.screen_extent, bins + 1)
    hist = {"all": ens.endpoint_histogram(edges).tolist()}
    for det in (DetectorId.D1, DetectorId.D2, DetectorId.D3, DetectorId.D4):
        if any(o is det for o in ens.outcomes()):
            hist[det.value] = ens.endpoint_histogram(edges, det).tolist()
    return {
        "n": len(ens),
        "landed": int(ens.landed().sum()),
        "nodes_resampled": ens.nodes_resampled,
        "seed": ens.seed,
        "t_eraser": ens.timeline.t_eraser,
        "endpoint_histogram": {"bin_edges": edges.tolist(), "weights": hist},
    }


def write_ensemble_summary(path: str | Path, ens: Ensemble, g: ExperimentGeometry, bins: int = 20) -> None:
    Path(path).write_text(json.dumps(ensemble_summary(ens, g, bins), indent=2) + "\n")
