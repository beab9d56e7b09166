"""Invariant suite: each check returns a measured residual and its tolerance."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import bell, bohm, detection, wave
from .geometry import DetectorId, ExperimentGeometry, default_geometry, detector_probabilities

BINS = 50
BOHM_BINS = 20
MC_N = 100_000
BOHM_N = 10_000
SHOTS = 10_000


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def __post_init__(self):
        # numpy scalars are not JSON serializable
        for name, cast in (("passed", bool), ("residual", float), ("tolerance", float), ("seconds", float)):
            object.__setattr__(self, name, cast(getattr(self, name)))

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag}  {self.name}: residual={self.residual:.3g} tol={self.tolerance:.3g} ({self.seconds:.1f}s){extra}"


def _result(name, residual, tol, detail="", strict=True) -> CheckResult:
    ok = residual < tol if strict else residual <= tol
    return CheckResult(name, bool(ok), float(residual), float(tol), detail)


def _spawn(seed: int, k: int) -> list[int]:
    """Independent integer sub-seeds derived from one seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


def cancellation(g: ExperimentGeometry, seed: int = 0) -> CheckResult:
    """Probability-weighted conditional densities add up to the marginal."""
    y = wave.screen_grid(g, 1000)
    worst = 0.0
    for mirrors in (False, True):
        gg = g.with_mirrors(mirrors)
        total = sum(p * wave.conditional_density(d, y, gg) for d, p in detector_probabilities(gg).items())
        worst = max(worst, float(np.max(np.abs(total - wave.marginal_density(y, gg)))))
    return _result("cancellation identity", worst, 1e-12)


def no_signalling(g: ExperimentGeometry, seed: int = 0, n: int = MC_N, bins: int = BINS) -> CheckResult:
    """Screen statistics do not depend on the mirror setting."""
    y = wave.screen_grid(g, 1000)
    analytic = float(np.max(np.abs(wave.marginal_density(y, g.with_mirrors(True))
                                   - wave.marginal_density(y, g.with_mirrors(False)))))
    s_out, s_in = _spawn(seed, 2)
    h_out = detection.unconditioned_histogram(detection.sample_events(g.with_mirrors(False), n, s_out), bins)
    h_in = detection.unconditioned_histogram(detection.sample_events(g.with_mirrors(True), n, s_in), bins)
    l1 = detection.l1_distance(h_out, h_in)
    bound = detection.l1_noise_bound(detection.expected_bin_probabilities(g, h_out.bin_edges), n, n)
    ok = analytic < 1e-12 and l1 < bound
    return CheckResult("no-signalling", ok, l1, bound, f"analytic residual={analytic:.3g}")


def fringe_statistics(g: ExperimentGeometry, seed: int = 0, n: int = MC_N, bins: int = BINS) -> CheckResult:
    """Sampled visibilities and D1/D2 anti-correlation at N events."""
    g = g.with_mirrors(False)
    events = detection.sample_events(g, n, seed)
    hists = detection.coincidence_histograms(events, g, bins)
    edges = hists[DetectorId.D1].bin_edges
    dev = {}
    for det in (DetectorId.D1, DetectorId.D2):
        analytic = detection.visibility_of(detection.expected_bin_probabilities(g, edges, det))
        dev[det] = abs(detection.fringe_visibility(hists[det]) - analytic)
    clump_vis = {d: detection.fringe_visibility(hists[d]) for d in (DetectorId.D3, DetectorId.D4)}
    clump = detection.expected_bin_probabilities(g, edges)
    m = len(clump)
    central = slice(m // 4, m - m // 4)
    osc1 = (hists[DetectorId.D1].normalized() - clump)[central]
    osc2 = (hists[DetectorId.D2].normalized() - clump)[central]
    r = float(np.corrcoef(osc1, osc2)[0, 1])
    worst_dev = max(dev.values())
    ok = worst_dev < 0.05 and max(clump_vis.values()) < 0.1 and r < -0.9
    detail = (f"D1/D2 visibility deviation {dev[DetectorId.D1]:.3f}/{dev[DetectorId.D2]:.3f} (<0.05), "
              f"D3/D4 visibility {clump_vis[DetectorId.D3]:.3f}/{clump_vis[DetectorId.D4]:.3f} (<0.1), "
              f"Pearson r {r:.3f} (<-0.9)")
    return CheckResult("coincidence fringes", ok, worst_dev, 0.05, detail)


def eraser_unitarity(g: ExperimentGeometry, seed: int = 0, n: int = 10_000) -> CheckResult:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    d1, d2 = wave.eraser_transform(a, b)
    res = np.abs(np.abs(d1) ** 2 + np.abs(d2) ** 2 - np.abs(a) ** 2 - np.abs(b) ** 2)
    return _result("eraser unitarity", float(res.max()), 1e-12)


def bohm_timelines(g: ExperimentGeometry) -> dict[str, bohm.Timeline]:
    """Eraser before launch, after landing, and half way through the flight."""
    t = g.flight_time
    return {
        "eraser-first": bohm.Timeline(0.0, t),
        "eraser-after": bohm.Timeline(t + g.idler_delay, t),
        "mid-flight": bohm.Timeline(0.5 * t, t),
    }


def equivariance(g: ExperimentGeometry, seed: int = 0, n: int = BOHM_N, bins: int = BOHM_BINS) -> CheckResult:
    """Weighted trajectory endpoints follow the analytic screen densities.

    Eraser-first: the D1 and D2 subsets against their fringe densities.
    Eraser-after and mid-flight: the whole ensemble against the clump.
    """
    g = g.with_mirrors(False)
    edges = np.linspace(*g.screen_extent, bins + 1)
    clump = detection.expected_bin_probabilities(g, edges)
    scores = {}
    seeds = _spawn(seed, 3)
    for (label, tl), s in zip(bohm_timelines(g).items(), seeds):
        ens = bohm.sample_ensemble(n, g, tl, s)
        if label == "eraser-first":
            for det in (DetectorId.D1, DetectorId.D2):
                ref = detection.expected_bin_probabilities(g, edges, det)
                scores[f"{label} {det.value}"] = float(np.abs(ens.endpoint_histogram(edges, det) - ref).sum())
        else:
            scores[label] = float(np.abs(ens.endpoint_histogram(edges) - clump).sum())
    worst = max(scores.values())
    detail = ", ".join(f"{k} L1={v:.4f}" for k, v in scores.items())
    return _result("trajectory equivariance", worst, 0.05, detail)


def past_immutability(g: ExperimentGeometry, seed: int = 0, n: int = 200) -> CheckResult:
    """Points before the switch equal those of a never-switched run, bit for bit."""
    g = g.with_mirrors(False)
    t_sw = 0.5 * g.flight_time
    switched = bohm.sample_ensemble(n, g, bohm.Timeline(t_sw), seed, record_every=1)
    straight = bohm.sample_ensemble(n, g, bohm.Timeline(math.inf), seed, record_every=1)
    mismatched = 0
    for a, b in zip(switched.trajectories, straight.trajectories):
        pre = a.times < t_sw
        k = int(pre.sum())
        same = (k <= len(b.times) and np.array_equal(a.times[pre], b.times[:k])
                and np.array_equal(a.positions[pre], b.positions[:k]))
        mismatched += not same
    return _result("past immutability", mismatched, 0, f"{mismatched} of {n} trajectories differ", strict=False)


def _phase_gradient_fd(x, y, g, coeffs, h=1e-5):
    def S(xx, yy):
        return bohm.effective_phase(xx, yy, g, coeffs)

    gx = bohm.unwrap_to(S(x + h, y) - S(x - h, y), 0.0) / (2 * h)
    gy = bohm.unwrap_to(S(x, y + h) - S(x, y - h), 0.0) / (2 * h)
    return gx, gy


def gradient_check(g: ExperimentGeometry, seed: int = 0, n: int = 1000) -> CheckResult:
    """Analytic guidance velocity against central differences of the phase."""
    rng = np.random.default_rng(seed)
    regimes = [("upper", "pre_eraser"), ("lower", "pre_eraser"),
               ("upper", "post_eraser_to_D1"), ("upper", "post_eraser_to_D2")]
    worst = 0.0
    done = 0
    while done < n:
        x = rng.uniform(0.5, g.screen_distance)
        y = rng.uniform(*g.screen_extent)
        branch, stage = regimes[done % len(regimes)]
        coeffs = bohm.wave_coefficients(branch, stage)
        p1, p2 = wave.field_amplitudes(x, y, g)
        amp = abs(coeffs[0] * p1 + coeffs[1] * p2)
        if amp < 1e-3 * (abs(p1) + abs(p2)):
            continue  # too close to a node for a finite-difference reference
        v = bohm.guidance_velocity(bohm.Configuration((x, y), branch, stage), g)
        ref = np.array(_phase_gradient_fd(x, y, g, coeffs))
        worst = max(worst, float(np.linalg.norm(v - ref) / np.linalg.norm(ref)))
        done += 1
    return _result("guidance gradient", worst, 1e-6)


def bell_model(g: ExperimentGeometry, seed: int = 0, n: int = SHOTS) -> CheckResult:
    """Partial trace, order independence and both correlation tables."""
    s = bell.bell_state()
    trace_res = float(np.max(np.abs(bell.partial_trace_idler(s).matrix - 0.5 * np.eye(2))))
    worst_order = 0.0
    z_max = 0.0
    seeds = iter(_spawn(seed, 8))
    expected = {"diagonal": np.array([[0.5, 0.0], [0.0, 0.5]]), "computational": np.full((2, 2), 0.25)}
    for basis, p in expected.items():
        a = bell.joint_distribution(s, "diagonal", basis, "signal_first")
        b = bell.joint_distribution(s, "diagonal", basis, "idler_first")
        worst_order = max(worst_order, float(np.max(np.abs(a - b))), float(np.max(np.abs(a - p))))
        for order in ("signal_first", "idler_first"):
            counts = bell.sample_joint(s, n, "diagonal", basis, next(seeds), order)
            z_max = max(z_max, _max_z(counts, p, n))
        table = bell.correlation_table(n, basis, next(seeds))
        z_max = max(z_max, _max_z(table.counts, p, n))
    ok = trace_res < 1e-12 and worst_order < 1e-12 and z_max < 3
    detail = f"partial trace residual {trace_res:.2g}, analytic order residual {worst_order:.2g}"
    return CheckResult("bell model", ok, z_max, 3.0, detail)


def _max_z(counts, p, n) -> float:
    """Largest cell deviation in binomial standard deviations; a zero cell must stay empty."""
    z = 0.0
    for c, q in zip(np.ravel(counts), np.ravel(p)):
        if q == 0:
            z = max(z, math.inf if c else 0.0)
        else:
            z = max(z, abs(c - n * q) / math.sqrt(n * q * (1 - q)))
    return z


def structural_correspondence(g: ExperimentGeometry, seed: int = 0) -> CheckResult:
    ok, pairs = bell.structural_correspondence(g.with_mirrors(False))
    mismatches = sum(a != b for a, b in pairs.values())
    detail = ", ".join(f"{d}->{bell.WAVE_TO_QUBIT[d]} {a:+d}/{b:+d}" for d, (a, b) in pairs.items())
    return _result("wave-qubit correspondence", mismatches, 0, detail, strict=False)


def convergence(g: ExperimentGeometry, seed: int = 0, n: int = 100) -> CheckResult:
    """Halving dt moves no endpoint of a reached trajectory by 1e-4 or more."""
    g = g.with_mirrors(False)
    worst = 0.0
    for tl in bohm_timelines(g).values():
        a = bohm.sample_ensemble(n, g, tl, seed)
        b = bohm.sample_ensemble(n, g, tl, seed, dt=bohm.default_dt(g) / 2)
        ok = np.isfinite(a.weights()) & np.isfinite(b.weights())
        worst = max(worst, float(np.max(np.abs(a.endpoints() - b.endpoints())[ok])))
    return _result("step convergence", worst, 1e-4)


def uniqueness(g: ExperimentGeometry, seed: int = 0, n: int = 20) -> CheckResult:
    """Restarting from a recorded configuration reproduces the rest of the path."""
    g = g.with_mirrors(False)
    tl = bohm.Timeline(0.5 * g.flight_time)
    ens = bohm.sample_ensemble(n, g, tl, seed, record_every=1)
    worst = 0.0
    for tr in ens.trajectories:
        if not np.isfinite(tr.weight):
            continue
        k = len(tr.times) // 3
        start = list(tr.configurations())[k]
        again = bohm.integrate_trajectory(start, g, tl, u=tr.outcome_draw)
        worst = max(worst, float(np.max(np.abs(again.positions[-1] - tr.positions[-1]))))
    return _result("trajectory uniqueness", worst, 1e-8)


def straightness(g: ExperimentGeometry, seed: int = 0, n: int = 50) -> CheckResult:
    """Which-path trajectories keep their launch direction."""
    g = g.with_mirrors(False)
    ens = bohm.sample_ensemble(n, g, bohm.Timeline(math.inf), seed, record_every=1)
    worst = 0.0
    for tr in ens.trajectories:
        ys = g.slit_upper_y if tr.idler_branch == "upper" else g.slit_lower_y
        ang = np.arctan2(tr.positions[:, 1] - ys, tr.positions[:, 0])
        worst = max(worst, float(np.ptp(ang)))
    return _result("which-path straightness", worst, 1e-10)


# (criterion number or None, function)
SUITE: list[tuple[Optional[int], Callable[..., CheckResult]]] = [
    (1, cancellation),
    (2, no_signalling),
    (3, fringe_statistics),
    (4, eraser_unitarity),
    (5, equivariance),
    (6, past_immutability),
    (7, gradient_check),
    (8, bell_model),
    (9, structural_correspondence),
    (None, convergence),
    (None, uniqueness),
    (None, straightness),
]


def timed(fn: Callable[..., CheckResult], g: ExperimentGeometry, seed: int) -> CheckResult:
    t0 = time.perf_counter()
    r = fn(g, seed)
    return replace(r, seconds=time.perf_counter() - t0)


def run_checks(g: Optional[ExperimentGeometry] = None, seed: int = 0,
               report: Optional[Callable[[CheckResult], None]] = None) -> list[CheckResult]:
    g = default_geometry() if g is None else g
    out = []
    for _, fn in SUITE:
        r = timed(fn, g, seed)
        if report:
            report(r)
        out.append(r)
    return out
