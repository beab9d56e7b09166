"""Monte Carlo joint detections and coincidence histograms.

Randomness: numpy's PCG64 bit generator, seeded through ``SeedSequence``.
Events are produced in fixed-size chunks, chunk ``i`` drawing from child
``i`` of ``SeedSequence(seed)``, so the stream depends only on the seed and
the geometry, never on the number of workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import stats

from . import wave
from .errors import ConfigError, DomainError
from .geometry import IDLER_DETECTORS, DetectorId, ExperimentGeometry, detector_probabilities

GRID_POINTS = 4096
CHUNK_SIZE = 1 << 16

# integer codes used in event arrays
DETECTOR_CODE = {d: i for i, d in enumerate(IDLER_DETECTORS, start=1)}
CODE_DETECTOR = {i: d for d, i in DETECTOR_CODE.items()}


@dataclass(frozen=True)
class JointEvent:
    screen_y: float
    idler_detector: DetectorId
    signal_time: float
    idler_time: float


@dataclass
class EventBatch:
    """Column-oriented store of joint events."""

    screen_y: np.ndarray
    detector_code: np.ndarray
    signal_time: np.ndarray
    idler_time: np.ndarray
    extent: tuple[float, float]

    def __len__(self) -> int:
        return len(self.screen_y)

    def __iter__(self) -> Iterator[JointEvent]:
        for y, c, ts, ti in zip(self.screen_y, self.detector_code, self.signal_time, self.idler_time):
            yield JointEvent(float(y), CODE_DETECTOR[int(c)], float(ts), float(ti))

    def mask(self, det) -> np.ndarray:
        return self.detector_code == DETECTOR_CODE[DetectorId.parse(det)]

    def detector_counts(self) -> dict[DetectorId, int]:
        counts = np.bincount(self.detector_code, minlength=len(IDLER_DETECTORS) + 1)
        return {d: int(counts[c]) for d, c in DETECTOR_CODE.items()}

    @classmethod
    def concatenate(cls, parts: Sequence["EventBatch"]) -> "EventBatch":
        if not parts:
            raise ValueError("nothing to concatenate")
        return cls(
            np.concatenate([p.screen_y for p in parts]),
            np.concatenate([p.detector_code for p in parts]),
            np.concatenate([p.signal_time for p in parts]),
            np.concatenate([p.idler_time for p in parts]),
            parts[0].extent,
        )


@dataclass
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int = field(default=-1)

    def __post_init__(self) -> None:
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.bin_edges.ndim != 1 or len(self.bin_edges) != len(self.counts) + 1:
            raise ValueError("need len(bin_edges) == len(counts) + 1")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise ValueError("negative counts")
        s = int(self.counts.sum())
        if self.total == -1:
            self.total = s
        elif self.total != s:
            raise ValueError(f"total {self.total} != sum(counts) {s}")

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def normalized(self) -> np.ndarray:
        """Counts as fractions of the total (zeros if empty)."""
        if self.total == 0:
            return np.zeros(len(self.counts))
        return self.counts / self.total

    def __add__(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValueError("cannot merge histograms with different binning")
        return Histogram(self.bin_edges, self.counts + other.counts)


def _edges(extent: tuple[float, float], bins: int) -> np.ndarray:
    if bins < 2:
        raise ConfigError("bins must be >= 2")
    return np.linspace(extent[0], extent[1], bins + 1)


@lru_cache(maxsize=64)
def _inverse_cdf_table(g: ExperimentGeometry, det: DetectorId, points: int) -> tuple[np.ndarray, np.ndarray]:
    y = wave.screen_grid(g, points)
    d = wave.conditional_density(det, y, g)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(y))])
    cdf /= cdf[-1]
    return cdf, y


def _draw_chunk(g: ExperimentGeometry, n: int, start: int, seed_seq: np.random.SeedSequence, points: int) -> EventBatch:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    return _draw(g, n, start, rng, points)


def _draw(g: ExperimentGeometry, n: int, start: int, rng: np.random.Generator, points: int) -> EventBatch:
    probs = detector_probabilities(g)
    dets = list(probs)
    cum = np.cumsum([probs[d] for d in dets])
    cum[-1] = 1.0
    u_det = rng.random(n)
    u_pos = rng.random(n)
    which = np.searchsorted(cum, u_det, side="right")
    codes = np.empty(n, dtype=np.int8)
    ys = np.empty(n)
    for i, det in enumerate(dets):
        sel = which == i
        codes[sel] = DETECTOR_CODE[det]
        cdf, grid = _inverse_cdf_table(g, det, points)
        ys[sel] = np.interp(u_pos[sel], cdf, grid)
    t_sig = np.arange(start, start + n, dtype=float)
    return EventBatch(ys, codes, t_sig, t_sig + g.idler_delay, g.screen_extent)


def sample_joint_event(g: ExperimentGeometry, rng: np.random.Generator, index: int = 0,
                       grid_points: int = GRID_POINTS) -> JointEvent:
    """Draw one joint detection (idler detector, then screen position)."""
    if grid_points < 2:
        raise ConfigError("empty screen grid")
    return next(iter(_draw(g, 1, index, rng, grid_points)))


def sample_events(g: ExperimentGeometry, n: int, seed: int, grid_points: int = GRID_POINTS,
                  workers: int = 1) -> EventBatch:
    """``n`` joint events; identical output for identical (geometry, n, seed)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if grid_points < 2:
        raise ConfigError("empty screen grid")
    n_chunks = -(-n // CHUNK_SIZE)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK_SIZE, n - i * CHUNK_SIZE) for i in range(n_chunks)]
    jobs = [(g, sizes[i], i * CHUNK_SIZE, children[i], grid_points) for i in range(n_chunks)]
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _draw_chunk(*a), jobs))
    else:
        parts = [_draw_chunk(*a) for a in jobs]
    return EventBatch.concatenate(parts)


def _as_batch(events: EventBatch | Iterable[JointEvent], extent) -> EventBatch:
    if isinstance(events, EventBatch):
        return events
    evs = list(events)
    if extent is None:
        raise ConfigError("extent is required for a plain event iterable")
    return EventBatch(
        np.array([e.screen_y for e in evs], dtype=float),
        np.array([DETECTOR_CODE[e.idler_detector] for e in evs], dtype=np.int8),
        np.array([e.signal_time for e in evs], dtype=float),
        np.array([e.idler_time for e in evs], dtype=float),
        tuple(extent),
    )


def coincidence_histogram(events, det, bins: int, extent=None) -> Histogram:
    """Screen histogram of the events whose idler fired ``det``."""
    batch = _as_batch(events, extent)
    edges = _edges(extent or batch.extent, bins)
    counts, _ = np.histogram(batch.screen_y[batch.mask(det)], edges)
    return Histogram(edges, counts)


def unconditioned_histogram(events, bins: int, extent=None) -> Histogram:
    batch = _as_batch(events, extent)
    edges = _edges(extent or batch.extent, bins)
    counts, _ = np.histogram(batch.screen_y, edges)
    return Histogram(edges, counts)


def smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the output is ``window - 1`` shorter."""
    if window <= 1:
        return np.asarray(values, dtype=float)
    return np.convolve(values, np.ones(window) / window, mode="valid")


def visibility_of(profile, window: int = 5, central_fraction: float = 0.5) -> float:
    """(max - min) / (max + min) of a smoothed profile over its central bins."""
    profile = np.asarray(profile, dtype=float)
    m = len(profile)
    keep = max(window + 1, int(round(m * central_fraction)))
    lo = max(0, (m - keep) // 2)
    central = smooth(profile[lo:lo + keep], window)
    top, bottom = central.max(), central.min()
    if top + bottom <= 0:
        return 0.0
    return float((top - bottom) / (top + bottom))


def fringe_visibility(h: Histogram, window: int = 5, central_fraction: float = 0.5) -> float:
    if h.total <= 0:
        raise DomainError("visibility of an empty histogram")
    return visibility_of(h.counts, window, central_fraction)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def expected_bin_probabilities(g: ExperimentGeometry, edges, det=None) -> np.ndarray:
    """Analytic probability mass per bin, normalized over the binned range.

    Uses 16-point Gauss-Legendre per bin on the closed-form density;
    ``det=None`` gives the marginal.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    y = 0.5 * (b - a) * _GL_X[None, :] + 0.5 * (a + b)
    if det is None:
        d = wave.marginal_density(y, g)
    else:
        d = wave.conditional_density(det, y, g)
    mass = (d * _GL_W[None, :]).sum(axis=1) * 0.5 * (edges[1:] - edges[:-1])
    return mass / mass.sum()


def chi_square_pvalue(h: Histogram, probs, min_expected: float = 5.0) -> float:
    """Goodness-of-fit p-value of ``h`` against bin probabilities ``probs``.

    Adjacent bins are pooled until each expected count reaches
    ``min_expected``.
    """
    probs = np.asarray(probs, dtype=float)
    expected = probs / probs.sum() * h.total
    obs_pool, exp_pool = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(h.counts, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_pool.append(o_acc)
            exp_pool.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 and exp_pool:
        obs_pool[-1] += o_acc
        exp_pool[-1] += e_acc
    if len(exp_pool) < 2:
        raise DomainError("too few populated bins for a chi-square test")
    return float(stats.chisquare(obs_pool, exp_pool).pvalue)


def l1_distance(h1: Histogram, h2: Histogram) -> float:
    return float(np.abs(h1.normalized() - h2.normalized()).sum())


def l1_noise_bound(probs, n1: int, n2: int, sigmas: float = 3.0) -> float:
    """Mean + ``sigmas`` SD of the L1 distance between two independent
    normalized multinomial histograms with common bin probabilities.

    Normal approximation per bin: the difference D_i has variance
    p_i (1 - p_i) (1/n1 + 1/n2); E|D_i| = sd sqrt(2/pi) and
    Var|D_i| = sd^2 (1 - 2/pi). Bin covariances are ignored.
    """
    p = np.asarray(probs, dtype=float)
    p = p / p.sum()
    sd = np.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    mean = math.sqrt(2 / math.pi) * sd.sum()
    var = (1 - 2 / math.pi) * (sd ** 2).sum()
    return float(mean + sigmas * math.sqrt(var))


def coincidence_histograms(events: EventBatch, g: ExperimentGeometry, bins: int) -> dict[DetectorId, Histogram]:
    return {d: coincidence_histogram(events, d, bins) for d in detector_probabilities(g)}


def write_histogram_csv(path: str | Path, h: Histogram) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "count"])
        for c, n in zip(h.bin_centers, h.counts):
            w.writerow([repr(float(c)), int(n)])


def summary(hists: dict[DetectorId, Histogram]) -> list[dict]:
    rows = []
    for det, h in hists.items():
        vis = fringe_visibility(h) if h.total > 0 else None
        rows.append({"detector": det.value, "total": h.total, "visibility": vis})
    return rows


def write_summary_json(path: str | Path, hists: dict[DetectorId, Histogram]) -> None:
    Path(path).write_text(json.dumps(summary(hists), indent=2) + "\n")
