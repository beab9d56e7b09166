"""``eraser-sim``: command-line front end.

Configuration comes from the bundled ``default.json``, then an optional
``--config`` file, then individual flags, each layer overriding the last.
The merged configuration is validated before any computation starts.

Exit status: 0 on success, 1 when a computation fails (or a check does not
pass), 2 on an invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from . import bell, bohm, checks, detection, wave
from .errors import ComputeError, ConfigError
from .geometry import ExperimentGeometry

MODES = ("density", "sample", "trajectories", "bell", "check")
# used when the configuration leaves n unset
DEFAULT_N = {"density": 1, "sample": 100_000, "trajectories": 40, "bell": 10_000, "check": 1}
TRAJECTORY_RECORD_EVERY = 4


@dataclass(frozen=True)
class TimelineConfig:
    t_eraser: float = 0.0
    t_screen: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    geometry: ExperimentGeometry = field(default_factory=ExperimentGeometry)
    mode: str = "density"
    n: Optional[int] = None
    seed: int = 0
    bins: int = 50
    dt: Optional[float] = None
    timeline: TimelineConfig = field(default_factory=TimelineConfig)
    output_path: str = "out"
    grid_points: int = 1001

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("seed", "bins", "grid_points"):
            _require_int(name, getattr(self, name))
        if self.n is not None:
            _require_int("n", self.n)
            if self.n < 1:
                raise ConfigError("n must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.bins < 2:
            raise ConfigError("bins must be >= 2")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be >= 2")
        if self.dt is not None:
            _require_real("dt", self.dt)
            if not self.dt > 0:
                raise ConfigError("dt must be > 0")
        _require_real("timeline.t_eraser", self.timeline.t_eraser, finite=False)
        if math.isnan(self.timeline.t_eraser):
            raise ConfigError("timeline.t_eraser must not be NaN")
        if self.timeline.t_screen is not None:
            _require_real("timeline.t_screen", self.timeline.t_screen)
            if not self.timeline.t_screen > 0:
                raise ConfigError("timeline.t_screen must be > 0")
        if not isinstance(self.output_path, str) or not self.output_path:
            raise ConfigError("output_path must be a non-empty string")
        if self.mode == "bell" and self.resolved_n() < 1:
            raise ConfigError("bell mode needs n >= 1")
        return self

    def resolved_n(self) -> int:
        return DEFAULT_N[self.mode] if self.n is None else self.n

    def bohm_timeline(self) -> bohm.Timeline:
        return bohm.Timeline(self.timeline.t_eraser, self.timeline.t_screen)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["geometry"] = self.geometry.to_dict()
        return d


def _require_int(name: str, v: Any) -> None:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer, got {v!r}")


def _require_real(name: str, v: Any, finite: bool = True) -> None:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    if finite and not math.isfinite(v):
        raise ConfigError(f"{name} must be finite")


_TOP_FIELDS = set(RunConfig.__dataclass_fields__)


def _merge(base: RunConfig, data: Mapping[str, Any]) -> RunConfig:
    """Overlay a JSON-style mapping onto ``base``; unknown keys are rejected."""
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - _TOP_FIELDS
    if unknown:
        raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
    kw: dict[str, Any] = {k: v for k, v in data.items() if k not in ("geometry", "timeline")}
    if "geometry" in data:
        geo = data["geometry"]
        if not isinstance(geo, Mapping):
            raise ConfigError("geometry must be a JSON object")
        kw["geometry"] = ExperimentGeometry.from_dict({**base.geometry.to_dict(), **geo})
    if "timeline" in data:
        tl = data["timeline"]
        if not isinstance(tl, Mapping):
            raise ConfigError("timeline must be a JSON object")
        extra = set(tl) - {"t_eraser", "t_screen"}
        if extra:
            raise ConfigError(f"unknown timeline fields: {sorted(extra)}")
        kw["timeline"] = replace(base.timeline, **tl)
    return replace(base, **kw)


def load_default() -> RunConfig:
    text = resources.files("eraser_sim").joinpath("data/default.json").read_text()
    return _merge(RunConfig(), json.loads(text))


def load_config(path: str | Path, base: Optional[RunConfig] = None) -> RunConfig:
    base = load_default() if base is None else base
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return _merge(base, data)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are configuration errors
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eraser-sim", description="Delayed-choice quantum eraser simulator.")
    p.add_argument("mode_pos", nargs="?", choices=MODES, metavar="MODE",
                   help=f"one of {', '.join(MODES)}")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--n", type=int, help="events, trajectories per timeline, or shots")
    p.add_argument("--seed", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--dt", type=float, help="trajectory time step")
    p.add_argument("--t-eraser", type=float, dest="t_eraser", help="idler arrival time at the eraser")
    p.add_argument("--mirrors-in", action=argparse.BooleanOptionalAction, default=None,
                   help="replace the which-path beamsplitters by mirrors")
    p.add_argument("--out", metavar="DIR", help="output directory")
    return p


def config_from_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = load_default()
    if args.config:
        cfg = load_config(args.config, cfg)
    if args.mode_pos and args.mode and args.mode_pos != args.mode:
        raise ConfigError(f"conflicting modes {args.mode_pos!r} and {args.mode!r}")
    mode = args.mode_pos or args.mode
    if mode:
        cfg = replace(cfg, mode=mode)
    for name in ("n", "seed", "bins", "dt"):
        v = getattr(args, name)
        if v is not None:
            cfg = replace(cfg, **{name: v})
    if args.t_eraser is not None:
        cfg = replace(cfg, timeline=replace(cfg.timeline, t_eraser=args.t_eraser))
    if args.mirrors_in is not None:
        cfg = replace(cfg, geometry=cfg.geometry.with_mirrors(args.mirrors_in))
    if args.out:
        cfg = replace(cfg, output_path=args.out)
    return cfg.validate()


# -- modes -------------------------------------------------------------------

def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_density(cfg: RunConfig) -> list[Path]:
    y, profiles = wave.density_profiles(cfg.geometry, cfg.grid_points)
    out = _outdir(cfg)
    paths = []
    for name, d in profiles.items():
        p = out / f"{name}.csv"
        wave.write_density_csv(p, y, d)
        paths.append(p)
    return paths


def run_sample(cfg: RunConfig) -> list[Path]:
    g = cfg.geometry
    events = detection.sample_events(g, cfg.resolved_n(), cfg.seed)
    hists = detection.coincidence_histograms(events, g, cfg.bins)
    out = _outdir(cfg)
    paths = []
    for det, h in hists.items():
        p = out / f"{det.value}_hist.csv"
        detection.write_histogram_csv(p, h)
        paths.append(p)
    p = out / "unconditioned_hist.csv"
    detection.write_histogram_csv(p, detection.unconditioned_histogram(events, cfg.bins))
    paths.append(p)
    p = out / "summary.json"
    detection.write_summary_json(p, hists)
    paths.append(p)
    return paths


def trajectory_timelines(cfg: RunConfig) -> dict[str, bohm.Timeline]:
    """The three standard timelines, plus the configured one if it is different."""
    g = cfg.geometry
    t_screen = cfg.timeline.t_screen if cfg.timeline.t_screen is not None else g.flight_time
    std = {
        "eraser_first": bohm.Timeline(0.0, t_screen),
        "eraser_after": bohm.Timeline(t_screen + g.idler_delay, t_screen),
        "mid_flight": bohm.Timeline(0.5 * t_screen, t_screen),
    }
    own = bohm.Timeline(cfg.timeline.t_eraser, t_screen)
    if own not in std.values():
        std["configured"] = own
    return std


def run_trajectories(cfg: RunConfig) -> list[Path]:
    g = cfg.geometry
    n = cfg.resolved_n()
    out = _outdir(cfg)
    paths = []
    for label, tl in trajectory_timelines(cfg).items():
        ens = bohm.sample_ensemble(n, g, tl, cfg.seed, dt=cfg.dt, record_every=TRAJECTORY_RECORD_EVERY)
        p = out / f"trajectories_{label}.csv"
        bohm.write_trajectories_csv(p, ens.trajectories)
        paths.append(p)
        p = out / f"trajectories_{label}_summary.json"
        bohm.write_ensemble_summary(p, ens, g, cfg.bins)
        paths.append(p)
    return paths


def run_bell(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    paths = []
    for basis in bell.BASES:
        table = bell.correlation_table(cfg.resolved_n(), basis, cfg.seed)
        p = out / f"bell_{basis}.json"
        bell.write_correlation_json(p, table)
        paths.append(p)
    return paths


def run_check(cfg: RunConfig) -> tuple[bool, Path]:
    results = checks.run_checks(cfg.geometry, cfg.seed, report=lambda r: print(r.line(), flush=True))
    out = _outdir(cfg)
    p = out / "check_report.json"
    rows = [{"name": r.name, "passed": r.passed, "residual": r.residual,
             "tolerance": r.tolerance, "detail": r.detail} for r in results]
    p.write_text(json.dumps({"seed": cfg.seed, "checks": rows}, indent=2) + "\n")
    passed = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return passed, p


def run(cfg: RunConfig) -> int:
    cfg.validate()
    if cfg.mode == "check":
        passed, _ = run_check(cfg)
        return 0 if passed else 1
    runner = {"density": run_density, "sample": run_sample,
              "trajectories": run_trajectories, "bell": run_bell}[cfg.mode]
    for p in runner(cfg):
        print(p)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = config_from_args(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"eraser-sim: configuration error: {exc}", file=sys.stderr)
        return 2
    except ComputeError as exc:
        print(f"eraser-sim: computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
