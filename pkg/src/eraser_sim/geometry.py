"""Experiment configuration: slit layout, screen, idler arm and detectors."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError


class DetectorId(str, enum.Enum):
    """D0 is the signal screen, D1/D2 sit behind the eraser, D3/D4 record which path."""

    D0 = "D0"
    D1 = "D1"
    D2 = "D2"
    D3 = "D3"
    D4 = "D4"

    @property
    def is_eraser(self) -> bool:
        return self in (DetectorId.D1, DetectorId.D2)

    @property
    def is_which_path(self) -> bool:
        return self in (DetectorId.D3, DetectorId.D4)

    @classmethod
    def parse(cls, value: "DetectorId | str") -> "DetectorId":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ConfigError(f"unknown detector {value!r}") from None


IDLER_DETECTORS = (DetectorId.D1, DetectorId.D2, DetectorId.D3, DetectorId.D4)


@dataclass(frozen=True)
class ExperimentGeometry:
    """Two point-like slits at x = 0 and a screen line at x = screen_distance.

    Lengths share one arbitrary unit; ``wave_number`` is in radians per unit.
    ``idler_delay`` is the extra flight time of the idler, only its sign
    relative to the signal flight matters. ``mirrors_in`` swaps the two
    which-path beamsplitters for full mirrors so the eraser is never reached.
    """

    wave_number: float = 2 * math.pi
    slit_upper_y: float = 1.5
    slit_lower_y: float = -1.5
    screen_distance: float = 50.0
    screen_extent: tuple[float, float] = (-25.0, 25.0)
    idler_delay: float = 8.0
    mirrors_in: bool = False
    bs_reflectivity: float = 0.5

    def __post_init__(self) -> None:
        extent = tuple(float(v) for v in self.screen_extent)
        if len(extent) != 2:
            raise ConfigError("screen_extent must be [y_min, y_max]")
        object.__setattr__(self, "screen_extent", extent)
        nums = {
            "wave_number": self.wave_number,
            "slit_upper_y": self.slit_upper_y,
            "slit_lower_y": self.slit_lower_y,
            "screen_distance": self.screen_distance,
            "idler_delay": self.idler_delay,
            "bs_reflectivity": self.bs_reflectivity,
        }
        for name, value in nums.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, float(value))
        if not all(math.isfinite(v) for v in extent):
            raise ConfigError("screen_extent must be finite")
        if not isinstance(self.mirrors_in, bool):
            raise ConfigError("mirrors_in must be a boolean")
        if self.wave_number <= 0:
            raise ConfigError("wave_number must be > 0")
        if self.screen_distance <= 0:
            raise ConfigError("screen_distance must be > 0")
        if self.slit_upper_y <= self.slit_lower_y:
            raise ConfigError("slit_upper_y must exceed slit_lower_y")
        if extent[0] >= extent[1]:
            raise ConfigError("screen_extent must satisfy y_min < y_max")
        if self.idler_delay < 0:
            raise ConfigError("idler_delay must be >= 0")
        if self.bs_reflectivity != 0.5:
            raise ConfigError("bs_reflectivity is fixed at 0.5")

    @property
    def slit_separation(self) -> float:
        return self.slit_upper_y - self.slit_lower_y

    @property
    def wavelength(self) -> float:
        return 2 * math.pi / self.wave_number

    @property
    def flight_time(self) -> float:
        """On-axis slit-to-screen time at speed k (m = hbar = 1)."""
        return self.screen_distance / self.wave_number

    def with_mirrors(self, mirrors_in: bool) -> "ExperimentGeometry":
        return replace(self, mirrors_in=mirrors_in)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["screen_extent"] = list(self.screen_extent)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentGeometry":
        if not isinstance(data, Mapping):
            raise ConfigError("geometry must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown geometry fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "screen_extent" in kwargs:
            ext = kwargs["screen_extent"]
            if not isinstance(ext, (list, tuple)) or len(ext) != 2:
                raise ConfigError("screen_extent must be a two-element list")
            for v in ext:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError("screen_extent entries must be numbers")
            kwargs["screen_extent"] = tuple(ext)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentGeometry":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentGeometry":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_json(text)


def default_geometry() -> ExperimentGeometry:
    """The geometry stored in the bundled ``default.json``."""
    text = resources.files("eraser_sim").joinpath("data/default.json").read_text()
    data = json.loads(text)
    return ExperimentGeometry.from_dict(data.get("geometry", data))


def detector_probabilities(g: ExperimentGeometry) -> dict[DetectorId, float]:
    """Probability of each idler detector firing.

    With beamsplitters each which-path detector takes half of one branch
    (1/4 overall) and the eraser splits the remaining half evenly. With
    mirrors in, the idler always ends at D3 or D4.
    """
    if g.mirrors_in:
        return {DetectorId.D3: 0.5, DetectorId.D4: 0.5}
    r = g.bs_reflectivity
    return {
        DetectorId.D1: (1 - r) / 2,
        DetectorId.D2: (1 - r) / 2,
        DetectorId.D3: r / 2,
        DetectorId.D4: r / 2,
    }


def reachable_detectors(g: ExperimentGeometry) -> tuple[DetectorId, ...]:
    return tuple(detector_probabilities(g))
