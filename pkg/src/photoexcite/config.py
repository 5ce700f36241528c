"""Versioned TOML scenario schema.

A config file holds ``schema_version = 1`` and one or more ``[[scenario]]``
tables.  Natural units (gamma = 1, t0 = 0) are the default.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import DEFAULT_BANDWIDTH_FACTOR, DEFAULT_N_MODES, MIN_BANDWIDTH_FACTOR, MIN_N_MODES

SCHEMA_VERSION = 1

OUTPUT_KINDS = ("trajectory", "spectrum", "temporal-profile", "variance-map", "optimization")


class ConfigError(ValueError):
    """Schema violation; ``str()`` gives one path-qualified line per problem."""

    def __init__(self, source: str, problems: list[str]):
        self.source = source
        self.problems = problems
        super().__init__("\n".join(f"{source}: {p}" for p in problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AtomSpec(_Strict):
    gamma: float = Field(1.0, gt=0, allow_inf_nan=False)
    t0: float = Field(0.0, allow_inf_nan=False)
    omega0: Optional[float] = Field(None, gt=0, allow_inf_nan=False)


class GridSpec(_Strict):
    bandwidth_factor: float = Field(DEFAULT_BANDWIDTH_FACTOR, ge=MIN_BANDWIDTH_FACTOR, allow_inf_nan=False)
    n_modes: int = Field(DEFAULT_N_MODES, ge=MIN_N_MODES)

    @field_validator("n_modes")
    @classmethod
    def _odd(cls, v):
        if v % 2 == 0:
            raise ValueError("n_modes must be odd so that one mode sits on resonance")
        return v


class _Pulse(_Strict):
    pass


class IdealPulse(_Pulse):
    kind: Literal["ideal"]
    delay: float = 0.0


class ReflectedPulse(_Pulse):
    kind: Literal["reflected"]
    delay: float = 0.0


class GaussianPulse(_Pulse):
    kind: Literal["gaussian"]
    sigma: float = Field(gt=0, allow_inf_nan=False)
    delay: float = 0.0


class ExcitedAtomPulse(_Pulse):
    kind: Literal["excited-atom"]


class VacuumPulse(_Pulse):
    kind: Literal["vacuum"]


class TruncatedExponentialPulse(_Pulse):
    """Rising exponential cut off ``duration`` before t0; the cut weight is lost."""

    kind: Literal["truncated-exponential"]
    duration: float = Field(ge=0, allow_inf_nan=False)


class EnvelopePulse(_Pulse):
    """Catalog temporal envelope expanded on the grid."""

    kind: Literal["envelope"]
    shape: Literal["rising-exponential", "decaying-exponential", "gaussian", "two-sided-exponential"]
    sigma: Optional[float] = Field(None, gt=0)
    rise: Optional[float] = Field(None, gt=0)
    fall: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _needs(self):
        need = {"gaussian": ("sigma",), "two-sided-exponential": ("rise", "fall")}.get(self.shape, ())
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"shape {self.shape!r} requires {', '.join(missing)}")
        return self


PulseSpec = Annotated[
    Union[IdealPulse, ReflectedPulse, GaussianPulse, ExcitedAtomPulse, VacuumPulse,
          TruncatedExponentialPulse, EnvelopePulse],
    Field(discriminator="kind"),
]


class WindowSpec(_Strict):
    t_start: float = Field(allow_inf_nan=False)
    t_end: float = Field(allow_inf_nan=False)
    dt: Optional[float] = Field(None, gt=0)
    sample_every: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _order(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        return self


class ProfileSpec(_Strict):
    t_start: float
    t_end: float
    n: int = Field(501, ge=2)

    @model_validator(mode="after")
    def _order(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        return self


class VarianceSpec(_Strict):
    """Normalized far-field variance on a (t, r, theta) tensor grid."""

    t_start: float
    t_end: float
    n_t: int = Field(101, ge=2)
    r: list[Annotated[float, Field(gt=0)]] = Field(min_length=1)
    theta: list[float] = Field(default_factory=lambda: [math.pi / 2], min_length=1)
    e_dot_etheta: float = Field(1.0, ge=-1.0, le=1.0)


class Bounds(_Strict):
    min: float = Field(allow_inf_nan=False)
    max: float = Field(allow_inf_nan=False)

    @model_validator(mode="after")
    def _order(self):
        if not self.min < self.max:
            raise ValueError(f"min ({self.min}) must be less than max ({self.max})")
        return self


class NumericGridSpec(_Strict):
    bandwidth_factor: float = Field(ge=MIN_BANDWIDTH_FACTOR)
    n_modes: int = Field(ge=MIN_N_MODES)
    dt: Optional[float] = Field(None, gt=0)


class OptimizeSpec(_Strict):
    family: Literal["gaussian-width", "truncated-exponential-duration", "arrival-offset", "two-sided-exponential"]
    bounds: list[Bounds] = Field(min_length=1)
    n_points: int = Field(21, ge=3)
    objective_mode: Literal["analytic-quadrature", "numeric-propagation"] = "analytic-quadrature"
    refine: bool = True
    interaction_start: float = -3.0
    numeric_grid: Optional[NumericGridSpec] = None

    @model_validator(mode="after")
    def _dims(self):
        want = 2 if self.family == "two-sided-exponential" else 1
        if len(self.bounds) != want:
            raise ValueError(f"family {self.family!r} takes {want} bounds entr{'y' if want == 1 else 'ies'}")
        return self


class Scenario(_Strict):
    name: str = Field(pattern=r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")
    description: str = ""
    atom: AtomSpec = AtomSpec()
    grid: GridSpec = GridSpec()
    pulse: Optional[PulseSpec] = None
    window: Optional[WindowSpec] = None
    outputs: list[Literal[OUTPUT_KINDS]] = Field(default_factory=list)
    profile: Optional[ProfileSpec] = None
    variance: Optional[VarianceSpec] = None
    optimize: Optional[OptimizeSpec] = None

    @model_validator(mode="after")
    def _consistent(self):
        outs = set(self.outputs)
        if len(outs) != len(self.outputs):
            raise ValueError("outputs lists an entry twice")
        if outs & {"trajectory", "spectrum", "temporal-profile"} and self.pulse is None:
            raise ValueError("trajectory/spectrum/temporal-profile outputs need a [pulse] table")
        if "trajectory" in outs and self.window is None:
            raise ValueError("trajectory output needs a [window] table")
        if "temporal-profile" in outs and self.profile is None:
            raise ValueError("temporal-profile output needs a [profile] table")
        if "variance-map" in outs:
            if self.variance is None:
                raise ValueError("variance-map output needs a [variance] table")
            if self.atom.omega0 is None:
                raise ValueError("variance-map output needs atom.omega0")
        if "optimization" in outs and self.optimize is None:
            raise ValueError("optimization output needs an [optimize] table")
        return self

    def digest(self, version: str) -> str:
        """sha256 over the artifact version and the canonical scenario JSON."""
        payload = json.dumps({"version": version, "scenario": self.model_dump(mode="json")},
                             sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


class ConfigFile(_Strict):
    schema_version: Literal[1]
    scenario: list[Scenario] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique(self):
        names = [s.name for s in self.scenario]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise ValueError(f"duplicate scenario names: {', '.join(dup)}")
        return self


def _loc(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += ("." if out else "") + str(part)
    return out or "<root>"


def parse_config(data: dict, source: str = "<config>") -> ConfigFile:
    try:
        return ConfigFile.model_validate(data)
    except ValidationError as exc:
        problems = []
        for err in exc.errors():
            # drop discriminator tags pydantic inserts into union paths
            loc = [p for p in err["loc"] if not (isinstance(p, str) and p in _PULSE_TAGS)]
            problems.append(f"{_loc(loc)}: {err['msg']}")
        raise ConfigError(source, problems) from None


_PULSE_TAGS = {"ideal", "reflected", "gaussian", "excited-atom", "vacuum", "truncated-exponential", "envelope"}


def load_config(path: str | Path) -> ConfigFile:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), [f"<toml>: {exc}"]) from None
    return parse_config(data, str(path))
