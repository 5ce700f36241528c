"""Derivative-free maximization of the peak excitation probability over pulse families."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import analytic
from .core import (
    AtomParams,
    InvariantError,
    ModeGrid,
    PhotonState,
    TemporalEnvelope,
    build_mode_grid,
    default_grid,
    envelope_state,
    gaussian_envelope,
    gaussian_state,
    ideal_state,
    rising_exponential,
)
from .propagator import PropagatorConfig, max_excitation, peak, propagate

__all__ = [
    "ANALYTIC",
    "NUMERIC",
    "Evaluation",
    "OptimizationResult",
    "PulseFamily",
    "gaussian_width_family",
    "truncated_exponential_family",
    "arrival_offset_family",
    "custom_family",
    "evaluate",
    "scan",
    "refine",
]

log = logging.getLogger(__name__)

ANALYTIC = "analytic-quadrature"
NUMERIC = "numeric-propagation"
OBJECTIVE_MODES = (ANALYTIC, NUMERIC)

Param = tuple[float, ...]


@dataclass(frozen=True, eq=False)
class PulseFamily:
    """A parametrized pulse shape.

    ``envelope(p)`` gives the temporal envelope for the quadrature objective
    (None if the family has no closed envelope), ``state(p, grid)`` builds the
    photon state for propagation and ``window(p)`` the interaction window
    ``(t_in, t_end)``.
    """

    kind: str
    atom: AtomParams
    bounds: tuple[tuple[float, float], ...]
    state: Callable[[Param, ModeGrid], PhotonState]
    window: Callable[[Param], tuple[float, float]]
    envelope: Callable[[Param], TemporalEnvelope] | None = None
    numeric_grid: tuple[float, int] | None = None
    param_names: tuple[str, ...] = ()

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not b:
            raise InvariantError("bounds nonempty")
        for i, (lo, hi) in enumerate(b):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise InvariantError("bounds finite", f"dimension {i}: [{lo}, {hi}]")
            if not lo < hi:
                raise InvariantError("bounds min < max", f"dimension {i}: [{lo}, {hi}]")
        object.__setattr__(self, "bounds", b)

    @property
    def ndim(self) -> int:
        return len(self.bounds)

    def contains(self, p: Param) -> bool:
        return len(p) == self.ndim and all(lo <= x <= hi for x, (lo, hi) in zip(p, self.bounds))

    def default_numeric_grid(self) -> ModeGrid:
        if self.numeric_grid is None:
            return default_grid(self.atom)
        factor, n = self.numeric_grid
        return build_mode_grid(self.atom, factor, n)


def gaussian_width_family(atom: AtomParams, bounds: tuple[float, float] = (0.2, 5.0)) -> PulseFamily:
    """Gaussian mode distribution; the parameter is sigma in units of gamma."""
    g = atom.gamma

    def window(p):
        sigma = p[0] * g
        # |phi|^2 at the start is below 1e-12 of its peak
        return atom.t0 - 7.5 / sigma, atom.t0 + math.sqrt(2.0) / sigma + 4.0 / g

    return PulseFamily(
        "gaussian-width", atom, (bounds,),
        state=lambda p, grid: gaussian_state(grid, atom, p[0] * g),
        window=window,
        envelope=lambda p: gaussian_envelope(atom, p[0] * g),
        # narrow spectrum: a modest band suffices and keeps long windows affordable
        numeric_grid=(100.0, 2001),
        param_names=("sigma",),
    )


def truncated_exponential_family(atom: AtomParams, bounds: tuple[float, float] = (0.0, 8.0)) -> PulseFamily:
    """Time-reversed pulse with interaction duration T = p/gamma before t0."""
    g = atom.gamma
    return PulseFamily(
        "truncated-exponential-duration", atom, (bounds,),
        state=lambda p, grid: ideal_state(grid, atom),
        window=lambda p: (atom.t0 - p[0] / g, atom.t0 + 2.0 / g),
        envelope=lambda p: rising_exponential(atom),
        param_names=("gamma_T",),
    )


def arrival_offset_family(atom: AtomParams, bounds: tuple[float, float] = (-2.0, 2.0),
                          interaction_start: float = -3.0) -> PulseFamily:
    """Time-reversed pulse whose sharp edge arrives p/gamma after t0.

    The interaction starts at ``t0 + interaction_start/gamma`` regardless of
    the offset, so early arrivals lose more of the pulse.
    """
    g = atom.gamma
    t_in = atom.t0 + interaction_start / g
    if bounds[0] <= interaction_start:
        raise InvariantError("arrival offset > interaction start", f"{bounds[0]} <= {interaction_start}")
    return PulseFamily(
        "arrival-offset", atom, (bounds,),
        state=lambda p, grid: ideal_state(grid, atom).delayed(p[0] / g),
        window=lambda p: (t_in, atom.t0 + p[0] / g + 2.0 / g),
        envelope=lambda p: rising_exponential(replace(atom, t0=atom.t0 + p[0] / g)),
        param_names=("offset",),
    )


def custom_family(
    atom: AtomParams,
    bounds: Sequence[tuple[float, float]],
    envelope: Callable[[Param], TemporalEnvelope],
    window: Callable[[Param], tuple[float, float]] | None = None,
    numeric_grid: tuple[float, int] | None = None,
    param_names: Sequence[str] = (),
) -> PulseFamily:
    """Family built from any normalized envelope; propagation uses its mode expansion."""
    if window is None:
        def window(p):
            lo, hi = envelope(p).support
            return lo, hi + 4.0 / atom.gamma

    return PulseFamily(
        "custom-parametrized-envelope", atom, tuple(bounds),
        state=lambda p, grid: envelope_state(grid, envelope(p), atom),
        window=window,
        envelope=envelope,
        numeric_grid=numeric_grid,
        param_names=tuple(param_names),
    )


@dataclass(frozen=True)
class Evaluation:
    param: Param
    value: float
    t_max: float


@dataclass(frozen=True)
class OptimizationResult:
    family: str
    objective_mode: str
    method: str
    best_param: Param
    best_value: float
    best_time: float
    evaluations: tuple[Evaluation, ...]
    failures: tuple[tuple[Param, str], ...] = ()
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "objective_mode": self.objective_mode,
            "method": self.method,
            "best_param": list(self.best_param),
            "best_value": self.best_value,
            "best_time": self.best_time,
            "evaluations": [
                {"param": list(e.param), "value": e.value, "t_max": e.t_max} for e in self.evaluations
            ],
            "failures": [{"param": list(p), "error": msg} for p, msg in self.failures],
            "settings": dict(self.settings),
        }


def _analytic_peak(env: TemporalEnvelope, t_in: float, t_end: float, atom: AtomParams) -> tuple[float, float]:
    """Coarse 0.05/gamma sweep, then a 0.002/gamma sweep around the best sample."""
    g = atom.gamma
    n = max(2, math.ceil((t_end - t_in) / (0.05 / g)))
    ts = np.linspace(t_in, t_end, n + 1)
    f = analytic.f0_on_grid(env, ts, atom)
    prob = f.real**2 + f.imag**2
    i = int(np.argmax(prob))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
    m = max(3, math.ceil((hi - lo) / (0.002 / g)))
    fine = np.linspace(lo, hi, m + 1)
    kinks = [b for b in env.breakpoints if lo < b < hi]
    if kinks:
        fine = np.unique(np.concatenate([fine, kinks]))
    # restart from the coarse value at lo: f0(t) = f0(lo) e^{-g(t-lo)/2} + new drive
    ff = f[max(i - 1, 0)] * np.exp(-0.5 * g * (fine - lo)) + analytic.f0_on_grid(env, fine, atom)
    pf = ff.real**2 + ff.imag**2
    j = int(np.argmax(pf))
    if any(abs(fine[j] - b) <= 1e-12 * max(1.0, abs(b)) for b in env.breakpoints):
        # f0 has a corner where the envelope jumps; a parabola would overshoot
        return float(fine[j]), float(pf[j])
    return peak(fine, pf)


def evaluate(family: PulseFamily, param: Param, objective_mode: str = ANALYTIC,
             grid: ModeGrid | None = None, dt: float | None = None) -> Evaluation:
    """Peak over time of |f0|^2 for one parameter point."""
    param = tuple(float(x) for x in param)
    t_in, t_end = family.window(param)
    if objective_mode == ANALYTIC:
        if family.envelope is None:
            raise ValueError(f"family {family.kind} has no closed envelope for {ANALYTIC}")
        t_max, p_max = _analytic_peak(family.envelope(param), t_in, t_end, family.atom)
    elif objective_mode == NUMERIC:
        grid = grid or family.default_numeric_grid()
        state = family.state(param, grid)
        cfg = PropagatorConfig.for_window(grid, t_in, t_end, dt)
        t_max, p_max = max_excitation(propagate(state, family.atom, cfg))
    else:
        raise ValueError(f"objective_mode must be one of {OBJECTIVE_MODES}, got {objective_mode!r}")
    return Evaluation(param, p_max, t_max)


def _settings(family, objective_mode, grid, dt):
    s = {"bounds": [list(b) for b in family.bounds]}
    if objective_mode == NUMERIC:
        grid = grid or family.default_numeric_grid()
        s["grid"] = grid.describe()
        s["dt_max"] = dt
    return s


def _best(evals: Sequence[Evaluation]) -> Evaluation:
    best = evals[0]
    for e in evals[1:]:
        if e.value > best.value:  # strict: ties keep the earliest
            best = e
    return best


def scan(family: PulseFamily, n_points: int, objective_mode: str = ANALYTIC, *,
         grid: ModeGrid | None = None, dt: float | None = None, workers: int = 1) -> OptimizationResult:
    """Brute-force evaluation on a uniform grid (n_points per dimension)."""
    if n_points < 3:
        raise InvariantError("n_points >= 3", f"got {n_points}")
    if objective_mode == NUMERIC and grid is None:
        grid = family.default_numeric_grid()
    axes = [np.linspace(lo, hi, n_points) for lo, hi in family.bounds]
    points = [tuple(float(x) for x in p) for p in itertools.product(*axes)]

    def run(p):
        try:
            return evaluate(family, p, objective_mode, grid, dt)
        except (InvariantError, ValueError, RuntimeError) as exc:
            log.warning("scan point %s failed: %s", p, exc)
            return (p, str(exc))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, points))
    else:
        results = [run(p) for p in points]
    evals = [r for r in results if isinstance(r, Evaluation)]
    failures = tuple(r for r in results if not isinstance(r, Evaluation))
    if not evals:
        raise RuntimeError(f"every scan point failed; first error: {failures[0][1]}")
    best = _best(evals)
    return OptimizationResult(family.kind, objective_mode, "scan", best.param, best.value, best.t_max,
                              tuple(evals), failures, _settings(family, objective_mode, grid, dt))


_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, seed: float, tol: float) -> None:
    """Bracket a local maximum uphill from ``seed`` and shrink it to ``tol``."""
    step = 0.05 * (hi - lo)
    x, fx = seed, f(seed)
    right = min(seed + step, hi)
    left = max(seed - step, lo)
    fr = f(right) if right > seed else -math.inf
    fl = f(left) if left < seed else -math.inf
    if fr <= fx and fl <= fx:
        a, b = left, right
    else:
        sgn = 1.0 if fr >= fl else -1.0
        prev, cur, fcur = x, (right if sgn > 0 else left), max(fr, fl)
        bound = hi if sgn > 0 else lo
        while True:
            if cur == bound:
                nxt = bound
                break
            step *= 1.0 + _GOLD
            nxt = min(cur + step, hi) if sgn > 0 else max(cur - step, lo)
            fn = f(nxt)
            if fn <= fcur:
                break
            prev, cur, fcur = cur, nxt, fn
        a, b = sorted((prev, nxt))
        if cur == bound:
            a, b = sorted((prev, bound))
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
    # the maximum of a monotone objective sits on the bound itself
    for edge in (lo, hi):
        if abs(edge - a) <= tol or abs(edge - b) <= tol:
            f(edge)


def refine(family: PulseFamily, seed: Param | float, objective_mode: str = ANALYTIC, *,
           grid: ModeGrid | None = None, dt: float | None = None,
           tol: float = 1e-3) -> OptimizationResult:
    """Local derivative-free maximization from ``seed``.

    Golden-section search in one dimension, bounded Nelder-Mead otherwise;
    the parameter tolerance is ``tol`` times the bound width.  The result is
    never worse than the seed.
    """
    seed = (float(seed),) if np.ndim(seed) == 0 else tuple(float(s) for s in seed)
    if not family.contains(seed):
        raise InvariantError("seed within bounds", f"seed {seed} vs bounds {family.bounds}")
    if objective_mode == NUMERIC and grid is None:
        grid = family.default_numeric_grid()
    cache: dict[Param, Evaluation] = {}
    failures: list[tuple[Param, str]] = []

    def value(p: Param) -> float:
        p = tuple(float(x) for x in p)
        if p not in cache:
            try:
                cache[p] = evaluate(family, p, objective_mode, grid, dt)
            except (InvariantError, ValueError, RuntimeError) as exc:
                failures.append((p, str(exc)))
                cache[p] = Evaluation(p, -math.inf, math.nan)
        return cache[p].value

    if family.ndim == 1:
        lo, hi = family.bounds[0]
        method = "golden-section"
        _golden_max(lambda x: value((x,)), lo, hi, seed[0], tol * (hi - lo))
    else:
        method = "nelder-mead"
        lo = np.array([b[0] for b in family.bounds])
        width = np.array([b[1] - b[0] for b in family.bounds])
        u0 = (np.array(seed) - lo) / width
        simplex = [u0]
        for i in range(family.ndim):
            v = u0.copy()
            v[i] = v[i] + 0.05 if v[i] + 0.05 <= 1.0 else v[i] - 0.05
            simplex.append(v)
        optimize.minimize(
            lambda u: -value(tuple(lo + np.clip(u, 0.0, 1.0) * width)),
            u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * family.ndim,
            options={"xatol": tol, "fatol": 1e-9, "initial_simplex": np.array(simplex), "maxiter": 2000},
        )
    value(seed)
    evals = tuple(sorted((e for e in cache.values() if math.isfinite(e.value)), key=lambda e: e.param))
    if not evals:
        raise RuntimeError(f"every refine evaluation failed; first error: {failures[0][1]}")
    best = _best(evals)
    return OptimizationResult(family.kind, objective_mode, method, best.param, best.value, best.t_max,
                              evals, tuple(failures), _settings(family, objective_mode, grid, dt))
