"""Physical parameters, the discretized mode continuum and one-photon states.

Phase conventions
-----------------
Mode amplitudes ``c_l`` are interaction-picture values referenced to the
coincidence time ``t0``.  With the discrete grid ``Delta_l`` of spacing
``dw`` the temporal envelope of the wavepacket seen by the atom is

    phi(t) = -i * sqrt(dw / 2pi) * sum_l c_l exp(+i Delta_l (t - t0))

and the inverse map is

    c_l = +i * sqrt(dw / 2pi) * integral phi(t) exp(-i Delta_l (t - t0)) dt.

With this pair the drive on the atomic amplitude is exactly
``sqrt(gamma) * phi(t)``, so a rising exponential ending at ``t0`` maps onto
``-g / (Delta + i gamma/2)`` without any extra phase.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, signal

__all__ = [
    "InvariantError",
    "AtomParams",
    "ModeGrid",
    "PhotonState",
    "TemporalEnvelope",
    "build_mode_grid",
    "default_grid",
    "ideal_state",
    "reflected_state",
    "gaussian_state",
    "envelope_state",
    "excited_atom_state",
    "vacuum_state",
    "temporal_profile",
    "rising_exponential",
    "decaying_exponential",
    "gaussian_envelope",
    "two_sided_exponential",
    "sampled_envelope",
    "function_envelope",
]

DEFAULT_BANDWIDTH_FACTOR = 800.0
DEFAULT_N_MODES = 8001
MIN_BANDWIDTH_FACTOR = 20.0
MIN_N_MODES = 101
NORM_TOL = 1e-12
ENVELOPE_NORM_TOL = 1e-9
# |phi|^2 level below which analytic tails are clipped when sampling
_TAIL_LEVEL = 1e-12


class InvariantError(ValueError):
    """A physical or numerical invariant was violated.

    ``invariant`` holds a short statement of the violated condition; the CLI
    quotes it verbatim.
    """

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        msg = f"invariant violated: {invariant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AtomParams:
    """Two-level atom: decay rate, optional transition frequency, t0."""

    gamma: float = 1.0
    t0: float = 0.0
    omega0: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvariantError("gamma > 0", f"got gamma={self.gamma!r}")
        if not math.isfinite(self.t0):
            raise InvariantError("t0 finite", f"got t0={self.t0!r}")
        if self.omega0 is not None and not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise InvariantError("omega0 > 0", f"got omega0={self.omega0!r}")

    @property
    def rwa_valid(self) -> bool | None:
        """True when gamma/omega0 < 1e-3; None if omega0 is unknown."""
        if self.omega0 is None:
            return None
        return self.gamma / self.omega0 < 1e-3

    @property
    def lifetime(self) -> float:
        return 1.0 / self.gamma


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Uniform detuning grid with a flat real coupling.

    Build with :func:`build_mode_grid`; the constructor does not check the
    bandwidth floor.
    """

    gamma: float
    bandwidth: float
    n_modes: int
    detunings: np.ndarray
    coupling: float
    t0: float = 0.0

    @property
    def spacing(self) -> float:
        return self.bandwidth / (self.n_modes - 1)

    @property
    def max_detuning(self) -> float:
        return 0.5 * self.bandwidth

    @property
    def center_index(self) -> int:
        return (self.n_modes - 1) // 2

    @property
    def recurrence_time(self) -> float:
        """Revival time 2pi/dw of the discretized continuum."""
        return 2.0 * math.pi / self.spacing

    @property
    def decay_rate(self) -> float:
        """2pi g^2 / dw, equal to gamma by construction."""
        return 2.0 * math.pi * self.coupling**2 / self.spacing

    def describe(self) -> str:
        return f"W={self.bandwidth:g} n={self.n_modes} dw={self.spacing:g} g={self.coupling:.6g}"


def build_mode_grid(
    atom: AtomParams,
    bandwidth_factor: float = DEFAULT_BANDWIDTH_FACTOR,
    n_modes: int = DEFAULT_N_MODES,
    *,
    min_bandwidth_factor: float = MIN_BANDWIDTH_FACTOR,
) -> ModeGrid:
    """Discretize the flat continuum over ``bandwidth_factor * gamma``.

    The coupling is fixed by ``2 pi g^2 / dw = gamma`` so the grid reproduces
    the continuum decay rate.
    """
    if int(n_modes) != n_modes or n_modes % 2 == 0:
        raise InvariantError("n_modes odd (zero detuning on the grid)", f"got n_modes={n_modes}")
    n_modes = int(n_modes)
    if n_modes < MIN_N_MODES:
        raise InvariantError(f"n_modes >= {MIN_N_MODES}", f"got n_modes={n_modes}")
    if not (bandwidth_factor >= min_bandwidth_factor):
        raise InvariantError(
            f"bandwidth >= {min_bandwidth_factor:g} gamma",
            f"got {bandwidth_factor:g} gamma; the Lorentzian tails would be truncated too hard",
        )
    width = float(bandwidth_factor) * atom.gamma
    dw = width / (n_modes - 1)
    half = (n_modes - 1) // 2
    # integer offsets keep the grid exactly symmetric with Delta=0 at the center
    detunings = (np.arange(n_modes) - half) * dw
    g = math.sqrt(atom.gamma * dw / (2.0 * math.pi))
    return ModeGrid(atom.gamma, width, n_modes, _readonly(detunings), g, atom.t0)


def default_grid(atom: AtomParams) -> ModeGrid:
    return build_mode_grid(atom, DEFAULT_BANDWIDTH_FACTOR, DEFAULT_N_MODES)


@dataclass(frozen=True, eq=False)
class PhotonState:
    """One-excitation state: mode amplitudes plus the atomic amplitude.

    ``loss`` is the weight of the ground-state vacuum component (no photon).
    It is zero for every catalog state and lets truncated pulses and the
    vacuum diagnostic be represented without renormalizing.
    """

    grid: ModeGrid
    mode_amps: np.ndarray
    atom_amp: complex = 0j
    label: str = ""
    loss: float = 0.0
    captured: float = 1.0
    warnings: tuple[str, ...] = ()
    prepared_at: float | None = None

    def __post_init__(self):
        amps = np.asarray(self.mode_amps, dtype=np.complex128)
        if amps.shape != (self.grid.n_modes,):
            raise ValueError(f"mode_amps shape {amps.shape} does not match grid ({self.grid.n_modes},)")
        object.__setattr__(self, "mode_amps", _readonly(amps.copy()))
        object.__setattr__(self, "atom_amp", complex(self.atom_amp))
        if not 0.0 <= self.loss <= 1.0:
            raise InvariantError("0 <= loss <= 1", f"got loss={self.loss}")
        total = self.norm + self.loss
        if abs(total - 1.0) > NORM_TOL:
            raise InvariantError(
                "|f0|^2 + sum|c_l|^2 + loss = 1 within 1e-12", f"got {total!r}"
            )

    @property
    def norm(self) -> float:
        return abs(self.atom_amp) ** 2 + float(np.sum(self.mode_amps.real**2 + self.mode_amps.imag**2))

    @property
    def photon_number(self) -> float:
        return float(np.sum(np.abs(self.mode_amps) ** 2))

    def mode_probabilities(self) -> np.ndarray:
        return np.abs(self.mode_amps) ** 2

    def with_phase(self, alpha: float) -> PhotonState:
        """Same state with every mode amplitude multiplied by exp(i alpha)."""
        return replace(self, mode_amps=self.mode_amps * np.exp(1j * alpha))

    def delayed(self, shift: float) -> PhotonState:
        """Shift the temporal envelope by ``shift`` (later arrival for shift > 0)."""
        phase = np.exp(-1j * self.grid.detunings * shift)
        return replace(self, mode_amps=self.mode_amps * phase, label=f"{self.label}+delay{shift:g}")


def _check_grid(grid: ModeGrid, atom: AtomParams) -> None:
    if not math.isclose(grid.gamma, atom.gamma, rel_tol=1e-12):
        raise InvariantError("grid and atom share gamma", f"grid {grid.gamma} vs atom {atom.gamma}")
    if grid.t0 != atom.t0:
        raise InvariantError("grid and atom share t0", f"grid {grid.t0} vs atom {atom.t0}")


def _normalized(amps: np.ndarray) -> tuple[np.ndarray, float]:
    mass = float(np.sum(np.abs(amps) ** 2))
    if mass <= 0.0:
        raise InvariantError("nonzero spectral weight on the grid")
    return amps / math.sqrt(mass), mass


def _renormalize_exact(amps: np.ndarray, target: float = 1.0) -> np.ndarray:
    # one extra pass removes the last-ulp drift of a single rescale
    for _ in range(2):
        amps = amps * math.sqrt(target / float(np.sum(np.abs(amps) ** 2)))
    return amps


def _lorentzian_state(grid: ModeGrid, atom: AtomParams, sign: float, label: str) -> PhotonState:
    _check_grid(grid, atom)
    amps = -grid.coupling / (grid.detunings + sign * 0.5j * atom.gamma)
    amps, mass = _normalized(amps)
    return PhotonState(grid, _renormalize_exact(amps), 0j, label, captured=mass)


def ideal_state(grid: ModeGrid, atom: AtomParams) -> PhotonState:
    """Time-reversed dipole wave, c_l proportional to -g/(Delta_l + i gamma/2)."""
    return _lorentzian_state(grid, atom, +1.0, "ideal")


def reflected_state(grid: ModeGrid, atom: AtomParams) -> PhotonState:
    """Reflected (not time-reversed) wave, c_l proportional to -g/(Delta_l - i gamma/2)."""
    return _lorentzian_state(grid, atom, -1.0, "reflected")


def gaussian_state(grid: ModeGrid, atom: AtomParams, sigma: float) -> PhotonState:
    """Gaussian mode distribution g*exp(-Delta^2/sigma^2), renormalized on the grid."""
    _check_grid(grid, atom)
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InvariantError("sigma > 0", f"got sigma={sigma!r}")
    inside = int(np.count_nonzero(np.abs(grid.detunings) <= 3.0 * sigma))
    if inside < 10:
        raise InvariantError(
            "at least 10 grid points within +-3 sigma",
            f"sigma={sigma:g} covers {inside} points at dw={grid.spacing:g}",
        )
    amps = grid.coupling * np.exp(-((grid.detunings / sigma) ** 2))
    amps, mass = _normalized(amps)
    return PhotonState(grid, _renormalize_exact(amps), 0j, f"gaussian{{sigma={sigma:g}}}", captured=mass)


def excited_atom_state(grid: ModeGrid) -> PhotonState:
    return PhotonState(grid, np.zeros(grid.n_modes, np.complex128), 1.0 + 0j, "excited-atom")


def vacuum_state(grid: ModeGrid) -> PhotonState:
    """Atom in |g>, field in vacuum: no one-excitation amplitude at all."""
    return PhotonState(grid, np.zeros(grid.n_modes, np.complex128), 0j, "vacuum", loss=1.0)


# ---------------------------------------------------------------------------
# temporal envelopes


@dataclass(frozen=True, eq=False)
class TemporalEnvelope:
    """Complex temporal amplitude phi(t) of a wavepacket, |phi|^2 in photons/time.

    Either sampled (``times``/``values``, linear interpolation, zero outside)
    or analytic (``func`` with a finite ``support`` outside which it is
    negligible, and ``breakpoints`` where it is not smooth).
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = None
    support: tuple[float, float] = (-math.inf, math.inf)
    breakpoints: tuple[float, ...] = ()
    norm: float = math.nan

    def __post_init__(self):
        if self.times is not None:
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=np.complex128)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2:
                raise ValueError("sampled envelope needs matching 1-D times/values with >= 2 samples")
            if np.any(np.diff(t) <= 0):
                raise ValueError("envelope sample times must be strictly increasing")
            object.__setattr__(self, "times", _readonly(t))
            object.__setattr__(self, "values", _readonly(v))
            object.__setattr__(self, "support", (float(t[0]), float(t[-1])))
            if math.isnan(self.norm):
                object.__setattr__(self, "norm", float(np.trapezoid(np.abs(v) ** 2, t)))
        elif self.func is None:
            raise ValueError("envelope needs samples or a function")
        elif math.isnan(self.norm):
            lo, hi = self.support
            pts = [p for p in self.breakpoints if lo < p < hi]
            val, _ = integrate.quad(
                lambda t: abs(complex(self.func(np.asarray(t)))) ** 2, lo, hi,
                points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=400,
            )
            object.__setattr__(self, "norm", float(val))

    @property
    def is_sampled(self) -> bool:
        return self.times is not None

    def is_normalized(self, tol: float = ENVELOPE_NORM_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_sampled:
            re = np.interp(t, self.times, self.values.real, left=0.0, right=0.0)
            im = np.interp(t, self.times, self.values.imag, left=0.0, right=0.0)
            return re + 1j * im
        return np.asarray(self.func(t), dtype=np.complex128)

    def sample(self, step: float, align: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Uniform samples over the support; ``align`` is put exactly on a node."""
        if self.is_sampled:
            return np.asarray(self.times), np.asarray(self.values)
        lo, hi = self.support
        if align is None:
            align = self.breakpoints[0] if self.breakpoints else lo
        k_lo = math.floor((lo - align) / step + 1e-9)
        k_hi = math.ceil((hi - align) / step - 1e-9)
        t = align + step * np.arange(k_lo, k_hi + 1)
        return t, self(t)


def _theta(x):
    # Heaviside step with Theta(0) = 1
    return np.where(x >= 0, 1.0, 0.0)


def rising_exponential(atom: AtomParams, duration: float | None = None) -> TemporalEnvelope:
    """sqrt(gamma) exp(-gamma (t0 - t)/2) for t <= t0: the time-reversed decay.

    With ``duration`` the tail before ``t0 - duration`` is cut off without
    renormalizing, leaving 1 - exp(-gamma*duration) photons.
    """
    g, t0 = atom.gamma, atom.t0
    tail = -math.log(_TAIL_LEVEL) / g
    if duration is None:
        lo, norm = t0 - tail, 1.0
    else:
        if duration < 0:
            raise InvariantError("duration >= 0", f"got {duration}")
        lo, norm = t0 - duration, -math.expm1(-g * duration)

    def phi(t):
        return math.sqrt(g) * np.exp(-0.5 * g * np.abs(t0 - t)) * _theta(t0 - t) * _theta(t - lo)

    params = {"gamma": g, "t0": t0}
    if duration is not None:
        params["duration"] = duration
    return TemporalEnvelope("rising-exponential", params, func=phi, support=(lo, t0),
                            breakpoints=(t0, lo), norm=norm)


def decaying_exponential(atom: AtomParams) -> TemporalEnvelope:
    """-sqrt(gamma) exp(-gamma (t - t0)/2) for t >= t0, the profile of the reflected state."""
    g, t0 = atom.gamma, atom.t0
    hi = t0 - math.log(_TAIL_LEVEL) / g

    def phi(t):
        return -math.sqrt(g) * np.exp(-0.5 * g * np.abs(t - t0)) * _theta(t - t0)

    return TemporalEnvelope("decaying-exponential", {"gamma": g, "t0": t0}, func=phi,
                            support=(t0, hi), breakpoints=(t0,), norm=1.0)


def gaussian_envelope(atom: AtomParams, sigma: float) -> TemporalEnvelope:
    """Temporal profile of :func:`gaussian_state`: -i A exp(-sigma^2 (t-t0)^2 / 4)."""
    if not sigma > 0:
        raise InvariantError("sigma > 0", f"got sigma={sigma!r}")
    t0 = atom.t0
    amp = (sigma**2 / (2.0 * math.pi)) ** 0.25
    half = math.sqrt(-2.0 * math.log(_TAIL_LEVEL)) / sigma

    def phi(t):
        return -1j * amp * np.exp(-0.25 * sigma**2 * (t - t0) ** 2)

    return TemporalEnvelope("gaussian", {"sigma": sigma, "t0": t0}, func=phi,
                            support=(t0 - half, t0 + half), breakpoints=(t0,), norm=1.0)


def two_sided_exponential(atom: AtomParams, rise: float, fall: float) -> TemporalEnvelope:
    """Normalized exp(rise (t-t0)/2) before t0, exp(-fall (t-t0)/2) after."""
    if not (rise > 0 and fall > 0):
        raise InvariantError("rise > 0 and fall > 0", f"got rise={rise}, fall={fall}")
    t0 = atom.t0
    amp = math.sqrt(1.0 / (1.0 / rise + 1.0 / fall))
    lo = t0 + math.log(_TAIL_LEVEL) / rise
    hi = t0 - math.log(_TAIL_LEVEL) / fall

    def phi(t):
        tau = t - t0
        return amp * np.where(tau < 0, np.exp(0.5 * rise * np.minimum(tau, 0.0)),
                              np.exp(-0.5 * fall * np.maximum(tau, 0.0)))

    return TemporalEnvelope("two-sided-exponential", {"rise": rise, "fall": fall, "t0": t0},
                            func=phi, support=(lo, hi), breakpoints=(t0,), norm=1.0)


def sampled_envelope(times: Sequence[float], values: Sequence[complex], kind: str = "samples") -> TemporalEnvelope:
    return TemporalEnvelope(kind, {}, times=np.asarray(times, float), values=np.asarray(values, complex))


def function_envelope(func, support: tuple[float, float], breakpoints: Sequence[float] = (),
                      kind: str = "custom", params: Mapping[str, float] | None = None) -> TemporalEnvelope:
    lo, hi = support
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"support must be a finite interval, got {support}")
    return TemporalEnvelope(kind, dict(params or {}), func=func, support=(float(lo), float(hi)),
                            breakpoints=tuple(float(b) for b in breakpoints))


# ---------------------------------------------------------------------------
# spectral <-> temporal transforms


def _is_uniform(t: np.ndarray) -> bool:
    if t.size < 3:
        return True
    d = np.diff(t)
    return bool(np.max(np.abs(d - d[0])) <= 1e-9 * max(abs(d[0]), 1e-300))


def _spectral_from_samples(grid: ModeGrid, t0: float, t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """c_l = i sqrt(dw/2pi) * trapezoid( phi(t) exp(-i Delta_l (t - t0)) )."""
    w = np.empty_like(t)
    dt = np.diff(t)
    w[0], w[-1] = 0.5 * dt[0], 0.5 * dt[-1]
    w[1:-1] = 0.5 * (dt[:-1] + dt[1:])
    a = w * v
    delta = grid.detunings
    tau = t - t0
    if _is_uniform(t):
        h = dt[0]
        k = np.arange(t.size)
        x = a * np.exp(-1j * delta[0] * h * k)
        big = signal.czt(x, m=grid.n_modes, w=np.exp(-1j * grid.spacing * h), a=1.0)
        out = big * np.exp(-1j * delta * tau[0])
    else:
        out = np.zeros(grid.n_modes, np.complex128)
        for s in range(0, t.size, 2048):
            out += np.exp(-1j * np.outer(delta, tau[s:s + 2048])) @ a[s:s + 2048]
    return 1j * math.sqrt(grid.spacing / (2.0 * math.pi)) * out


def envelope_state(
    grid: ModeGrid,
    env: TemporalEnvelope,
    atom: AtomParams,
    *,
    allow_loss: bool = False,
    step: float | None = None,
) -> PhotonState:
    """Mode amplitudes of an arbitrary temporal envelope (trapezoid quadrature).

    A normalized envelope is renormalized on the grid.  A sub-normalized one
    (e.g. a truncated pulse) is accepted only with ``allow_loss``; the missing
    weight becomes the vacuum component of the state.
    """
    _check_grid(grid, atom)
    if env.is_normalized():
        target = 1.0
    elif allow_loss and 0.0 < env.norm < 1.0:
        target = env.norm
    else:
        raise InvariantError("envelope normalized: integral |phi|^2 dt = 1 within 1e-9",
                             f"got {env.norm!r}")
    if step is None:
        step = 0.1 / grid.max_detuning
    t, v = env.sample(step)
    raw = _spectral_from_samples(grid, atom.t0, t, v)
    mass = float(np.sum(np.abs(raw) ** 2))
    if mass <= 0:
        raise InvariantError("nonzero spectral weight on the grid")
    notes = []
    core = np.abs(grid.detunings) <= 0.25 * grid.bandwidth
    if float(np.sum(np.abs(raw[core]) ** 2)) < 0.95 * mass:
        notes.append("aliasing: envelope bandwidth exceeds W/4")
    if t[-1] - t[0] > 0.5 * grid.recurrence_time:
        notes.append("aliasing: envelope longer than half the recurrence time")
    label = f"envelope{{{env.kind}}}"
    if notes:
        label += "[" + "; ".join(notes) + "]"
        for n in notes:
            warnings.warn(n, RuntimeWarning, stacklevel=2)
    amps = _renormalize_exact(raw, target)
    return PhotonState(grid, amps, 0j, label, loss=1.0 - float(np.sum(np.abs(amps) ** 2)),
                       captured=mass / target, warnings=tuple(notes))


def temporal_profile(state: PhotonState, times: Sequence[float]) -> TemporalEnvelope:
    """phi(t) of the state's photon, sampled at ``times``."""
    grid = state.grid
    t0 = grid.t0
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("temporal_profile needs at least two sample times")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    limit = 0.25 * grid.recurrence_time
    if np.max(np.abs(t - t0)) > limit * (1 + 1e-12):
        raise InvariantError(
            "|t - t0| <= recurrence_time/4",
            f"requested up to {np.max(np.abs(t - t0)):g}, limit {limit:g}",
        )
    c = state.mode_amps
    delta = grid.detunings
    tau = t - t0
    if _is_uniform(t):
        h = t[1] - t[0]
        x = c * np.exp(1j * delta * tau[0])
        y = signal.czt(x, m=t.size, w=np.exp(1j * grid.spacing * h), a=1.0)
        vals = y * np.exp(1j * delta[0] * h * np.arange(t.size))
    else:
        vals = np.empty(t.size, np.complex128)
        for s in range(0, t.size, 1024):
            vals[s:s + 1024] = np.exp(1j * np.outer(tau[s:s + 1024], delta)) @ c
    vals = -1j * math.sqrt(grid.spacing / (2.0 * math.pi)) * vals
    return sampled_envelope(t, vals, kind=f"profile{{{state.label}}}")
