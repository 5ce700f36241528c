"""Closed-form amplitudes, envelope quadrature and the far-field variance.

Everything here is in the continuum (infinite bandwidth) limit and serves as
the reference the discretized propagator is checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants, integrate

from .core import AtomParams, InvariantError, TemporalEnvelope

__all__ = [
    "FarFieldPoint",
    "decay_amplitude",
    "mode_amplitude_ideal",
    "f0_timereversed",
    "f0_reflected",
    "truncated_excitation_prob",
    "f0_from_envelope",
    "f0_on_grid",
    "far_field_variance",
    "gaussian_norm_constant",
]

QUAD_RTOL = 1e-8


def decay_amplitude(t, atom: AtomParams):
    """exp(-gamma |t - t0| / 2): decay after t0, perfect absorption before."""
    return np.exp(-0.5 * atom.gamma * np.abs(np.asarray(t, float) - atom.t0))


def mode_amplitude_ideal(delta, t, atom: AtomParams, g: float):
    """Amplitude of the mode at detuning ``delta`` on the perfect-absorption path.

    g (exp(-gamma|tau|/2) exp(-i delta tau) - 1) / (delta - i gamma/2 sgn(tau))
    with tau = t - t0 and sgn(0) = +1 (the numerator vanishes there anyway).
    """
    delta = np.asarray(delta, float)
    tau = np.asarray(t, float) - atom.t0
    sgn = np.where(tau >= 0, 1.0, -1.0)
    num = np.exp(-0.5 * atom.gamma * np.abs(tau) - 1j * delta * tau) - 1.0
    return g * num / (delta - 0.5j * atom.gamma * sgn)


def _check_order(t, t_in):
    if np.any(np.asarray(t) < t_in):
        raise InvariantError("t >= t_in", f"t_in={t_in}, min t={np.min(t)}")


def f0_timereversed(t, t_in: float, atom: AtomParams):
    """Excited amplitude for the time-reversed wave switched on at ``t_in``."""
    _check_order(t, t_in)
    g, t0 = atom.gamma, atom.t0
    t = np.asarray(t, float)
    if t0 < t_in:
        return np.zeros_like(t)
    before = np.exp(-0.5 * g * (t0 - t)) * -np.expm1(-g * (t - t_in))
    after = np.exp(-0.5 * g * (t - t0)) * -np.expm1(-g * (t0 - t_in))
    # piecewise rather than a sum of complementary steps: both steps are 1 at t0
    return np.where(t <= t0, before, after)


def f0_reflected(t, t_in: float, atom: AtomParams):
    """Excited amplitude for the reflected (not time-reversed) wave.

    Zero until t0 when t_in <= t0; -gamma (t - t_in) exp(-gamma (t - t0)/2)
    when the interaction starts after t0.
    """
    _check_order(t, t_in)
    g, t0 = atom.gamma, atom.t0
    t = np.asarray(t, float)
    start = max(t_in, t0)
    return np.where(t >= start, -g * (t - start) * np.exp(-0.5 * g * (t - t0)), 0.0)


def truncated_excitation_prob(gamma_T: float) -> float:
    """(1 - exp(-gamma T))^2, the excitation reached at t0 after interaction time T."""
    if gamma_T < 0:
        raise InvariantError("gamma*T >= 0", f"got {gamma_T}")
    return math.expm1(-gamma_T) ** 2


def gaussian_norm_constant(gamma: float, sigma: float) -> float:
    """Continuum normalization (8 pi)^(1/4) / sqrt(gamma sigma) of the Gaussian mode distribution."""
    return (8.0 * math.pi) ** 0.25 / math.sqrt(gamma * sigma)


def _segment_integral(env: TemporalEnvelope, rate: float, a: float, b: float) -> complex:
    """integral_a^b exp(-rate (b - s)) phi(s) ds, adaptive quadrature."""
    lo, hi = env.support
    a2, b2 = max(a, lo), min(b, hi)
    if b2 <= a2:
        return 0j
    pts = [p for p in env.breakpoints if a2 < p < b2] or None
    # the kernel decays from b, not b2; fold the gap into a constant factor
    scale = math.exp(-rate * (b - b2))
    val, _ = integrate.quad(
        lambda s: complex(env(s)) * math.exp(-rate * (b2 - s)), a2, b2,
        points=pts, epsabs=1e-15, epsrel=QUAD_RTOL, limit=200, complex_func=True,
    )
    return scale * val


def _sampled_segment(times, values, rate, a, b) -> complex:
    """Exact integral of the linear interpolant against exp(-rate (b - s)) on [a, b]."""
    grid = np.concatenate(([a], times[(times > a) & (times < b)], [b]))
    re = np.interp(grid, times, values.real, left=0.0, right=0.0)
    im = np.interp(grid, times, values.imag, left=0.0, right=0.0)
    v = re + 1j * im
    s0, s1 = grid[:-1], grid[1:]
    h = s1 - s0
    x = rate * h
    w0 = np.exp(-rate * (b - s1))
    # weights of v0 and v1 for integral over one segment, stable for small x
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    e = np.exp(-x)
    c1 = np.where(small, h * (0.5 - x / 6 + x * x / 24), h * (1 - (1 - e) / xs) / xs)
    c0 = np.where(small, h * (0.5 - x / 3 + x * x / 8), h * ((1 - e) / xs - e) / xs)
    return complex(np.sum(w0 * (c0 * v[:-1] + c1 * v[1:])))


def f0_from_envelope(env: TemporalEnvelope, t, t_in: float, atom: AtomParams):
    """sqrt(gamma) * integral_{t_in}^{t} exp(-gamma (t - s)/2) phi(s) ds.

    The atom responds to a unit-normalized envelope phi with exactly this
    amplitude in the continuum limit.  ``t`` may be a scalar or an increasing
    array; arrays are evaluated segment by segment so each quadrature only
    spans one step.
    """
    if not env.is_normalized():
        raise InvariantError("envelope normalized: integral |phi|^2 dt = 1 within 1e-9", f"got {env.norm!r}")
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, float))
    _check_order(ts, t_in)
    if ts.size > 1 and np.any(np.diff(ts) < 0):
        raise ValueError("times must be nondecreasing")
    rate = 0.5 * atom.gamma
    out = np.empty(ts.size, np.complex128)
    acc, prev = 0j, t_in
    for k, tk in enumerate(ts):
        if env.is_sampled:
            seg = _sampled_segment(env.times, env.values, rate, prev, tk)
        else:
            seg = _segment_integral(env, rate, prev, tk)
        acc = acc * math.exp(-rate * (tk - prev)) + seg
        out[k] = acc
        prev = tk
    out *= math.sqrt(atom.gamma)
    return complex(out[0]) if scalar else out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def f0_on_grid(env: TemporalEnvelope, t, atom: AtomParams) -> np.ndarray:
    """Same integral as :func:`f0_from_envelope` with ``t_in = t[0]``, vectorized.

    Each step is integrated with 12-point Gauss-Legendre after the envelope
    breakpoints are inserted as extra nodes, so the integrand is smooth on
    every step.  Meant for dense increasing grids with steps well below the
    envelope's shortest time scale.
    """
    if not env.is_normalized():
        raise InvariantError("envelope normalized: integral |phi|^2 dt = 1 within 1e-9", f"got {env.norm!r}")
    ts = np.asarray(t, float)
    if ts.ndim != 1 or ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("t must be a strictly increasing array of at least two times")
    if env.is_sampled:
        return f0_from_envelope(env, ts, ts[0], atom)
    extra = [b for b in env.breakpoints if ts[0] < b < ts[-1]]
    nodes = np.unique(np.concatenate([ts, extra])) if extra else ts
    rate = 0.5 * atom.gamma
    a, b = nodes[:-1], nodes[1:]
    half = 0.5 * (b - a)
    s = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
    # evaluate inside each open step so a jump at a node is never sampled
    seg = half * ((env(s) * np.exp(-rate * (b[:, None] - s))) @ _GL_W)
    decay = np.exp(-rate * (b - a))
    out = np.empty(nodes.size, np.complex128)
    acc = 0j
    out[0] = 0j
    for k in range(seg.size):
        acc = acc * decay[k] + seg[k]
        out[k + 1] = acc
    out *= math.sqrt(atom.gamma)
    if extra:
        out = out[np.searchsorted(nodes, ts)]
    return out


@dataclass(frozen=True)
class FarFieldPoint:
    """Observation point: distance r, polar angle theta from the dipole axis,
    projection of the analysed polarization on e_theta, and time t."""

    r: float
    theta: float
    e_dot_etheta: float
    t: float

    def __post_init__(self):
        if not self.r > 0:
            raise InvariantError("r > 0", f"got r={self.r}")
        if not -1.0 <= self.e_dot_etheta <= 1.0:
            raise InvariantError("-1 <= e.e_theta <= 1", f"got {self.e_dot_etheta}")


_UNITS = {
    "natural": (1.0, 1.0, 1.0),
    "si": (constants.hbar, constants.epsilon_0, constants.c),
}


def far_field_variance(p: FarFieldPoint, atom: AtomParams, normalized: bool = True,
                       units: str = "natural") -> float:
    """Normally ordered field variance of the incoming time-reversed dipole wave.

    Valid far from the atom (r >= 10 c/omega0) and before absorption
    completes.  ``normalized`` drops the prefactor hbar omega0 6 gamma /
    (16 pi eps0 c r^2), leaving sin^2(theta) (e.e_theta)^2 exp(...) Theta(...).
    The expression assumes gamma << omega0.
    """
    try:
        hbar, eps0, c = _UNITS[units]
    except KeyError:
        raise ValueError(f"units must be one of {sorted(_UNITS)}, got {units!r}") from None
    if atom.omega0 is None:
        raise InvariantError("omega0 supplied (needed for the far-field condition)")
    if p.r < 10.0 * c / atom.omega0:
        raise InvariantError("far field: r >= 10 c/omega0", f"r={p.r:g}, c/omega0={c / atom.omega0:g}")
    lag = atom.t0 - p.t - p.r / c
    if lag < 0:
        return 0.0
    shape = math.sin(p.theta) ** 2 * p.e_dot_etheta**2 * math.exp(-atom.gamma * lag)
    if normalized:
        return shape
    pref = hbar * atom.omega0 * 6.0 * atom.gamma / (16.0 * math.pi * eps0 * c * p.r**2)
    return pref * shape
