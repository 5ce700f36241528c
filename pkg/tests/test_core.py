import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photoexcite import core
from photoexcite.analytic import gaussian_norm_constant
from photoexcite.core import (
    AtomParams,
    InvariantError,
    PhotonState,
    build_mode_grid,
    envelope_state,
    excited_atom_state,
    gaussian_envelope,
    gaussian_state,
    ideal_state,
    reflected_state,
    rising_exponential,
    temporal_profile,
    two_sided_exponential,
    vacuum_state,
)

from conftest import overlap


# independent oracle: Lorentzian weight inside |Delta| <= W/2 for W = 40 gamma
LORENTZ_MASS_40 = 2.0 / math.pi * math.atan(40.0)


def test_lorentz_mass_oracle_value():
    assert LORENTZ_MASS_40 == pytest.approx(0.98409, abs=1e-5)


class TestGrid:
    def test_layout(self, small_grid):
        d = small_grid.detunings
        assert d.size == 401
        assert d[small_grid.center_index] == 0.0
        np.testing.assert_array_equal(d, -d[::-1])
        assert small_grid.spacing == pytest.approx(0.1)
        assert np.allclose(np.diff(d), small_grid.spacing, rtol=0, atol=1e-12)

    def test_fine_grid_example(self, atom):
        grid = build_mode_grid(atom, 40, 4001)
        assert grid.spacing == pytest.approx(0.01, rel=1e-14)
        assert grid.coupling == pytest.approx(math.sqrt(0.01 / (2 * math.pi)), rel=1e-14)
        assert grid.coupling == pytest.approx(0.0398942, abs=1e-7)
        assert grid.detunings[2000] == 0.0

    def test_coupling_reproduces_decay_rate(self, atom):
        for factor, n in [(40, 401), (800, 8001), (123.4, 1001)]:
            grid = build_mode_grid(atom, factor, n)
            assert grid.decay_rate == pytest.approx(atom.gamma, rel=1e-12)

    def test_gamma_scaling(self):
        grid = build_mode_grid(AtomParams(gamma=2.5), 40, 401)
        assert grid.bandwidth == pytest.approx(100.0)
        assert grid.decay_rate == pytest.approx(2.5, rel=1e-12)

    @pytest.mark.parametrize("n", [400, 100, 99])
    def test_rejects_bad_mode_count(self, atom, n):
        with pytest.raises(InvariantError):
            build_mode_grid(atom, 40, n)

    def test_rejects_narrow_band(self, atom):
        with pytest.raises(InvariantError, match="bandwidth"):
            build_mode_grid(atom, 10, 401)

    def test_detunings_readonly(self, small_grid):
        with pytest.raises(ValueError):
            small_grid.detunings[0] = 1.0

    def test_recurrence(self, small_grid):
        assert small_grid.recurrence_time == pytest.approx(2 * math.pi / 0.1)


class TestAtom:
    def test_invalid(self):
        with pytest.raises(InvariantError):
            AtomParams(gamma=0.0)
        with pytest.raises(InvariantError):
            AtomParams(gamma=1.0, omega0=-1.0)

    def test_rwa_flag(self):
        assert AtomParams().rwa_valid is None
        assert AtomParams(omega0=1e4).rwa_valid is True
        assert AtomParams(omega0=10.0).rwa_valid is False


class TestCatalog:
    def test_ideal_normalized(self, small_grid, atom):
        s = ideal_state(small_grid, atom)
        assert abs(s.norm - 1.0) <= 1e-12
        assert s.atom_amp == 0
        # grid sum approximates the truncated Lorentzian integral
        assert s.captured == pytest.approx(LORENTZ_MASS_40, abs=2e-3)

    def test_ideal_formula(self, small_grid, atom):
        s = ideal_state(small_grid, atom)
        raw = -small_grid.coupling / (small_grid.detunings + 0.5j)
        ratio = s.mode_amps / raw
        assert np.allclose(ratio, ratio[0], rtol=1e-12)
        assert ratio[0].real > 0 and abs(ratio[0].imag) < 1e-12

    def test_reflected_is_conjugate_phase(self, small_grid, atom):
        a = ideal_state(small_grid, atom)
        b = reflected_state(small_grid, atom)
        np.testing.assert_allclose(np.abs(a.mode_amps), np.abs(b.mode_amps), rtol=1e-12)
        np.testing.assert_allclose(b.mode_amps, np.conj(a.mode_amps), rtol=1e-12)

    def test_gaussian_continuum_normalization(self, atom):
        grid = build_mode_grid(atom, 100, 2001)
        for sigma in (0.5, 1.4625, 3.0):
            s = gaussian_state(grid, atom, sigma)
            # captured is sum |g exp(-D^2/s^2)|^2; the continuum constant undoes it
            assert s.captured * gaussian_norm_constant(atom.gamma, sigma) ** 2 == pytest.approx(1.0, abs=1e-9)

    def test_gaussian_too_narrow(self, small_grid, atom):
        with pytest.raises(InvariantError, match="10 grid points"):
            gaussian_state(small_grid, atom, 0.1)

    def test_excited_and_vacuum(self, small_grid):
        e = excited_atom_state(small_grid)
        assert e.atom_amp == 1 and e.photon_number == 0
        v = vacuum_state(small_grid)
        assert v.norm == 0 and v.loss == 1

    def test_norm_invariant_enforced(self, small_grid):
        amps = np.zeros(small_grid.n_modes, complex)
        amps[0] = 0.5
        with pytest.raises(InvariantError, match="1e-12"):
            PhotonState(small_grid, amps)

    def test_grid_atom_mismatch(self, small_grid):
        with pytest.raises(InvariantError):
            ideal_state(small_grid, AtomParams(gamma=2.0))
        with pytest.raises(InvariantError):
            ideal_state(small_grid, AtomParams(t0=1.0))


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(-10, 10), shift=st.floats(-5, 5))
def test_phase_and_delay_preserve_norm(alpha, shift):
    grid = build_mode_grid(AtomParams(), 40, 401)
    s = ideal_state(grid, AtomParams()).with_phase(alpha).delayed(shift)
    assert abs(s.norm - 1.0) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(-math.pi, math.pi))
def test_global_phase_leaves_intensity(alpha):
    grid = build_mode_grid(AtomParams(), 40, 401)
    s = reflected_state(grid, AtomParams())
    t = np.linspace(-3, 6, 37)
    a = temporal_profile(s, t).values
    b = temporal_profile(s.with_phase(alpha), t).values
    np.testing.assert_allclose(np.abs(a) ** 2, np.abs(b) ** 2, atol=1e-13)


class TestEnvelopes:
    def test_norms(self, atom):
        for env in (rising_exponential(atom), gaussian_envelope(atom, 1.3),
                    two_sided_exponential(atom, 1.0, 3.0), core.decaying_exponential(atom)):
            assert env.is_normalized()
            # independent trapezoid check on a fine grid
            t = np.linspace(*env.support, 400001)
            assert np.trapezoid(np.abs(env(t)) ** 2, t) == pytest.approx(1.0, abs=1e-6)

    def test_truncated_norm(self, atom):
        for T in (0.5, 2.0, 5.0):
            assert rising_exponential(atom, T).norm == pytest.approx(-math.expm1(-T), abs=1e-14)

    def test_rising_exponential_is_ideal_state(self, grid, atom):
        s = envelope_state(grid, rising_exponential(atom), atom)
        assert overlap(s, ideal_state(grid, atom)) > 1 - 1e-4

    def test_decaying_exponential_is_reflected_state(self, grid, atom):
        s = envelope_state(grid, core.decaying_exponential(atom), atom)
        assert overlap(s, reflected_state(grid, atom)) > 1 - 1e-4
        # same global phase, not only the same ray
        assert np.vdot(reflected_state(grid, atom).mode_amps, s.mode_amps).real > 0.999

    def test_gaussian_envelope_matches_gaussian_state(self, atom):
        grid = build_mode_grid(atom, 100, 2001)
        a = envelope_state(grid, gaussian_envelope(atom, 1.5), atom)
        b = gaussian_state(grid, atom, 1.5)
        assert np.vdot(b.mode_amps, a.mode_amps) == pytest.approx(1.0, abs=1e-6)

    def test_truncated_needs_allow_loss(self, grid, atom):
        env = rising_exponential(atom, 3.0)
        with pytest.raises(InvariantError, match="normalized"):
            envelope_state(grid, env, atom)
        s = envelope_state(grid, env, atom, allow_loss=True)
        assert s.loss == pytest.approx(math.exp(-3.0), abs=1e-12)
        assert abs(s.norm + s.loss - 1) <= 1e-12

    def test_aliasing_warning(self, small_grid, atom):
        with pytest.warns(RuntimeWarning, match="aliasing"):
            s = envelope_state(small_grid, gaussian_envelope(atom, 30.0), atom)
        assert "aliasing" in s.label and s.warnings


class TestTemporalProfile:
    def test_ideal_profile_is_rising_exponential(self, grid, atom):
        t = np.linspace(-8, -0.5, 200)
        phi = temporal_profile(ideal_state(grid, atom), t).values
        np.testing.assert_allclose(phi, np.exp(0.5 * t), atol=2e-2)
        after = temporal_profile(ideal_state(grid, atom), np.linspace(0.5, 8, 50)).values
        assert np.max(np.abs(after)) < 2e-2

    def test_reflected_profile_sign(self, grid, atom):
        t = np.linspace(0.5, 8, 100)
        phi = temporal_profile(reflected_state(grid, atom), t).values
        np.testing.assert_allclose(phi, -np.exp(-0.5 * t), atol=2e-2)

    def test_chirp_transform_matches_direct_sum(self, small_grid, atom):
        s = gaussian_state(small_grid, atom, 2.0)
        t = np.linspace(-4, 4, 161)
        fast = temporal_profile(s, t).values
        # direct evaluation of the defining sum
        direct = -1j * math.sqrt(small_grid.spacing / (2 * math.pi)) * (
            np.exp(1j * np.outer(t, small_grid.detunings)) @ s.mode_amps)
        np.testing.assert_allclose(fast, direct, atol=1e-11)
        # non-uniform times take the direct path
        t2 = t.copy()
        t2[1:-1] += 1e-3 * np.sin(np.arange(1, t.size - 1))
        slow = temporal_profile(s, t2).values
        ref = -1j * math.sqrt(small_grid.spacing / (2 * math.pi)) * (
            np.exp(1j * np.outer(t2, small_grid.detunings)) @ s.mode_amps)
        np.testing.assert_allclose(slow, ref, atol=1e-12)

    def test_round_trip(self, atom):
        grid = build_mode_grid(atom, 100, 2001)
        s = gaussian_state(grid, atom, 1.0)
        env = temporal_profile(s, np.linspace(-15, 15, 6001))
        assert env.norm == pytest.approx(1.0, abs=1e-6)
        back = envelope_state(grid, env, atom)
        assert overlap(back, s) > 1 - 1e-6

    def test_recurrence_guard(self, small_grid, atom):
        with pytest.raises(InvariantError, match="recurrence"):
            temporal_profile(ideal_state(small_grid, atom), np.linspace(0, 20, 10))
