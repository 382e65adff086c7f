import math

import numpy as np
import pytest

from cdm import (
    Grid2D,
    StateVector,
    dft2,
    fidelity,
    fix_global_phase,
    gaussian_state,
    idft2,
    phase_mask_state,
    zero_frequency_overlap,
)
from cdm.states import StateError

from conftest import random_state


class TestGrid:
    def test_dimensions(self):
        g = Grid2D(12, 16, pitch=0.1)
        assert g.n == 192
        assert g.shape == (16, 12)

    def test_rejects_empty(self):
        with pytest.raises(StateError):
            Grid2D(0, 4)
        with pytest.raises(StateError):
            Grid2D(4, -1)

    def test_centered_coords_mirror_symmetric(self):
        x, y = Grid2D(4, 6).centered_coords()
        assert np.allclose(x + x[:, ::-1], 0)
        assert np.allclose(y + y[::-1, :], 0)


class TestStateVector:
    def test_length_checked(self):
        with pytest.raises(StateError):
            StateVector(Grid2D(2, 2), np.ones(3, dtype=complex))

    def test_normalized_flag_validated(self):
        with pytest.raises(StateError):
            StateVector(Grid2D(2, 2), np.ones(4, dtype=complex), normalized=True)

    def test_amps_immutable(self):
        s = gaussian_state(Grid2D(4, 4), 2.0)
        with pytest.raises(ValueError):
            s.amps[0] = 1.0


class TestGaussianState:
    def test_flat_limit_uniform(self):
        s = gaussian_state(Grid2D(2, 2), math.inf, defocus=0.0, astig=0.0)
        assert np.allclose(s.amps, 0.5)

    def test_normalized_and_complex(self):
        s = gaussian_state(Grid2D(12, 16), 4.0, defocus=0.05, astig=0.0)
        assert abs(np.sum(np.abs(s.amps) ** 2) - 1.0) < 1e-12
        assert np.abs(s.amps.real).max() > 0
        assert np.abs(s.amps.imag).max() > 0

    def test_even_phase_is_mirror_symmetric(self):
        # direct evaluation at mirrored pixels: psi(-x,-y) = psi(x,y)
        g = Grid2D(12, 16)
        s = gaussian_state(g, 4.0, defocus=0.05, astig=0.02)
        img = s.image()
        assert np.allclose(img, img[::-1, ::-1], atol=1e-14)

    def test_matches_closed_form(self):
        g = Grid2D(5, 3)
        w, a2, ast = 2.5, 0.07, -0.03
        s = gaussian_state(g, w, defocus=a2, astig=ast)
        x, y = g.centered_coords()
        psi = np.exp(-(x**2 + y**2) / w**2) * np.exp(
            1j * (a2 * (x**2 + y**2) + ast * (x**2 - y**2)))
        psi = psi.ravel() / np.linalg.norm(psi)
        assert np.allclose(s.amps, psi, atol=1e-14)

    def test_rejects_bad_waist(self):
        with pytest.raises(StateError):
            gaussian_state(Grid2D(4, 4), 0.0)
        with pytest.raises(StateError):
            gaussian_state(Grid2D(4, 4), -1.0)

    def test_unit_norm_across_parameters(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            g = Grid2D(int(rng.integers(1, 9)), int(rng.integers(1, 9)))
            s = gaussian_state(g, float(rng.uniform(0.5, 10)),
                               defocus=float(rng.normal() * 0.1),
                               astig=float(rng.normal() * 0.1))
            assert abs(np.sum(np.abs(s.amps) ** 2) - 1.0) < 1e-12


class TestPhaseMaskState:
    def test_zero_mask_is_plain_gaussian(self):
        g = Grid2D(6, 4)
        s = phase_mask_state(g, np.zeros(g.shape), math.pi / 2, waist=3.0)
        ref = gaussian_state(g, 3.0, defocus=0.0, astig=0.0)
        assert np.allclose(s.amps, ref.amps, atol=1e-14)

    def test_all_ones_mask_is_global_phase(self):
        g = Grid2D(6, 4)
        s = phase_mask_state(g, np.ones(g.shape), math.pi / 2, waist=3.0)
        ref = gaussian_state(g, 3.0, defocus=0.0, astig=0.0)
        assert np.allclose(s.amps, 1j * ref.amps, atol=1e-14)
        assert fidelity(s, ref) == pytest.approx(1.0, abs=1e-12)

    def test_left_half_mask_phases(self):
        g = Grid2D(2, 2)
        mask = np.array([[1, 0], [1, 0]])
        s = phase_mask_state(g, mask, math.pi / 2)
        assert np.allclose(np.angle(s.amps), [math.pi / 2, 0, math.pi / 2, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(StateError):
            phase_mask_state(Grid2D(2, 2), np.zeros((3, 3)), 1.0)

    def test_normalized(self):
        g = Grid2D(8, 8)
        mask = np.zeros(g.shape)
        mask[:, :4] = 1
        s = phase_mask_state(g, mask, 0.7, waist=4.0)
        assert abs(np.sum(np.abs(s.amps) ** 2) - 1.0) < 1e-12


class TestZeroFrequencyOverlap:
    def test_uniform_state_gives_one(self):
        for n in (1, 2, 3, 5):
            g = Grid2D(n, n)
            s = StateVector(g, np.full(g.n, 1.0 / math.sqrt(g.n), dtype=complex),
                            normalized=True)
            assert zero_frequency_overlap(s).phi0 == pytest.approx(1.0, abs=1e-12)

    def test_single_pixel_state(self):
        g = Grid2D(2, 2)
        amps = np.zeros(4, dtype=complex)
        amps[2] = 1.0
        s = StateVector(g, amps, normalized=True)
        assert zero_frequency_overlap(s).phi0 == pytest.approx(0.5, abs=1e-12)

    def test_odd_state_has_no_dc(self):
        g = Grid2D(2, 1)
        s = StateVector(g, np.array([1, -1]) / math.sqrt(2), normalized=True)
        assert abs(zero_frequency_overlap(s).phi0) < 1e-12

    def test_equals_dft_dc_component(self):
        g = Grid2D(5, 7)
        s = random_state(g, seed=3)
        direct = zero_frequency_overlap(s).phi0
        via_dft = dft2(s).image()[0, 0]
        assert abs(direct - via_dft) < 1e-12


class TestDft:
    def test_round_trip(self):
        s = random_state(Grid2D(6, 9), seed=11)
        back = idft2(dft2(s))
        assert np.abs(back.amps - s.amps).max() < 1e-12

    def test_preserves_norm(self):
        s = random_state(Grid2D(8, 3), seed=4)
        assert abs(dft2(s).norm() - s.norm()) < 1e-12


class TestFixGlobalPhase:
    def test_already_fixed_returned_unchanged(self):
        g = Grid2D(2, 2)
        s = StateVector(g, np.full(4, 0.5, dtype=complex), normalized=True)
        assert fix_global_phase(s) is s

    def test_cancels_applied_rotation(self):
        g = Grid2D(4, 4)
        base = gaussian_state(g, 2.0, defocus=0.0, astig=0.0)
        rotated = StateVector(g, base.amps * np.exp(1j * math.pi / 3),
                              normalized=True)
        fixed = fix_global_phase(rotated)
        assert np.abs(fixed.amps - base.amps).max() < 1e-14

    def test_quarter_turn_example(self):
        g = Grid2D(2, 1)
        s = StateVector(g, np.array([1j, 1j]) / math.sqrt(2), normalized=True)
        fixed = fix_global_phase(s)
        assert np.allclose(fixed.amps, np.array([1, 1]) / math.sqrt(2),
                           atol=1e-14)

    def test_idempotent(self):
        s = random_state(Grid2D(5, 5), seed=9)
        once = fix_global_phase(s)
        twice = fix_global_phase(once)
        assert np.array_equal(once.amps, twice.amps)

    def test_rejects_zero_overlap(self):
        g = Grid2D(2, 1)
        s = StateVector(g, np.array([1, -1]) / math.sqrt(2), normalized=True)
        with pytest.raises(StateError):
            fix_global_phase(s)

    def test_fidelity_preserved(self):
        s = random_state(Grid2D(4, 6), seed=21)
        assert fidelity(fix_global_phase(s), s) == pytest.approx(1.0, abs=1e-12)


class TestFidelity:
    def test_self_fidelity(self):
        s = random_state(Grid2D(3, 3), seed=1)
        assert fidelity(s, s) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_states(self):
        g = Grid2D(2, 1)
        a = StateVector(g, np.array([1.0, 0.0], dtype=complex), normalized=True)
        b = StateVector(g, np.array([0.0, 1.0], dtype=complex), normalized=True)
        assert fidelity(a, b) == 0.0

    def test_global_phase_invariance(self):
        s = random_state(Grid2D(4, 4), seed=2)
        for theta in (0.3, -1.2, math.pi):
            t = StateVector(s.grid, s.amps * np.exp(1j * theta), normalized=True)
            assert fidelity(s, t) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(5)
        g = Grid2D(4, 3)
        for k in range(10):
            a = random_state(g, seed=100 + k, ensure_overlap=False)
            b = random_state(g, seed=200 + k, ensure_overlap=False)
            fab, fba = fidelity(a, b), fidelity(b, a)
            assert fab == pytest.approx(fba, abs=1e-14)
            assert 0.0 <= fab <= 1.0

    def test_normalizes_unflagged_inputs(self):
        g = Grid2D(2, 2)
        a = StateVector(g, np.full(4, 3.0, dtype=complex))
        b = StateVector(g, np.full(4, 0.5, dtype=complex), normalized=True)
        assert fidelity(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_grid_mismatch(self):
        a = random_state(Grid2D(2, 2), seed=1)
        b = random_state(Grid2D(4, 1), seed=1)
        with pytest.raises(StateError):
            fidelity(a, b)
