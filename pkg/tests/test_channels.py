import math
from dataclasses import replace

import numpy as np
import pytest

from shaping_bounds.channels import (
    OutputGrid,
    PamAwgnConfig,
    alpha_bracket,
    awgn_capacity,
    awgn_power_constraint,
    awgn_sweep,
    bnsc,
    bsc,
    constrained_capacity_baa,
    gaussian_largecode_rate,
    optimize_alpha,
    optimize_alphas,
    pam_levels,
    quantized_awgn,
    uniform_rate,
)
from shaping_bounds.errors import InfeasibleConstraintError
from shaping_bounds.info import Pmf, binary_entropy, mutual_information, row_entropies
from shaping_bounds.projection import ConstraintSet, project
from shaping_bounds.rates import mjt_applicable

from .oracles import bsc_hamming_capacity_grid, mi_bits

PAM4 = pam_levels(4)


class TestBinary:
    def test_bsc(self):
        assert np.array_equal(bsc(0.1).rows, [[0.9, 0.1], [0.1, 0.9]])
        with pytest.raises(ValueError):
            bsc(1.2)

    def test_bnsc(self):
        assert np.array_equal(bnsc(0.025, 0.05).rows, [[0.975, 0.025], [0.05, 0.95]])
        assert np.allclose(bnsc(0.1, 0.1).rows, bsc(0.1).rows)

    def test_pam_levels(self):
        assert pam_levels(4).tolist() == [-3, -1, 1, 3]
        assert pam_levels(16).size == 16 and pam_levels(16).mean() == 0
        with pytest.raises(ValueError):
            pam_levels(1)


class TestQuantizedAwgn:
    def test_rows_stochastic(self):
        for var in (0.01, 1.0, 25.0):
            ch = quantized_awgn(PamAwgnConfig(PAM4, 0.7, var, 1.0))
            assert np.abs(ch.rows.sum(axis=1) - 1).max() < 1e-12

    def test_small_noise_concentrates(self):
        ch = quantized_awgn(PamAwgnConfig(PAM4, 1.0, 1e-4, 1.0))
        assert mutual_information(Pmf.uniform(4), ch) == pytest.approx(2.0, abs=1e-9)

    def test_high_snr_16pam(self):
        lv = pam_levels(16)
        ch = quantized_awgn(PamAwgnConfig(lv, 1.0, 0.01, 1.0))
        assert mutual_information(Pmf.uniform(16), ch) == pytest.approx(4.0, abs=1e-6)

    def test_row_entropies_equal(self):
        ch = quantized_awgn(PamAwgnConfig(pam_levels(16), 0.37, 1.0, 1.0))
        assert np.ptp(row_entropies(ch)) < 1e-12
        assert mjt_applicable(Pmf.uniform(16), ch)

    @pytest.mark.parametrize("m", [4, 16])
    def test_grid_doubling(self, m):
        lv = pam_levels(m)
        cfg = PamAwgnConfig(lv, 1.0, float(np.mean(lv ** 2)) / 10.0, 1.0)  # 10 dB
        g = cfg.output_grid
        fine = replace(cfg, output_grid=OutputGrid(g.half_width_sigmas, 2 * g.points_per_sigma))
        i1 = mutual_information(Pmf.uniform(m), quantized_awgn(cfg))
        i2 = mutual_information(Pmf.uniform(m), quantized_awgn(fine))
        assert abs(i1 - i2) < 1e-4

    def test_nonuniform_levels(self):
        lv = np.array([-2.0, 0.0, 0.5, 3.0])
        ch = quantized_awgn(PamAwgnConfig(lv, 1.0, 0.5, 1.0))
        assert np.abs(ch.rows.sum(axis=1) - 1).max() < 1e-12
        # the symbol at 0.5 must sit between its neighbours in output mean
        means = ch.rows @ np.arange(ch.output_size)
        assert np.all(np.diff(means) > 0)

    def test_matches_continuous_mi(self):
        # binary antipodal: compare to a direct quadrature of the continuous MI
        cfg = PamAwgnConfig([-1.0, 1.0], 1.0, 1.0, 1.0, OutputGrid(10.0, 64))
        got = mutual_information(Pmf.uniform(2), quantized_awgn(cfg))
        y = np.linspace(-12, 12, 200001)
        f = lambda m: np.exp(-(y - m) ** 2 / 2) / math.sqrt(2 * math.pi)
        mix = 0.5 * (f(-1) + f(1))
        integrand = 0.5 * f(1) * np.log2(f(1) / mix) + 0.5 * f(-1) * np.log2(f(-1) / mix)
        ref = float(np.sum(integrand) * (y[1] - y[0]))
        assert got == pytest.approx(ref, abs=1e-4)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PamAwgnConfig([1.0, 1.0])
        with pytest.raises(ValueError):
            PamAwgnConfig(PAM4, alpha=0.0)


class TestPower:
    def test_constraint_scaling(self):
        cfg = PamAwgnConfig(PAM4, 0.5, 1.0, 1.5)
        e = awgn_power_constraint(cfg)
        assert np.allclose(e.phi, [[9, 1, 1, 9]])
        assert e.beta[0] == pytest.approx(6.0)

    def test_bracket(self):
        cfg = PamAwgnConfig(PAM4, 1.0, 1.0, 5.0)
        lo, hi = alpha_bracket(cfg)
        assert lo == pytest.approx(1.0) and hi == pytest.approx(0.999 * math.sqrt(5.0))

    def test_capacity(self):
        assert awgn_capacity(0.0) == 0.0
        assert awgn_capacity(3.0) == pytest.approx(1.0)
        assert awgn_capacity(63.0) == pytest.approx(3.0)
        with pytest.raises(ValueError):
            awgn_capacity(-1.0)

    def test_uniform_rate(self):
        cfg = PamAwgnConfig(PAM4, 1.0, 1.0, 5.0)
        assert uniform_rate(cfg) == pytest.approx(
            mutual_information(Pmf.uniform(4), quantized_awgn(cfg)), abs=1e-14)


class TestAlpha:
    def test_matched_beats_uniform(self):
        cfg = PamAwgnConfig(pam_levels(8), 1.0, 1.0, 10 ** 1.2)
        _, rate = optimize_alpha(cfg, "matched")
        assert rate >= uniform_rate(cfg) - 1e-9
        assert rate <= awgn_capacity(10 ** 1.2) + 1e-9

    def test_ordering(self):
        cfg = PamAwgnConfig(pam_levels(8), 1.0, 1.0, 10.0)
        opt = optimize_alphas(cfg)
        assert opt["gallager"][1] <= opt["matched"][1] + 1e-9
        assert opt["mjt"][1] <= opt["matched"][1] + 1e-9
        lo, hi = alpha_bracket(cfg)
        for a, _ in opt.values():
            assert lo <= a <= hi

    def test_low_snr_prefers_uniform_scaling(self):
        # at very low SNR shaping gains vanish; the matched optimum stays near alpha_lo
        cfg = PamAwgnConfig(pam_levels(4), 1.0, 1.0, 10 ** -1.0)
        alpha, rate = optimize_alpha(cfg, "matched")
        assert rate == pytest.approx(uniform_rate(cfg), abs=2e-3)

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            optimize_alpha(PamAwgnConfig(PAM4), "best")


class TestGaussian:
    def test_example(self):
        exact, approx = gaussian_largecode_rate(1.0, 1e6, 0.01)
        assert approx == pytest.approx(0.5 * math.log2(100))
        assert abs(exact - approx) < 0.02

    def test_gap_shrinks(self):
        gaps = [abs(np.subtract(*gaussian_largecode_rate(1.0, b, 0.01))) for b in (1e2, 1e4, 1e6)]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_no_shaping(self):
        exact, _ = gaussian_largecode_rate(2.0, 2.0, 1.0)
        assert exact == pytest.approx(awgn_capacity(2.0), abs=1e-14)

    def test_invalid(self):
        with pytest.raises(ValueError):
            gaussian_largecode_rate(0.0, 1.0, 1.0)


class TestBaa:
    @pytest.mark.parametrize("gamma,beta0", [(0.1, 0.3), (0.05, 0.1), (0.2, 0.45)])
    def test_bsc_vs_grid(self, gamma, beta0):
        q, cap = constrained_capacity_baa(bsc(gamma), ConstraintSet.hamming(beta0))
        assert cap == pytest.approx(bsc_hamming_capacity_grid(gamma, beta0), abs=1e-4)
        assert q.probs[1] <= beta0 + 1e-9

    def test_inactive_constraint(self):
        q, cap = constrained_capacity_baa(bsc(0.1), ConstraintSet.hamming(0.6))
        assert cap == pytest.approx(1 - binary_entropy(0.1), abs=1e-8)

    def test_unconstrained_z_channel(self):
        # Z-channel with flip f: capacity log2(1 + (1 - f) f^{f/(1-f)}) = log2(1.25) at f = 0.5
        W = [[1.0, 0.0], [0.5, 0.5]]
        _, cap = constrained_capacity_baa(W, ConstraintSet([[0.0, 0.0]], [1.0]))
        assert cap == pytest.approx(math.log2(1.25), abs=1e-7)

    def test_awgn_close_to_projection(self):
        cfg = PamAwgnConfig(pam_levels(8), 0.3, 1.0, 1.0)
        ch = quantized_awgn(cfg)
        e = awgn_power_constraint(cfg)
        qstar = project(Pmf.uniform(8), e).q_star
        q_hat, cap = constrained_capacity_baa(ch, e)
        i_star = mutual_information(qstar, ch)
        assert -1e-9 <= cap - i_star < 0.02
        assert e.contains(q_hat.probs, tol=1e-9)

    def test_two_constraints(self):
        W = np.array([[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]])
        e = ConstraintSet([[0, 1, 2], [1, 0, 0]], [0.8, 0.5])
        q, cap = constrained_capacity_baa(W, e)
        assert e.contains(q.probs, tol=1e-7)
        # compare to a coarse simplex grid
        best = 0.0
        for a in np.linspace(0, 1, 201):
            for b in np.linspace(0, 1 - a, max(2, int(round((1 - a) * 200)) + 1)):
                P = np.array([a, b, 1 - a - b])
                if e.contains(P, tol=1e-12):
                    best = max(best, mi_bits(P, W))
        assert cap >= best - 1e-6

    def test_infeasible(self):
        with pytest.raises(InfeasibleConstraintError):
            constrained_capacity_baa(bsc(0.1), ConstraintSet([[1.0, 2.0]], [0.5]))


class TestSweep:
    def test_small_sweep(self):
        rows = awgn_sweep(pam_levels(4), [0.0, 10.0])
        assert [r.snr_db for r in rows] == [0.0, 10.0]
        for r in rows:
            assert r.r_matched_bits <= r.capacity_bits + 1e-9
            assert r.r_gallager_bits <= r.r_matched_bits + 1e-9
            assert r.r_mjt_bits is not None

    def test_workers_identical(self):
        a = awgn_sweep(pam_levels(4), [2.0, 6.0, 12.0], workers=1)
        b = awgn_sweep(pam_levels(4), [2.0, 6.0, 12.0], workers=3)
        assert a == b

    @pytest.mark.parametrize("snr_db", [3.0, 12.0])
    def test_grid_refinement(self, snr_db):
        fine = OutputGrid(8.0, 48)
        a = awgn_sweep(pam_levels(8), [snr_db])[0]
        b = awgn_sweep(pam_levels(8), [snr_db], grid=fine)[0]
        for name in ("r_matched_bits", "r_gallager_bits", "r_mjt_bits", "r_uniform_bits"):
            assert abs(getattr(a, name) - getattr(b, name)) < 1e-3
