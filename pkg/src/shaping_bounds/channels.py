"""Concrete channels and end-to-end bound computations.

Covers binary symmetric / non-symmetric channels, scaled PAM over a
quantized AWGN channel (with the scaling optimized per bound), the
Gaussian large-codebook closed form and a cost-constrained Blahut-Arimoto
capacity baseline.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.special import ndtr, rel_entr

from .errors import ConvergenceError, InfeasibleConstraintError
from .info import LN2, Channel, Pmf, as_channel, binary_entropy, mutual_information
from .projection import ConstraintSet, project
from .rates import gallager_rate, matched_rate, mjt_applicable, mjt_rate

OBJECTIVES = ("matched", "gallager", "mjt")
ALPHA_GRID_POINTS = 64
ALPHA_XTOL = 1e-4


def bsc(gamma: float) -> Channel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"crossover probability {gamma} outside [0, 1]")
    return Channel([[1.0 - gamma, gamma], [gamma, 1.0 - gamma]])


def bnsc(gamma0: float, gamma1: float) -> Channel:
    """Binary channel flipping 0 with probability gamma0 and 1 with gamma1."""
    for g in (gamma0, gamma1):
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"crossover probability {g} outside [0, 1]")
    return Channel([[1.0 - gamma0, gamma0], [gamma1, 1.0 - gamma1]])


def bnsc_mjt_input(gamma0: float, gamma1: float) -> Pmf:
    """Binary input pmf with p(0)/p(1) = exp(H(gamma0) - H(gamma1)), entropies in nats.

    This is the unique binary pmf for which log p(x) - H(Y|X=x) does not
    depend on x, so the joint-typicality bound applies.
    """
    d = (binary_entropy(gamma0) - binary_entropy(gamma1)) * LN2
    p0 = 1.0 / (1.0 + math.exp(-d))
    return Pmf([p0, 1.0 - p0])


def pam_levels(m: int) -> np.ndarray:
    """Symmetric M-PAM constellation {±1, ±3, ..., ±(M-1)}."""
    if m < 2:
        raise ValueError("PAM order must be at least 2")
    return np.arange(-(m - 1), m, 2, dtype=float)


@dataclass(frozen=True)
class OutputGrid:
    half_width_sigmas: float = 8.0
    points_per_sigma: int = 24


@dataclass(frozen=True)
class PamAwgnConfig:
    levels: np.ndarray
    alpha: float = 1.0
    noise_variance: float = 1.0
    power_budget: float = 1.0
    output_grid: OutputGrid = field(default_factory=OutputGrid)

    def __post_init__(self):
        lv = np.array(self.levels, dtype=float)
        if lv.ndim != 1 or lv.size < 2:
            raise ValueError("need at least two constellation points")
        if np.unique(lv).size != lv.size:
            raise ValueError("constellation points must be distinct")
        if not (self.alpha > 0 and self.noise_variance > 0 and self.power_budget > 0):
            raise ValueError("alpha, noise_variance and power_budget must be positive")
        if self.output_grid.half_width_sigmas <= 0 or self.output_grid.points_per_sigma < 1:
            raise ValueError("degenerate output grid")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.noise_variance)

    @property
    def uniform_power(self) -> float:
        return float(np.mean(self.levels ** 2))


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    capacity_bits: float
    r_uniform_bits: float
    r_matched_bits: float
    r_gallager_bits: float
    r_mjt_bits: Optional[float]
    r_naive_bits: float
    alpha_matched: float
    alpha_gallager: float
    alpha_mjt: Optional[float]


def _cell_layout(cfg: PamAwgnConfig):
    """Cell width, number of cells, and either the cell index holding each
    scaled level (equispaced constellations) or None.

    For equispaced constellations the width divides the scaled spacing so that
    every alpha*x sits on a cell center and all rows are shifts of each other.
    """
    sigma = cfg.sigma
    grid = cfg.output_grid
    pts = cfg.alpha * cfg.levels
    lo_pt = pts.min()
    gaps = np.diff(np.sort(pts))
    width = sigma / grid.points_per_sigma
    aligned = bool(np.allclose(gaps, gaps[0], rtol=1e-12, atol=0.0))
    if aligned:
        width = gaps[0] / math.ceil(gaps[0] / width - 1e-9)
    pad = math.ceil(grid.half_width_sigmas * sigma / width)
    span = math.ceil((pts.max() - lo_pt) / width - 1e-9)
    n_cells = span + 2 * pad + 1
    if n_cells > 10_000_000:
        raise ValueError("degenerate output grid (too many cells)")
    centers = np.rint((pts - lo_pt) / width).astype(np.int64) + pad if aligned else None
    return width, n_cells, centers, lo_pt - (pad + 0.5) * width


def _cell_masses(z_lo, z_hi):
    # Gaussian mass of [z_lo, z_hi] taken from whichever tail is more accurate
    return np.where(z_lo >= 0, ndtr(-z_lo) - ndtr(-z_hi), ndtr(z_hi) - ndtr(z_lo))


def quantized_awgn(cfg: PamAwgnConfig) -> Channel:
    """Y = alpha*X + Z with Z ~ N(0, noise_variance), integrated over output cells.

    The outermost cells are open-ended, so every row carries the full
    Gaussian mass before the final renormalization.
    """
    width, n_cells, centers, left_edge = _cell_layout(cfg)
    sigma = cfg.sigma
    if centers is not None:
        # one table of cell masses indexed by (cell - center), shared by all rows
        rel = np.arange(-n_cells, n_cells + 1)
        table = _cell_masses((rel - 0.5) * width / sigma, (rel + 0.5) * width / sigma)
        idx = np.arange(n_cells)[None, :] - centers[:, None] + n_cells
        rows = table[idx]
        top_of_first = (0.5 - centers) * width / sigma
        bottom_of_last = (n_cells - 1.5 - centers) * width / sigma
    else:
        edges = left_edge + width * np.arange(n_cells + 1)
        z = (edges[None, :] - cfg.alpha * cfg.levels[:, None]) / sigma
        rows = _cell_masses(z[:, :-1], z[:, 1:])
        top_of_first, bottom_of_last = z[:, 1], z[:, -2]
    # the outermost cells are open-ended
    rows[:, 0] = ndtr(top_of_first)
    rows[:, -1] = ndtr(-bottom_of_last)
    rows = np.clip(rows, 0.0, None)
    return Channel(rows / rows.sum(axis=1, keepdims=True))


def awgn_power_constraint(cfg: PamAwgnConfig) -> ConstraintSet:
    """Average power of the scaled input at most beta0, i.e. mean |x|^2 <= beta0/alpha^2."""
    return ConstraintSet.power(cfg.levels, cfg.power_budget / cfg.alpha ** 2)


def awgn_capacity(snr_linear: float) -> float:
    if snr_linear < 0:
        raise ValueError("snr must be non-negative")
    return 0.5 * math.log2(1.0 + snr_linear)


def alpha_bracket(cfg: PamAwgnConfig) -> tuple:
    """(alpha at which the uniform pmf meets the budget, alpha just short of infeasibility)."""
    lo = math.sqrt(cfg.power_budget / cfg.uniform_power)
    sq = cfg.levels ** 2
    min_power = sq[sq > 0].min() if np.any(sq > 0) else 0.0
    hi = 0.999 * math.sqrt(cfg.power_budget / min_power)
    if not hi > lo:
        raise InfeasibleConstraintError("alpha search bracket is empty")
    return lo, hi


def _objective_rates(cfg: PamAwgnConfig, alpha: float, objectives) -> dict:
    c = replace(cfg, alpha=alpha)
    ch = quantized_awgn(c)
    e = awgn_power_constraint(c)
    p = Pmf.uniform(cfg.levels.size)
    proj = project(p, e)
    out = {}
    for obj in objectives:
        if obj == "matched":
            out[obj] = matched_rate(p, e, ch, projection=proj)
        elif obj == "gallager":
            out[obj] = gallager_rate(p, e, ch, projection=proj)
        elif obj == "mjt":
            out[obj] = mjt_rate(p, e, ch, projection=proj) if mjt_applicable(p, ch) else None
        elif obj == "naive":
            out[obj] = mutual_information(p, ch) - proj.divergence_bits
        else:
            raise ValueError(f"unknown objective {obj!r}")
    return out


def _refine(cfg, objective, grid, values):
    i = int(np.argmax(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    best_alpha, best = grid[i], values[i]
    if b - a <= ALPHA_XTOL:
        return best_alpha, best
    res = minimize_scalar(
        lambda x: -_objective_rates(cfg, x, (objective,))[objective],
        bounds=(a, b), method="bounded", options={"xatol": ALPHA_XTOL / 4},
    )
    if -res.fun > best:
        return float(res.x), float(-res.fun)
    return float(best_alpha), float(best)


def optimize_alphas(cfg: PamAwgnConfig, objectives=OBJECTIVES) -> dict:
    """Maximize each bound over alpha; one shared coarse grid, then a bounded
    scalar refinement per objective around its best grid point.

    Returns ``{objective: (alpha_opt, rate_bits)}``; an objective whose bound
    does not apply maps to ``(None, None)``.
    """
    lo, hi = alpha_bracket(cfg)
    grid = np.linspace(lo, hi, ALPHA_GRID_POINTS)
    table = [_objective_rates(cfg, a, objectives) for a in grid]
    out = {}
    for obj in objectives:
        vals = [row[obj] for row in table]
        if any(v is None for v in vals):
            out[obj] = (None, None)
            continue
        out[obj] = _refine(cfg, obj, grid, np.array(vals))
    return out


def optimize_alpha(cfg: PamAwgnConfig, objective: str) -> tuple:
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    alpha, rate = optimize_alphas(cfg, (objective,))[objective]
    if alpha is None:
        raise ValueError(f"the {objective} bound does not apply to this configuration")
    return alpha, rate


def uniform_rate(cfg: PamAwgnConfig) -> float:
    """I(X;Y) for uniform PAM scaled to use the full power budget."""
    lo, _ = alpha_bracket(cfg)
    c = replace(cfg, alpha=lo)
    return mutual_information(Pmf.uniform(cfg.levels.size), quantized_awgn(c))


def gaussian_largecode_rate(beta0: float, B0: float, noise_variance: float) -> tuple:
    """Gallager bound for a Gaussian large codebook of power B0 shaped to power beta0.

    exact = 1/2 log2(1 + beta0/s2) + D(q*_Y || p_Y) - D(q*_X || p_X) with both
    divergences between zero-mean Gaussians; approx = 1/2 log2(beta0/s2).
    """
    if beta0 <= 0 or noise_variance <= 0 or B0 <= 0:
        raise ValueError("powers must be positive")

    def gauss_div(v1, v2):
        r = v1 / v2
        return 0.5 * (r - math.log(r) - 1.0) / LN2

    dx = gauss_div(beta0, B0)
    dy = gauss_div(beta0 + noise_variance, B0 + noise_variance)
    exact = 0.5 * math.log2(1.0 + beta0 / noise_variance) + dy - dx
    return exact, 0.5 * math.log2(beta0 / noise_variance)


def _baa_cost(W, phi, s, r, tol, max_iter):
    """Blahut-Arimoto for max I(r) - s*E_r[phi] (nats), warm-started at r."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logW = np.where(W > 0, np.log(W), 0.0)
    for it in range(max_iter):
        qy = r @ W
        with np.errstate(divide="ignore"):
            logq = np.log(qy)
        d = np.sum(W * (logW - np.where(W > 0, logq, 0.0)), axis=1)
        score = d - s * phi
        lower = float(r @ score)
        upper = float(score.max())
        if upper - lower < tol * LN2:
            return r, it
        r = r * np.exp(score - upper)
        r /= r.sum()
    raise ConvergenceError("Blahut-Arimoto iteration cap reached", residual=(upper - lower) / LN2)


def constrained_capacity_baa(ch, e: ConstraintSet, tol: float = 1e-9,
                             max_iter: int = 200000) -> tuple:
    """max I_P(X;Y) over P in E.

    One constraint: bisection on the cost multiplier around inner
    Blahut-Arimoto runs.  Several constraints: SLSQP on the simplex.
    Returns ``(q_hat, capacity_bits)``.
    """
    ch = as_channel(ch)
    W = ch.rows
    n = ch.input_size
    if e.alphabet_size != n:
        raise ValueError("constraint alphabet does not match channel input")
    if e.num_constraints == 1:
        phi, beta = e.phi[0], float(e.beta[0])
        r = np.full(n, 1.0 / n)
        r, _ = _baa_cost(W, phi, 0.0, r, tol, max_iter)
        if r @ phi <= beta + 1e-12:
            return Pmf(r), mutual_information(r, ch)
        if phi.min() > beta:
            raise InfeasibleConstraintError("no input pmf satisfies the constraint")
        s_lo, s_hi = 0.0, 1.0
        r_hi = r
        while True:
            r_hi, _ = _baa_cost(W, phi, s_hi, r_hi, tol, max_iter)
            if r_hi @ phi <= beta:
                break
            s_lo, s_hi = s_hi, 2.0 * s_hi
            if s_hi > 1e12:
                raise ConvergenceError("cost multiplier diverged")
        r_mid = r_hi
        best = r_hi
        for _ in range(200):
            s = 0.5 * (s_lo + s_hi)
            r_mid, _ = _baa_cost(W, phi, s, r_mid, tol, max_iter)
            if r_mid @ phi <= beta:
                s_hi, best = s, r_mid
            else:
                s_lo = s
            if s_hi - s_lo < 1e-12 * max(1.0, s_hi):
                break
        # at the optimum the constraint is tight; fix any residual slack by
        # moving along the segment between the two bracketing solutions
        r_lo, _ = _baa_cost(W, phi, s_lo, r_mid, tol, max_iter)
        c_lo, c_hi = r_lo @ phi, best @ phi
        if c_lo > beta > c_hi:
            t = (c_lo - beta) / (c_lo - c_hi)
            mix = (1 - t) * r_lo + t * best
            if mutual_information(mix, ch) > mutual_information(best, ch):
                best = mix
        return Pmf(best / best.sum()), mutual_information(best / best.sum(), ch)

    def neg_mi(x):
        x = np.clip(x, 0.0, None)
        x = x / x.sum()
        qy = x @ W
        return -float(np.sum(x[:, None] * rel_entr(W, qy[None, :]))) / LN2

    cons = [{"type": "eq", "fun": lambda x: x.sum() - 1.0},
            {"type": "ineq", "fun": lambda x: e.beta - e.phi @ x}]
    start = project(Pmf.uniform(n), e).q_star.probs
    res = minimize(neg_mi, start, method="SLSQP", bounds=[(0.0, 1.0)] * n,
                   constraints=cons, options={"ftol": tol * 1e-2, "maxiter": 1000})
    x = np.clip(res.x, 0.0, None)
    x /= x.sum()
    if -neg_mi(x) < -neg_mi(start):
        x = start
    return Pmf(x), mutual_information(x, ch)


def _sweep_point(levels, snr_db, noise_variance, grid) -> SweepRow:
    beta0 = noise_variance * 10.0 ** (snr_db / 10.0)
    cfg = PamAwgnConfig(levels, 1.0, noise_variance, beta0, grid)
    opt = optimize_alphas(cfg, OBJECTIVES)
    lo, _ = alpha_bracket(cfg)
    naive = _objective_rates(cfg, opt["gallager"][0], ("naive",))["naive"]
    return SweepRow(
        snr_db=float(snr_db),
        capacity_bits=awgn_capacity(beta0 / noise_variance),
        r_uniform_bits=_objective_rates(cfg, lo, ("matched",))["matched"],
        r_matched_bits=opt["matched"][1],
        r_gallager_bits=opt["gallager"][1],
        r_mjt_bits=opt["mjt"][1],
        r_naive_bits=naive,
        alpha_matched=opt["matched"][0],
        alpha_gallager=opt["gallager"][0],
        alpha_mjt=opt["mjt"][0],
    )


def awgn_sweep(levels: Sequence[float], snr_grid_db: Sequence[float],
               noise_variance: float = 1.0, grid: OutputGrid = OutputGrid(),
               workers: int = 1) -> list:
    """One SweepRow per SNR, holding the noise variance fixed and setting
    beta0 = SNR * noise_variance.  Each bound gets its own optimal alpha.

    ``r_naive_bits`` is evaluated at the Gallager-optimal alpha.  Results are
    returned in grid order for any number of workers.
    """
    levels = np.asarray(levels, dtype=float)
    snrs = [float(s) for s in snr_grid_db]
    task = lambda s: _sweep_point(levels, s, noise_variance, grid)
    if workers <= 1:
        return [task(s) for s in snrs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, snrs))


def best_rate_at(levels, snr_db: float, objective: str, noise_variance: float = 1.0,
                 grid: OutputGrid = OutputGrid()) -> float:
    """Alpha-optimized rate of one bound ("mismatched" = best of Gallager and MJT)."""
    beta0 = noise_variance * 10.0 ** (snr_db / 10.0)
    cfg = PamAwgnConfig(levels, 1.0, noise_variance, beta0, grid)
    objs = ("gallager", "mjt") if objective == "mismatched" else (objective,)
    opt = optimize_alphas(cfg, objs)
    return max(v[1] for v in opt.values() if v[1] is not None)


def snr_gap_db(levels, target_bits: float, objective: str, bracket_db=(-5.0, 35.0),
               noise_variance: float = 1.0, grid: OutputGrid = OutputGrid(),
               xtol: float = 1e-3) -> tuple:
    """Horizontal distance (dB) between a bound and the AWGN capacity at a given rate.

    Returns ``(snr_db_bound, snr_db_capacity, gap_db)``.
    """
    f = lambda s: best_rate_at(levels, s, objective, noise_variance, grid) - target_bits
    snr_bound = brentq(f, *bracket_db, xtol=xtol)
    snr_cap = 10.0 * math.log10(2.0 ** (2.0 * target_bits) - 1.0)
    return snr_bound, snr_cap, snr_bound - snr_cap
