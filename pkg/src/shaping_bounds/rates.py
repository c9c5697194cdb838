"""Achievable-rate bounds for shaped subcodes selected from a larger codebook.

All rates are in bits per channel use.  Notation follows the usual one:
``p`` is the pmf that generated the large codebook, ``q*`` its projection
onto the constraint set, ``q*(Y)`` / ``p(Y)`` the channel output marginals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp, rel_entr

from .errors import ConvergenceError, NotApplicableError
from .info import (
    LN2,
    JointPmf,
    log_sum_exp,
    as_channel,
    as_pmf,
    entropy,
    kl_divergence,
    mutual_information,
    output_marginal,
    row_entropies,
)
from .projection import ConstraintSet, ProjectionResult, project

MJT_SEEDS = ((0.0, 1.0), (1.0, 1.0), (0.5, 0.5))
MJT_TOL = 1e-10
MJT_MAX_ITER = 200
APPLICABILITY_TOL = 1e-9


@dataclass(frozen=True)
class RateReport:
    r_matched_bits: float
    r_gallager_bits: float
    r_mjt_bits: Optional[float]
    r_naive_bits: float
    codeword_cap_bits: float
    rs_min_bits: float


@dataclass(frozen=True)
class MjtSolution:
    p_star: JointPmf
    lambda1: float
    lambda2: float
    log_z: float
    divergence_bits: float
    residuals: tuple
    iterations: int = 0


def _codeword_cap(p, proj: ProjectionResult) -> float:
    return entropy(p) - proj.divergence_bits


def matched_rate(p, e: ConstraintSet, ch, projection: ProjectionResult = None) -> float:
    """min(H_p(X) - D(q*||p), I_q*(X;Y)): rate of the subcode under a decoder
    that knows which words were selected."""
    p, ch = as_pmf(p), as_channel(ch)
    proj = projection or project(p, e)
    return min(_codeword_cap(p, proj), mutual_information(proj.q_star, ch))


def naive_rate(p, e: ConstraintSet, ch, projection: ProjectionResult = None) -> float:
    """Large-code rate minus the shaping rate, I_p(X;Y) - D(q*||p)."""
    p, ch = as_pmf(p), as_channel(ch)
    proj = projection or project(p, e)
    return mutual_information(p, ch) - proj.divergence_bits


def gallager_e0(rho: float, p1, p2, ch) -> float:
    """Two-distribution Gallager function in bits.

    ``-log2 sum_y a(y) b(y)^rho`` with ``a(y) = sum_x p1(x) W(y|x)^(1/(1+rho))``
    and ``b`` the same sum under ``p2``.  Accumulated in the log domain.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    p1, p2, ch = as_pmf(p1), as_pmf(p2), as_channel(ch)
    if not p1.support_size == p2.support_size == ch.input_size:
        raise ValueError("input pmfs and channel disagree on the input alphabet")
    if rho == 0.0:
        return 0.0
    with np.errstate(divide="ignore"):
        log_w = np.log(ch.rows) / (1.0 + rho)
        log_a = logsumexp(np.log(p1.probs)[:, None] + log_w, axis=0)
        log_b = logsumexp(np.log(p2.probs)[:, None] + log_w, axis=0)
    terms = log_a + rho * log_b
    return float(-logsumexp(terms) / LN2)


def mismatched_mi(qstar, p, ch) -> float:
    """Closed form of lim_{rho->0} E0(rho, q*, p) / rho:
    I_q*(X;Y) + D(q*(Y) || p(Y))."""
    qstar, p, ch = as_pmf(qstar), as_pmf(p), as_channel(ch)
    return mutual_information(qstar, ch) + kl_divergence(
        output_marginal(qstar, ch), output_marginal(p, ch)
    )


def gallager_rate(p, e: ConstraintSet, ch, projection: ProjectionResult = None) -> float:
    p, ch = as_pmf(p), as_channel(ch)
    proj = projection or project(p, e)
    d = proj.divergence_bits
    return min(_codeword_cap(p, proj), mismatched_mi(proj.q_star, p, ch) - d)


def divergence_contraction_check(p1, p2, ch) -> tuple:
    """(D(p1(Y)||p2(Y)), D(p1(X)||p2(X))); the first never exceeds the second."""
    ch = as_channel(ch)
    out = kl_divergence(output_marginal(p1, ch), output_marginal(p2, ch))
    return out, kl_divergence(p1, p2)


def mjt_offsets(p, ch) -> np.ndarray:
    """log2 p(x) - H(Y|X=x) over the support of p."""
    p, ch = as_pmf(p), as_channel(ch)
    support = p.probs > 0
    return np.log2(p.probs[support]) - row_entropies(ch)[support]


def mjt_applicable(p, ch, tol: float = APPLICABILITY_TOL) -> bool:
    """True when log2 p(x) - H(Y|X=x) is the same constant for every x (up to tol)."""
    offsets = mjt_offsets(p, ch)
    return bool(offsets.max() - offsets.min() <= tol)


class _MjtFamily:
    """Exponential family through p(x) q*(y) with statistics ln q*(y), ln p(x,y)."""

    def __init__(self, p, qy, rows):
        with np.errstate(divide="ignore"):
            log_px = np.log(p)
            log_qy = np.log(qy)
            log_w = np.log(rows)
        log_pxy = log_px[:, None] + log_w
        self.mask = np.isfinite(log_pxy) & np.isfinite(log_qy)[None, :]
        self.shape = rows.shape
        xs, ys = np.nonzero(self.mask)
        self.base = log_px[xs] + log_qy[ys]
        self.stats = np.stack([log_qy[ys], log_pxy[xs, ys]])
        # targets: E[ln q*(Y)] under q*(Y), E[ln p(X,Y)] under p(X,Y)
        pxy = np.exp(log_pxy[self.mask])
        self.target = np.array([
            float(qy[qy > 0] @ log_qy[qy > 0]),
            float(pxy @ log_pxy[self.mask]),
        ])

    def evaluate(self, theta):
        logw = self.base + theta @ self.stats
        log_norm = log_sum_exp(logw)
        return np.exp(logw - log_norm), log_norm

    def full(self, values):
        out = np.zeros(self.shape)
        out[self.mask] = values
        return out


def _solve_family(fam: _MjtFamily, seed, tol, max_iter):
    theta = np.array(seed, dtype=float)
    P, log_norm = fam.evaluate(theta)
    dual = theta @ fam.target - log_norm
    for it in range(max_iter + 1):
        mean = fam.stats @ P
        gap = fam.target - mean
        residual = np.abs(gap) / LN2
        if residual.max() <= tol:
            return theta, P, log_norm, residual, it
        if it == max_iter:
            break
        centered = fam.stats - mean[:, None]
        cov = (centered * P) @ centered.T
        direction = np.linalg.lstsq(cov, gap, rcond=1e-13)[0]
        if gap @ direction <= 0:
            direction = gap
        step = 1.0
        while step >= 1e-12:
            trial = theta + step * direction
            P_t, log_norm_t = fam.evaluate(trial)
            dual_t = trial @ fam.target - log_norm_t
            # slack of a few ulps of the dual so roundoff cannot veto a step
            slack = 1e-13 * max(1.0, abs(dual))
            if np.isfinite(dual_t) and dual_t >= dual + 1e-4 * step * (gap @ direction) - slack:
                break
            step *= 0.5
        else:
            break
        theta, P, log_norm, dual = trial, P_t, log_norm_t, dual_t
    return None, P, log_norm, residual, it


def solve_mjt(p, e: ConstraintSet, ch, projection: ProjectionResult = None,
              tol: float = MJT_TOL, max_iter: int = MJT_MAX_ITER,
              seeds=MJT_SEEDS) -> MjtSolution:
    """Find P*(x,y) = p(x) q*(y) exp(lam0 + lam1 ln q*(y) + lam2 ln p(x,y))
    meeting the two cross-entropy equalities

        sum P* log2 p(x,y) = -H_p(X,Y),    sum P* log2 q*(y) = -H_q*(Y).

    ``lambda1`` is reported in the form above, so the uniform-input
    exponent on q*(y) is ``lambda1 + 1``.
    """
    p, ch = as_pmf(p), as_channel(ch)
    if not mjt_applicable(p, ch, APPLICABILITY_TOL):
        raise NotApplicableError(
            "log p(x) - H(Y|X=x) is not constant over the input support"
        )
    proj = projection or project(p, e)
    qy = output_marginal(proj.q_star, ch).probs
    fam = _MjtFamily(p.probs, qy, ch.rows)

    # the dual is strictly concave, so the first seed that converges has
    # found the unique solution; later seeds are fallbacks only
    best_residual = None
    for seed in seeds:
        theta, P, log_norm, residual, iters = _solve_family(fam, seed, tol, max_iter)
        if theta is not None:
            full = fam.full(P)
            base = p.probs[:, None] * qy[None, :]
            return MjtSolution(
                p_star=JointPmf(full), lambda1=float(theta[0]), lambda2=float(theta[1]),
                log_z=float(-log_norm),
                divergence_bits=float(rel_entr(full, base).sum() / LN2),
                residuals=(float(residual[1]), float(residual[0])), iterations=iters,
            )
        if best_residual is None or residual.max() < best_residual.max():
            best_residual = residual
    raise ConvergenceError(
        "MJT multiplier search failed from every seed",
        residual=(float(best_residual[1]), float(best_residual[0])),
    )


def mjt_rate(p, e: ConstraintSet, ch, projection: ProjectionResult = None,
             solution: MjtSolution = None) -> float:
    """min(H_p - D(q*||p), D(P* || p(X) q*(Y)) - D(q*||p))."""
    p, ch = as_pmf(p), as_channel(ch)
    proj = projection or project(p, e)
    sol = solution or solve_mjt(p, e, ch, projection=proj)
    return min(_codeword_cap(p, proj), sol.divergence_bits - proj.divergence_bits)


def rate_report(p, e: ConstraintSet, ch) -> RateReport:
    p, ch = as_pmf(p), as_channel(ch)
    proj = project(p, e)
    r_mjt = None
    if mjt_applicable(p, ch):
        r_mjt = mjt_rate(p, e, ch, projection=proj)
    return RateReport(
        r_matched_bits=matched_rate(p, e, ch, projection=proj),
        r_gallager_bits=gallager_rate(p, e, ch, projection=proj),
        r_mjt_bits=r_mjt,
        r_naive_bits=naive_rate(p, e, ch, projection=proj),
        codeword_cap_bits=_codeword_cap(p, proj),
        rs_min_bits=proj.divergence_bits,
    )
