"""Relative-entropy projection onto single-letter constraint sets.

A constraint set ``E = {P : sum_x P(x) phi_l(x) <= beta_l, l = 0..L-1}`` is
convex, so the pmf in ``E`` closest to a generating pmf ``p`` (in divergence)
is unique.  It has the exponential-family form

    q*(x) = p(x) exp(-sum_l lam_l phi_l(x)) / Z(lam),   lam >= 0,

and we find the multipliers by maximizing the concave dual
``-ln Z(lam) - lam . beta`` with a projected Newton method.

The module also carries the method-of-types machinery around ``q*``: the
Sanov upper bound, exact probabilities that an i.i.d. word has its type in
``E`` and the finite-N success bounds for picking a constrained word out of
a random set.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.special import gammaln, logsumexp, xlogy

from .errors import ConvergenceError, InfeasibleConstraintError
from .info import LN2, Pmf, as_pmf, kl_divergence, log_sum_exp

log = logging.getLogger(__name__)

MAX_ITER = 10_000
KKT_TOL = 1e-10
# slack allowed when testing a sum of constraint values against N * beta
TYPE_TEST_TOL = 1e-9


class AntiShapingWarning(UserWarning):
    """Target power above the uniform power: the tilt parameter is negative."""


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Linear constraints ``phi @ P <= beta`` on pmfs over a finite alphabet.

    ``phi`` has one row per constraint and one column per symbol.
    """

    phi: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim == 1:
            phi = phi[None, :]
        beta = np.atleast_1d(np.array(self.beta, dtype=float))
        if phi.ndim != 2 or phi.shape[0] < 1:
            raise ValueError("phi must be an L x |X| matrix with L >= 1")
        if beta.shape != (phi.shape[0],):
            raise ValueError(f"beta has shape {beta.shape}, expected ({phi.shape[0]},)")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(beta))):
            raise ValueError("constraint functions and bounds must be finite")
        phi.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "beta", beta)
        if not _feasible(phi, beta):
            raise InfeasibleConstraintError("no pmf satisfies the constraint set")

    @classmethod
    def hamming(cls, beta0: float) -> "ConstraintSet":
        """Binary alphabet, fraction of ones at most ``beta0``."""
        return cls([[0.0, 1.0]], [beta0])

    @classmethod
    def power(cls, levels, beta0: float) -> "ConstraintSet":
        """Average power ``sum P(x) |x|^2 <= beta0`` over the given levels."""
        return cls(np.abs(np.asarray(levels, dtype=float))[None, :] ** 2, [beta0])

    @property
    def num_constraints(self) -> int:
        return self.phi.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.phi.shape[1]

    def expectations(self, P) -> np.ndarray:
        return self.phi @ np.asarray(P, dtype=float)

    def contains(self, P, tol: float = 1e-12) -> bool:
        return bool(np.all(self.expectations(P) <= self.beta + tol))


def _feasible(phi, beta, support=None) -> bool:
    if support is not None:
        phi = phi[:, support]
    if phi.shape[1] == 0:
        return False
    if phi.shape[0] == 1:
        return bool(phi.min() <= beta[0] + 1e-12)
    k = phi.shape[1]
    res = linprog(
        np.zeros(k),
        A_ub=phi,
        b_ub=beta + 1e-12,
        A_eq=np.ones((1, k)),
        b_eq=[1.0],
        bounds=[(0, None)] * k,
        method="highs",
    )
    return res.status == 0


def _max_slack(phi, beta) -> float:
    """Largest s with some pmf meeting every constraint with slack s."""
    k = phi.shape[1]
    if phi.shape[0] == 1:
        return float(beta[0] - phi.min())
    # variables: P (k entries), s
    c = np.zeros(k + 1)
    c[-1] = -1.0
    a_ub = np.hstack([phi, np.ones((phi.shape[0], 1))])
    a_eq = np.hstack([np.ones((1, k)), np.zeros((1, 1))])
    res = linprog(
        c, A_ub=a_ub, b_ub=beta, A_eq=a_eq, b_eq=[1.0],
        bounds=[(0, None)] * k + [(None, 1.0)], method="highs",
    )
    return float(res.x[-1]) if res.status == 0 else -np.inf


@dataclass(frozen=True)
class ProjectionResult:
    q_star: Pmf
    multipliers: np.ndarray
    divergence_bits: float
    rs_min_bits: float
    active: np.ndarray
    iterations: int = 0
    kkt_residual: float = 0.0


class _Tilt:
    """Exponential tilt of p restricted to its support."""

    def __init__(self, p: np.ndarray, phi: np.ndarray):
        self.support = p > 0
        self.logp = np.log(p[self.support])
        self.phi = phi[:, self.support]
        self.size = p.size

    def evaluate(self, lam):
        logw = self.logp - lam @ self.phi
        log_z = log_sum_exp(logw)
        q = np.exp(logw - log_z)
        return q, log_z

    def full(self, q):
        out = np.zeros(self.size)
        out[self.support] = q
        return out


def _kkt_residual(lam, grad):
    # grad is E_q[phi] - beta; feasibility needs grad <= 0, slackness needs
    # grad == 0 wherever lam > 0.
    return float(np.max(np.where(lam > 0, np.abs(grad), np.maximum(grad, 0.0))))


def project(p, e: ConstraintSet, initial=None, max_iter: int = MAX_ITER,
            tol: float = KKT_TOL) -> ProjectionResult:
    """Minimize D(P || p) over P in ``e``.

    Returns ``p`` itself (zero multipliers, zero divergence) when p already
    lies in the set.  ``initial`` optionally warm-starts the multipliers.
    """
    p = as_pmf(p)
    if e.alphabet_size != p.support_size:
        raise ValueError("constraint set and pmf have different alphabets")
    L = e.num_constraints
    slack_at_p = e.beta - e.expectations(p.probs)
    if np.all(slack_at_p >= -1e-12):
        return ProjectionResult(
            q_star=p, multipliers=np.zeros(L), divergence_bits=0.0,
            rs_min_bits=0.0, active=np.abs(slack_at_p) <= 1e-12,
        )

    tilt = _Tilt(p.probs, e.phi)
    if not _feasible(e.phi, e.beta, tilt.support):
        raise InfeasibleConstraintError(
            "no pmf supported on supp(p) satisfies the constraints (divergence is infinite)"
        )
    if _max_slack(tilt.phi, e.beta) <= 1e-12:
        raise InfeasibleConstraintError(
            "constraint set restricted to supp(p) has empty interior; the projection "
            "multipliers are unbounded"
        )

    beta = e.beta
    lam = np.zeros(L) if initial is None else np.maximum(np.asarray(initial, float), 0.0)

    def dual(lam_):
        q_, log_z_ = tilt.evaluate(lam_)
        return -log_z_ - lam_ @ beta, q_

    g, q = dual(lam)
    residual = np.inf
    for it in range(1, max_iter + 1):
        mean = tilt.phi @ q
        grad = mean - beta
        residual = _kkt_residual(lam, grad)
        if residual <= tol:
            break
        centered = tilt.phi - mean[:, None]
        cov = (centered * q) @ centered.T
        free = (lam > 0) | (grad > 0)
        direction = np.zeros(L)
        idx = np.flatnonzero(free)
        sub = cov[np.ix_(idx, idx)]
        ridge = 1e-14 * max(1.0, np.trace(sub))
        direction[idx] = np.linalg.lstsq(sub + ridge * np.eye(idx.size), grad[idx], rcond=None)[0]
        if grad[idx] @ direction[idx] <= 0:
            direction[idx] = grad[idx]
        step = 1.0
        # rounding in log Z would otherwise veto full Newton steps near the optimum
        roundoff = 1e-13 * max(1.0, abs(g))
        while True:
            trial = np.maximum(lam + step * direction, 0.0)
            g_trial, q_trial = dual(trial)
            if g_trial >= g + 1e-4 * grad @ (trial - lam) - roundoff or step < 1e-14:
                break
            step *= 0.5
        if step < 1e-14 or np.array_equal(trial, lam):
            # stalled at floating-point resolution
            scale = max(1.0, float(np.abs(tilt.phi).max()))
            if residual <= 1e-8 * scale:
                break
            raise ConvergenceError("projection line search stalled", residual=residual)
        lam, g, q = trial, g_trial, q_trial
    else:
        raise ConvergenceError(
            f"projection did not converge in {max_iter} iterations", residual=residual
        )

    q_full = Pmf(tilt.full(q))
    div = kl_divergence(q_full, p)
    active = np.abs(e.expectations(q_full.probs) - beta) <= 1e-9
    return ProjectionResult(
        q_star=q_full, multipliers=lam, divergence_bits=div, rs_min_bits=div,
        active=active, iterations=it, kkt_residual=residual,
    )


def rs_min(p, e: ConstraintSet) -> float:
    """Smallest shaping rate (bits/symbol) that still finds constrained words."""
    return project(p, e).divergence_bits


def _mb_power(t, x2):
    logw = -t * x2
    w = np.exp(logw - logw.max())
    return float(w @ x2 / w.sum())


def maxwell_boltzmann_parameter(levels, target_power: float) -> float:
    """Tilt ``t`` with ``sum q_t(x) |x|^2 = target_power`` for q_t ~ exp(-t |x|^2)."""
    x2 = np.abs(np.asarray(levels, dtype=float)) ** 2
    if x2.size < 2 or np.ptp(x2) == 0:
        raise ValueError("constellation needs at least two distinct symbol energies")
    lo, hi = x2.min(), x2.max()
    if not lo < target_power < hi:
        raise InfeasibleConstraintError(
            f"target power {target_power} unreachable; must lie in ({lo}, {hi})"
        )
    uniform_power = x2.mean()
    scale = max(1.0, hi)
    if abs(target_power - uniform_power) <= 1e-12 * scale:
        return 0.0

    def f(t):
        return _mb_power(t, x2) - target_power

    # bracket on the correct side of zero by doubling
    sign = 1.0 if target_power < uniform_power else -1.0
    bound = sign / scale
    while sign * f(bound) > 0:
        bound *= 2.0
    t = brentq(f, min(0.0, bound), max(0.0, bound), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    if t < 0:
        warnings.warn(
            f"target power {target_power} exceeds the uniform power {uniform_power}; "
            "using a negative tilt (anti-shaping)", AntiShapingWarning, stacklevel=2,
        )
    return float(t)


def maxwell_boltzmann(levels, target_power: float) -> Pmf:
    """Maximum-entropy pmf on ``levels`` whose average power is ``target_power``."""
    x2 = np.abs(np.asarray(levels, dtype=float)) ** 2
    t = maxwell_boltzmann_parameter(levels, target_power)
    logw = -t * x2
    return Pmf(np.exp(logw - logsumexp(logw)))


def sanov_upper(p, e: ConstraintSet, n: int) -> float:
    """``(n+1)^|X| 2^(-n D(q*||p))`` clamped to [0, 1]."""
    if n < 1:
        raise ValueError("n must be positive")
    p = as_pmf(p)
    d = project(p, e).divergence_bits
    log2_value = p.support_size * math.log2(n + 1) - n * d
    return 1.0 if log2_value >= 0 else float(2.0 ** log2_value)


def sanov_lower(p, e: ConstraintSet, n: int, gamma: float = 0.0) -> float:
    """``2^(-n (D + gamma)) / (n+1)^|X|``: type-class lower bound on p^n(E)."""
    p = as_pmf(p)
    d = project(p, e).divergence_bits
    return float(2.0 ** (-n * (d + gamma) - p.support_size * math.log2(n + 1)))


def _log_binomial_terms(p1: float, n: int, ks: np.ndarray) -> np.ndarray:
    log_choose = gammaln(n + 1) - gammaln(ks + 1) - gammaln(n - ks + 1)
    return log_choose + xlogy(ks, p1) + xlogy(n - ks, 1.0 - p1)


def log_exact_pNE_binary(p, beta0: float, n: int) -> float:
    """Natural log of P(fraction of ones in an i.i.d. p word <= beta0)."""
    p = as_pmf(p)
    if p.support_size != 2:
        raise ValueError("binary oracle needs a binary pmf")
    if not 0.0 <= beta0 <= 1.0:
        raise ValueError("beta0 must lie in [0, 1]")
    if not 1 <= n <= 10**6:
        raise ValueError("n must lie in [1, 1e6]")
    kmax = min(n, math.floor(beta0 * n + TYPE_TEST_TOL))
    if kmax >= n:
        return 0.0
    # sum the smaller tail so probabilities near one keep full precision
    lower = logsumexp(_log_binomial_terms(p.probs[1], n, np.arange(kmax + 1, dtype=float)))
    if lower < -math.log(2.0):
        return float(lower)
    upper = logsumexp(_log_binomial_terms(p.probs[1], n, np.arange(kmax + 1, n + 1, dtype=float)))
    return float(min(math.log1p(-math.exp(upper)), 0.0))


def exact_pNE_binary(p, beta0: float, n: int) -> float:
    """Exact probability that a length-n i.i.d. binary word has at most beta0*n ones."""
    return math.exp(log_exact_pNE_binary(p, beta0, n))


def _compositions(n: int, k: int) -> np.ndarray:
    """All nonnegative integer vectors of length k summing to n."""
    rows = []
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        counts = []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(n + k - 2 - prev)
        rows.append(counts)
    return np.array(rows, dtype=float)


MAX_ENUM_ALPHABET = 4
MAX_ENUM_N = 40


def log_exact_pNE(p, e: ConstraintSet, n: int) -> float:
    """Natural log of P(type of an i.i.d. p word lies in E).

    Binary alphabets are handled for any n up to 1e6; larger alphabets by
    exhaustive type enumeration for |X| <= 4 and n <= 40.
    """
    p = as_pmf(p)
    k = p.support_size
    if e.alphabet_size != k:
        raise ValueError("constraint set and pmf have different alphabets")
    if k == 2:
        if not 1 <= n <= 10**6:
            raise ValueError("n must lie in [1, 1e6]")
        ones = np.arange(n + 1, dtype=float)
        counts = np.stack([n - ones, ones], axis=1)
    else:
        if k > MAX_ENUM_ALPHABET or n > MAX_ENUM_N:
            raise ValueError(
                f"exact type enumeration limited to |X| <= {MAX_ENUM_ALPHABET}, n <= {MAX_ENUM_N}"
            )
        counts = _compositions(n, k)
    ok = np.all(counts @ e.phi.T <= n * e.beta + TYPE_TEST_TOL * max(1, n), axis=1)
    if not ok.any():
        return -np.inf
    counts = counts[ok]
    log_terms = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + xlogy(counts, p.probs).sum(axis=1)
    return float(min(logsumexp(log_terms), 0.0))


def exact_pNE(p, e: ConstraintSet, n: int) -> float:
    return math.exp(log_exact_pNE(p, e, n))


def exact_available(p, e: ConstraintSet, n: int) -> bool:
    k = as_pmf(p).support_size
    if k == 2:
        return 1 <= n <= 10**6
    return k <= MAX_ENUM_ALPHABET and n <= MAX_ENUM_N


def success_probability(log_single: float, log2_set_size: float) -> float:
    """``1 - (1 - a)^M`` with ``a = exp(log_single)`` and ``M = 2^log2_set_size``.

    Evaluated through ``log(M * -log1p(-a))`` so that huge sets and tiny
    per-word probabilities neither overflow nor round to 0/1 prematurely.
    """
    if log_single == -np.inf:
        return 0.0
    if log_single >= 0.0:
        return 1.0
    a = math.exp(log_single)
    # -log1p(-a) ~ a for small a; use the log directly to keep precision
    log_hazard = log_single if a < 1e-8 else math.log(-math.log1p(-a))
    log_x = log2_set_size * math.log(2.0) + log_hazard
    if log_x > 700:
        return 1.0
    return float(-math.expm1(-math.exp(log_x)))


@dataclass(frozen=True)
class TheoremOneBounds:
    n: int
    rs_bits: float
    ps_lower: float
    ps_exact: Optional[float] = None
    divergence_bits: float = field(default=float("nan"))
    gamma: float = field(default=float("nan"))


def theorem1_bounds(p, e: ConstraintSet, n: int, rs_bits: float, gamma: float) -> TheoremOneBounds:
    """Lower bound on the probability that a random set of ``2^(n rs)`` i.i.d.
    words contains at least one word whose type lies in ``e``.

    ``ps_exact`` is the same probability evaluated with the exact per-word
    probability whenever that can be computed (binary alphabets, or small
    alphabets and block lengths).  The lower bound is only guaranteed once
    ``n`` is large enough for a type in ``e`` to come within ``gamma`` of the
    projection's divergence.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if rs_bits < 0:
        raise ValueError("rs_bits must be non-negative")
    p = as_pmf(p)
    d = project(p, e).divergence_bits
    log_single_lower = -(n * (d + gamma)) * LN2 - p.support_size * math.log(n + 1)
    ps_lower = success_probability(log_single_lower, n * rs_bits)
    ps_exact = None
    if exact_available(p, e, n):
        ps_exact = success_probability(log_exact_pNE(p, e, n), n * rs_bits)
    return TheoremOneBounds(
        n=n, rs_bits=rs_bits, ps_lower=ps_lower, ps_exact=ps_exact,
        divergence_bits=d, gamma=gamma,
    )
