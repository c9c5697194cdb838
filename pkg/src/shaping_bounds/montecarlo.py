"""Monte Carlo checks of random-set selection and of subcode decoding.

Random streams: trial ``t`` of a run seeded with ``seed`` draws from
``Generator(Philox(SeedSequence(seed, spawn_key=(t,))))``.  Inside a trial,
draws are consumed in set-major, word-minor order (set 0 word 0, set 0
word 1, ...), then the transmitted-set choice, then the channel noise.
Because every trial owns its stream, results do not depend on how trials
are spread over worker threads.

Selection-probability runs sample only the type (symbol counts) of each
word.  A word's type is multinomial(n, p), and membership in the constraint
set depends on the type alone, so this is distributionally identical to
drawing the full sequences while costing O(|X|) per word.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .errors import CapExceededError, ShapingError
from .info import Channel, Pmf, as_channel, as_pmf
from .projection import TYPE_TEST_TOL, ConstraintSet, project

RNG_NAME = "numpy.random.Philox via SeedSequence(seed, spawn_key=(trial,))"
PS_SET_CAP = 2 ** 26
DECODE_CAP = 2 ** 22
FIRST_CHUNK = 256
MAX_CHUNK = 65536
SELECTIONS = ("first", "min")


class NoAcceptanceError(ShapingError, RuntimeError):
    """No trial produced a constraint-satisfying word."""


def set_size(n: int, rate_bits: float) -> int:
    """Integer number of words for a rate: round(2^(n*rate)), at least one."""
    return max(1, int(round(2.0 ** (n * rate_bits))))


@dataclass(frozen=True)
class McConfig:
    n: int
    rs_bits: float
    rq_bits: float
    p: Pmf
    e: ConstraintSet
    ch: Optional[Channel] = None
    trials: int = 1000
    seed: int = 0
    cap: int = DECODE_CAP
    selection: str = "first"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.rs_bits < 0 or self.rq_bits < 0:
            raise ValueError("rs_bits and rq_bits must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}")
        if self.selection == "min" and self.e.num_constraints != 1:
            raise ValueError("min-cost selection needs exactly one constraint")
        object.__setattr__(self, "p", as_pmf(self.p))
        if self.ch is not None:
            object.__setattr__(self, "ch", as_channel(self.ch))
        if self.e.alphabet_size != self.p.support_size:
            raise ValueError("constraint set and pmf have different alphabets")

    @property
    def words_per_set(self) -> int:
        return set_size(self.n, self.rs_bits)

    @property
    def num_sets(self) -> int:
        return set_size(self.n, self.rq_bits)


@dataclass(frozen=True)
class Estimate:
    """Binomial proportion with a 95% Wilson interval."""

    value: float
    lower: float
    upper: float
    successes: int
    total: int

    @classmethod
    def from_counts(cls, successes: int, total: int) -> "Estimate":
        if total == 0:
            nan = float("nan")
            return cls(nan, nan, nan, 0, 0)
        lo, hi = proportion_confint(successes, total, alpha=0.05, method="wilson")
        return cls(successes / total, float(lo), float(hi), int(successes), int(total))

    @property
    def std_error(self) -> float:
        """Plug-in binomial standard error sqrt(v (1 - v) / total)."""
        if self.total == 0:
            return float("nan")
        return math.sqrt(self.value * (1.0 - self.value) / self.total)


@dataclass(frozen=True)
class McResult:
    ps_hat: Optional[Estimate] = None
    marginal_l1: Optional[float] = None
    pooled_symbols: int = 0
    err_matched: Optional[Estimate] = None
    err_mismatched_codeword: Optional[Estimate] = None
    err_mismatched_message: Optional[Estimate] = None
    sets_without_word: int = 0
    trials_without_transmission: int = 0
    rng: str = RNG_NAME


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _run_trials(fn, trials: int, workers: int) -> list:
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials), chunksize=max(1, trials // (8 * workers))))


def _satisfies(costs, beta):
    """costs: (..., L) per-symbol cost sums; beta scaled by n already."""
    return np.all(costs <= beta, axis=-1)


def sample_types(rng, n: int, probs: np.ndarray, size: int) -> np.ndarray:
    """``size`` independent multinomial(n, probs) count vectors, built from
    vectorized conditional binomials (symbol j given the counts before it)."""
    counts = np.zeros((size, probs.size), dtype=np.int64)
    left = np.full(size, n, dtype=np.int64)
    mass = 1.0
    for j, pj in enumerate(probs[:-1]):
        frac = min(1.0, pj / mass) if mass > 0 else 0.0
        counts[:, j] = rng.binomial(left, frac)
        left -= counts[:, j]
        mass -= pj
    counts[:, -1] = left
    return counts


def _select_type(cfg: McConfig, rng):
    """Draw the set's word types chunk by chunk; return the counts of the
    selected word (or None when no word in the set satisfies the constraint)."""
    n, probs = cfg.n, cfg.p.probs
    limit = cfg.e.beta * n + TYPE_TEST_TOL * n
    remaining = cfg.words_per_set
    chunk = FIRST_CHUNK
    best, best_cost = None, np.inf
    while remaining > 0:
        # geometric chunk schedule: fixed, so the stream layout never varies
        size = min(remaining, chunk)
        remaining -= size
        chunk = min(2 * chunk, MAX_CHUNK)
        counts = sample_types(rng, n, probs, size)
        costs = counts @ cfg.e.phi.T
        ok = _satisfies(costs, limit)
        if not ok.any():
            continue
        if cfg.selection == "first":
            return counts[int(np.argmax(ok))]
        c = np.where(ok, costs[:, 0], np.inf)
        i = int(np.argmin(c))
        if c[i] < best_cost:
            best, best_cost = counts[i], c[i]
    return best


def _selection_counts(cfg: McConfig, workers: int):
    if cfg.words_per_set > PS_SET_CAP:
        raise CapExceededError(
            f"set size {cfg.words_per_set} exceeds the cap {PS_SET_CAP}"
        )
    picks = _run_trials(lambda t: _select_type(cfg, trial_rng(cfg.seed, t)), cfg.trials, workers)
    hits = sum(1 for c in picks if c is not None)
    pooled = np.zeros(cfg.p.support_size, dtype=np.int64)
    for c in picks:
        if c is not None:
            pooled += c
    return hits, pooled


def estimate_ps(cfg: McConfig, workers: int = 1) -> McResult:
    """Fraction of random sets holding at least one word whose type is in E,
    plus the L1 distance of the selected words' pooled symbol marginal from q*."""
    hits, pooled = _selection_counts(cfg, workers)
    l1 = None
    if pooled.sum() > 0:
        q = project(cfg.p, cfg.e).q_star.probs
        l1 = float(np.abs(pooled / pooled.sum() - q).sum())
    return McResult(
        ps_hat=Estimate.from_counts(hits, cfg.trials), marginal_l1=l1,
        pooled_symbols=int(pooled.sum()), sets_without_word=cfg.trials - hits,
    )


def empirical_conditional_limit(cfg: McConfig, workers: int = 1) -> float:
    """L1 distance between the pooled symbol marginal of selected words and q*."""
    res = estimate_ps(cfg, workers)
    if res.marginal_l1 is None:
        raise NoAcceptanceError(
            f"no set out of {cfg.trials} contained a constraint-satisfying word"
        )
    return res.marginal_l1


def _decode_trial(cfg: McConfig, log_w, cdf, t: int):
    rng = trial_rng(cfg.seed, t)
    n, k = cfg.n, cfg.p.support_size
    sets, per = cfg.num_sets, cfg.words_per_set
    words = rng.choice(k, size=(sets * per, n), p=cfg.p.probs).astype(np.int32)

    costs = cfg.e.phi[:, words].sum(axis=2).T.reshape(sets, per, -1)
    ok = _satisfies(costs, cfg.e.beta * n + TYPE_TEST_TOL * n)
    has = ok.any(axis=1)
    if cfg.selection == "first":
        pick = np.argmax(ok, axis=1)
    else:
        pick = np.argmin(np.where(ok, costs[..., 0], np.inf), axis=1)
    valid_sets = np.flatnonzero(has)
    missing = sets - valid_sets.size
    if valid_sets.size == 0:
        return None, missing

    sent_set = int(valid_sets[rng.integers(valid_sets.size)])
    sent_idx = sent_set * per + int(pick[sent_set])
    x = words[sent_idx]
    u = rng.random(n)
    y = np.minimum((u[:, None] >= cdf[x]).sum(axis=1), cdf.shape[1] - 1)

    # ML metric sum_i log W(y_i | x_i) for every word; argmax keeps the lowest index on ties
    per_symbol = log_w[:, y].T
    metric = per_symbol[np.arange(n)[None, :], words].sum(axis=1)
    mism = int(np.argmax(metric))
    selected = valid_sets * per + pick[valid_sets]
    matched = int(selected[int(np.argmax(metric[selected]))])

    # membership is by value: a duplicate of a sent-set word decodes the message
    sent_words = words[sent_set * per:(sent_set + 1) * per]
    in_sent = lambda w: bool(np.any(np.all(sent_words == w, axis=1)))
    codeword_err = not np.array_equal(words[mism], x)
    message_err = not in_sent(words[mism])
    matched_err = not in_sent(words[matched])
    return (matched_err, codeword_err, message_err), missing


def decode_experiment(cfg: McConfig, workers: int = 1) -> McResult:
    """Matched (ML over the selected words) vs. mismatched (ML over the whole
    large codebook) decoding of one transmitted selected word per trial.

    A message error means the decoded word equals no word of the transmitted
    random set; a codeword error means it differs from the sent word.  Both
    compare word values, so duplicated words never count against the decoder.
    """
    if cfg.ch is None:
        raise ValueError("decoding needs a channel")
    if cfg.ch.input_size != cfg.p.support_size:
        raise ValueError("channel and pmf have different input alphabets")
    total = cfg.num_sets * cfg.words_per_set
    if total > cfg.cap:
        raise CapExceededError(f"large codebook of {total} words exceeds the cap {cfg.cap}")
    with np.errstate(divide="ignore"):
        log_w = np.log(cfg.ch.rows)
    cdf = np.cumsum(cfg.ch.rows, axis=1)
    outcomes = _run_trials(lambda t: _decode_trial(cfg, log_w, cdf, t), cfg.trials, workers)

    tallies = np.zeros(3, dtype=np.int64)
    sent = 0
    missing = 0
    for res, miss in outcomes:
        missing += miss
        if res is not None:
            sent += 1
            tallies += np.array(res, dtype=np.int64)
    return McResult(
        err_matched=Estimate.from_counts(int(tallies[0]), sent),
        err_mismatched_codeword=Estimate.from_counts(int(tallies[1]), sent),
        err_mismatched_message=Estimate.from_counts(int(tallies[2]), sent),
        sets_without_word=missing,
        trials_without_transmission=cfg.trials - sent,
    )
