"""Finite-alphabet probability primitives.

Every quantity here is reported in bits.  Pmfs, channels and joint pmfs are
immutable: their arrays are copied on construction and flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import entr, rel_entr

from .errors import InvalidDistributionError

LN2 = np.log(2.0)

# Inputs whose total mass is off by at most this much are silently rescaled.
RENORMALIZE_TOL = 1e-9
# Roundoff-sized negative entries are clipped to zero rather than rejected.
NEGATIVE_TOL = 1e-15


def _normalized(values, what):
    arr = np.array(values, dtype=float)
    if arr.size == 0:
        raise InvalidDistributionError(f"{what} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidDistributionError(f"{what} has non-finite entries")
    if np.any(arr < -NEGATIVE_TOL):
        raise InvalidDistributionError(f"{what} has negative entries")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum(axis=-1, keepdims=True)
    if np.any(np.abs(total - 1.0) > RENORMALIZE_TOL):
        raise InvalidDistributionError(
            f"{what} sums to {np.ravel(total).tolist()}, not 1 (tolerance {RENORMALIZE_TOL})"
        )
    arr = arr / total
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over ``{0, ..., support_size - 1}``."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _normalized(self.probs, "pmf")
        if arr.ndim != 1:
            raise InvalidDistributionError("pmf must be one-dimensional")
        object.__setattr__(self, "probs", arr)

    @classmethod
    def uniform(cls, size: int) -> "Pmf":
        if size < 1:
            raise InvalidDistributionError("support size must be positive")
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point(cls, size: int, index: int) -> "Pmf":
        arr = np.zeros(size)
        arr[index] = 1.0
        return cls(arr)

    @property
    def support_size(self) -> int:
        return self.probs.size

    def __len__(self):
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.all(self.probs == other.probs))

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Pmf({np.array2string(self.probs, precision=6)})"


@dataclass(frozen=True, eq=False)
class Channel:
    """Memoryless channel; ``rows[x, y] = p(y | x)``."""

    rows: np.ndarray

    def __post_init__(self):
        arr = np.array(self.rows, dtype=float)
        if arr.ndim != 2:
            raise InvalidDistributionError("channel must be a 2-D matrix")
        object.__setattr__(self, "rows", _normalized(arr, "channel row"))

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    def __repr__(self):
        return f"Channel({self.input_size}x{self.output_size})"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint pmf over input x output, ``probs[x, y]``."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 2:
            raise InvalidDistributionError("joint pmf must be a 2-D matrix")
        flat = _normalized(arr.ravel(), "joint pmf")
        arr = flat.reshape(arr.shape)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def input_marginal(self) -> Pmf:
        return Pmf(self.probs.sum(axis=1))

    def output_marginal(self) -> Pmf:
        return Pmf(self.probs.sum(axis=0))


def log_sum_exp(values) -> float:
    """ln sum exp(values) for a 1-D array; cheaper than the scipy routine on hot paths."""
    top = values.max()
    if not np.isfinite(top):
        return float(top)
    return float(top + np.log(np.exp(values - top).sum()))


def as_pmf(p) -> Pmf:
    return p if isinstance(p, Pmf) else Pmf(p)


def as_channel(ch) -> Channel:
    return ch if isinstance(ch, Channel) else Channel(ch)


def _check_dims(p: Pmf, ch: Channel):
    if p.support_size != ch.input_size:
        raise ValueError(
            f"input pmf has {p.support_size} symbols but channel has {ch.input_size} inputs"
        )


def entropy(p) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    return float(entr(as_pmf(p).probs).sum() / LN2)


def binary_entropy(g: float) -> float:
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"binary entropy argument {g} outside [0, 1]")
    return float((entr(g) + entr(1.0 - g)) / LN2)


def kl_divergence(q, p) -> float:
    """Relative entropy D(q || p) in bits; ``inf`` when q is not dominated by p."""
    q, p = as_pmf(q), as_pmf(p)
    if q.support_size != p.support_size:
        raise ValueError("pmfs have different support sizes")
    return float(rel_entr(q.probs, p.probs).sum() / LN2)


def cross_entropy(q, p) -> float:
    """``-sum q log2 p``; equals H(q) + D(q || p)."""
    return entropy(q) + kl_divergence(q, p)


def output_marginal(p, ch) -> Pmf:
    p, ch = as_pmf(p), as_channel(ch)
    _check_dims(p, ch)
    return Pmf(p.probs @ ch.rows)


def joint(p, ch) -> JointPmf:
    p, ch = as_pmf(p), as_channel(ch)
    _check_dims(p, ch)
    return JointPmf(p.probs[:, None] * ch.rows)


def row_entropies(ch) -> np.ndarray:
    """H(Y | X = x) for every input symbol, in bits."""
    return entr(as_channel(ch).rows).sum(axis=1) / LN2


def conditional_entropy(p, ch) -> float:
    p, ch = as_pmf(p), as_channel(ch)
    _check_dims(p, ch)
    return float(p.probs @ row_entropies(ch))


def mutual_information(p, ch) -> float:
    """I(X; Y) = H(Y) - H(Y | X) for input pmf p through ch."""
    p, ch = as_pmf(p), as_channel(ch)
    value = entropy(output_marginal(p, ch)) - conditional_entropy(p, ch)
    # cancellation can leave a -1e-16 residue on useless channels
    return max(value, 0.0)
