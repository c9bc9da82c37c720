"""Reproducible random generation for the estimator experiments.

Uniform source
--------------
All randomness flows from numpy's Philox bit generator (Philox 4x64 with 10
rounds, a counter-based generator), keyed by the first 128 bits of the
SHA-256 digest of the seed together with a stream path.  Child streams for
replicate r of experiment e are keyed by hash(seed, e, r), so they share no
state and can run in any order or in parallel.  Raw 64-bit words are mapped
to doubles via u = ((word >> 11) + 0.5) * 2**-53, which lands strictly
inside (0, 1).  Identical seeds therefore reproduce identical streams on
any platform (distribution-level draws additionally go through libm's
log/lgamma, which is reproducible on a given platform and equal to the last
ulp across common ones).

Samplers
--------
* Poisson: inversion by search below mean 10, Hoermann's PTRS transformed
  rejection (W. Hoermann, "The transformed rejection method for generating
  Poisson random variables", 1993) at mean >= 10.
* Binomial: after reducing to p <= 1/2 by symmetry, inversion by search
  while n*p <= 30, Hoermann's BTRS transformed rejection ("The generation
  of binomial random variates", 1993) above.
* Multinomial: the sequential conditional-binomial method, one binomial per
  cell on the remaining total and remaining probability mass.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox

from .core import (
    CellProbabilities,
    l1_distance,
    natural_estimator,
    poissonized_estimator,
    sup_distance,
)

__all__ = [
    "SeededRng",
    "derive_seed",
    "CountsPair",
    "CouplingCheck",
    "sample_poisson",
    "sample_binomial",
    "sample_multinomial",
    "sample_coupled",
    "coupling_l1_bound",
]

_DOMAIN = b"sdfest-stream-v1"


def _encode_path(seed: int, path: tuple) -> bytes:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    parts = [_DOMAIN, seed.to_bytes(8, "big")]
    for item in path:
        if isinstance(item, str):
            raw = item.encode("utf-8")
            parts.append(b"s" + len(raw).to_bytes(4, "big") + raw)
        else:
            item = int(item)
            if not 0 <= item < 2**64:
                raise ValueError("stream path integers must fit in uint64")
            parts.append(b"i" + item.to_bytes(8, "big"))
    return b"".join(parts)


def derive_seed(seed: int, *path) -> int:
    """A 64-bit sub-seed hashed from (seed, path); used to key sub-experiments."""
    digest = hashlib.sha256(_encode_path(seed, path)).digest()
    return int.from_bytes(digest[16:24], "big")


class SeededRng:
    """A buffered uniform stream keyed by hash(seed, *path)."""

    _BUFFER = 8192

    def __init__(self, seed: int, path: tuple = ()) -> None:
        self.seed = int(seed)
        self.path = tuple(path)
        digest = hashlib.sha256(_encode_path(self.seed, self.path)).digest()
        key = np.array(
            [
                int.from_bytes(digest[0:8], "little"),
                int.from_bytes(digest[8:16], "little"),
            ],
            dtype=np.uint64,
        )
        self._bitgen = Philox(key=key)
        self._buf = np.empty(0)
        self._pos = 0

    def child(self, *path) -> "SeededRng":
        """An independent stream for a sub-task; no state is shared."""
        return SeededRng(self.seed, self.path + path)

    def _refill(self, size: int) -> None:
        raw = self._bitgen.random_raw(max(size, self._BUFFER))
        self._buf = ((raw >> 11) + 0.5) * (2.0**-53)
        self._pos = 0

    def uniform(self) -> float:
        """One double strictly inside (0, 1)."""
        if self._pos >= self._buf.size:
            self._refill(self._BUFFER)
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def uniforms(self, size: int) -> np.ndarray:
        """``size`` consecutive uniforms from the same logical stream."""
        out = np.empty(size)
        filled = 0
        while filled < size:
            if self._pos >= self._buf.size:
                self._refill(size - filled)
            take = min(self._buf.size - self._pos, size - filled)
            out[filled : filled + take] = self._buf[self._pos : self._pos + take]
            self._pos += take
            filled += take
        return out

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, path={self.path!r})"


def sample_poisson(mean: float, rng: SeededRng) -> int:
    """One Poisson(mean) variate."""
    mean = float(mean)
    if not mean >= 0.0:
        raise ValueError("Poisson mean must be nonnegative")
    if mean == 0.0:
        return 0
    if mean < 10.0:
        return _poisson_inversion(mean, rng)
    return _poisson_ptrs(mean, rng)


def _poisson_inversion(mean: float, rng: SeededRng) -> int:
    u = rng.uniform()
    pmf = math.exp(-mean)
    cum = pmf
    k = 0
    # cap guards against cum stagnating one ulp below u; P(reach) ~ 1e-16
    cap = int(40.0 * mean) + 400
    while u > cum and k < cap:
        k += 1
        pmf *= mean / k
        cum += pmf
    return k


def _poisson_ptrs(mean: float, rng: SeededRng) -> int:
    # Hoermann (1993), algorithm PTRS; valid for mean >= 10
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.uniform() - 0.5
        v = rng.uniform()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
        if k < 0:
            continue
        if us >= 0.07 and v <= vr:
            return int(k)
        if us < 0.013 and v > us:
            continue
        if math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b) <= (
            k * loglam - mean - math.lgamma(k + 1.0)
        ):
            return int(k)


def sample_binomial(n: int, p: float, rng: SeededRng) -> int:
    """One Binomial(n, p) variate; the result is always in [0, n]."""
    n = int(n)
    p = float(p)
    if n < 0:
        raise ValueError("binomial n must be nonnegative")
    if not 0.0 <= p <= 1.0:
        raise ValueError("binomial p must lie in [0, 1]")
    if n == 0 or p == 0.0:
        return 0
    if p == 1.0:
        return n
    q = p if p <= 0.5 else 1.0 - p
    if n * q <= 30.0:
        k = _binomial_inversion(n, q, rng)
    else:
        k = _binomial_btrs(n, q, rng)
    return k if p <= 0.5 else n - k


def _binomial_inversion(n: int, q: float, rng: SeededRng) -> int:
    u = rng.uniform()
    ratio = q / (1.0 - q)
    pmf = math.exp(n * math.log1p(-q))  # (1-q)^n, no underflow while n*q <= 30
    cum = pmf
    k = 0
    while u > cum and k < n:
        pmf *= (n - k) / (k + 1.0) * ratio
        k += 1
        cum += pmf
    return k


def _binomial_btrs(n: int, q: float, rng: SeededRng) -> int:
    # Hoermann (1993), algorithm BTRS; valid for n*q >= 10, q <= 1/2
    spq = math.sqrt(n * q * (1.0 - q))
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * q
    c = n * q + 0.5
    vr = 0.92 - 4.2 / b
    alpha = (2.83 + 5.1 / b) * spq
    lpq = math.log(q / (1.0 - q))
    m = math.floor((n + 1) * q)
    h = math.lgamma(m + 1.0) + math.lgamma(n - m + 1.0)
    while True:
        u = rng.uniform() - 0.5
        v = rng.uniform()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + c)
        if k < 0 or k > n:
            continue
        if us >= 0.07 and v <= vr:
            return int(k)
        if math.log(v * alpha / (a / (us * us) + b)) <= (
            h - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0) + (k - m) * lpq
        ):
            return int(k)


def sample_multinomial(p: CellProbabilities, n: int, rng: SeededRng) -> np.ndarray:
    """One mult(n, p) count vector via sequential conditional binomials."""
    n = int(n)
    if n < 0:
        raise ValueError("multinomial total must be nonnegative")
    probs = p.probs
    M = probs.size
    counts = np.zeros(M, dtype=np.int64)
    if n == 0:
        return counts
    # tail[i] = p_i + ... + p_{M-1}; trailing exact zeros keep the last
    # positive cell's conditional probability at exactly 1
    tail = np.cumsum(probs[::-1])[::-1]
    remaining = n
    for i in range(M - 1):
        if remaining == 0:
            break
        pi = probs[i]
        if pi <= 0.0:
            continue
        ratio = 1.0 if pi >= tail[i] else pi / tail[i]
        d = sample_binomial(remaining, ratio, rng)
        counts[i] = d
        remaining -= d
    counts[M - 1] += remaining
    return counts


@dataclass(frozen=True)
class CountsPair:
    """Coupled multinomial counts x (total n) and Poissonized counts y
    (total capital_n ~ Poisson(n)); one vector dominates the other
    coordinatewise and sum|x - y| = |n - capital_n| by construction."""

    x: np.ndarray
    y: np.ndarray
    n: int
    capital_n: int

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.x, dtype=np.int64)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        if x.shape != y.shape or x.ndim != 1 or x.size < 1:
            raise ValueError("x and y must be matching nonempty count vectors")
        if np.any(x < 0) or np.any(y < 0):
            raise ValueError("counts must be nonnegative")
        if int(x.sum()) != self.n:
            raise ValueError("x must sum to n")
        if int(y.sum()) != self.capital_n:
            raise ValueError("y must sum to capital_n")
        delta = x - y
        if np.any(delta > 0) and np.any(delta < 0):
            raise ValueError("coupling violated: x - y changes sign")
        if int(np.abs(delta).sum()) != abs(self.n - self.capital_n):
            raise ValueError("coupling violated: sum|x - y| != |n - N|")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def M(self) -> int:
        return self.x.size


def sample_coupled(p: CellProbabilities, n: int, rng: SeededRng) -> CountsPair:
    """Draw the coupled pair (X, Y): N ~ Poisson(n), base ~ mult(min(n, N), p),
    and the poorer vector is topped up by an independent mult(|N - n|, p).

    Marginally X ~ mult(n, p) and the Y_i are independent Poisson(n p_i).
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    capital_n = sample_poisson(float(n), rng)
    base = sample_multinomial(p, min(n, capital_n), rng)
    extra = sample_multinomial(p, abs(capital_n - n), rng)
    if capital_n <= n:
        y = base
        x = base + extra
    else:
        x = base
        y = base + extra
    return CountsPair(x=x, y=y, n=n, capital_n=capital_n)


@dataclass(frozen=True)
class CouplingCheck:
    """Diagnostics tying a coupled draw to the Poissonization error bound."""

    bound: float  # |N - n| / M
    l1: float  # exact integral |Fhat - Ftilde|
    sup: float  # exact sup |Fhat - Ftilde|
    differing_cells: int  # #{i : x_i != y_i}


# absorbs float rounding in level subtractions; the underlying chain is
# exact in rational arithmetic
_CHAIN_SLACK = 1e-12


def coupling_l1_bound(pair: CountsPair) -> CouplingCheck:
    """|N - n| / M plus the exact distances between the natural estimator and
    its Poissonized analogue (denominator n on both sides).

    Asserts the pointwise chain sup|Fhat - Ftilde| <= #differing/M
    <= |N - n|/M and the integrated bound l1 <= |N - n|/n on every draw.
    """
    M = pair.M
    differing = int(np.count_nonzero(pair.x != pair.y))
    gap = abs(pair.capital_n - pair.n)
    bound = gap / M
    fhat = natural_estimator(pair.x, pair.n)
    ftilde = poissonized_estimator(pair.y, pair.n)
    l1 = l1_distance(fhat, ftilde)
    sup = sup_distance(fhat, ftilde)
    assert sup <= differing / M + _CHAIN_SLACK
    assert differing / M <= bound
    assert l1 <= gap / pair.n + _CHAIN_SLACK
    return CouplingCheck(bound=bound, l1=l1, sup=sup, differing_cells=differing)
