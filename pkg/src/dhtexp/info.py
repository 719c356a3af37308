"""Entropy, mutual information and KL divergence on finite alphabets.

All general-purpose quantities are returned in nats. The binary helpers
(``binary_entropy``, ``binary_kl``, ``mgl_bound``) work in bits because that is
how the binary-symmetric closed forms are usually stated.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import DimensionError, DomainError
from .prob import JointDist, _names, marginalize

LN2 = float(np.log(2.0))


def to_bits(nats: float) -> float:
    return nats / LN2


def to_nats(bits: float) -> float:
    return bits * LN2


def _xlogx(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def entropy_array(p: np.ndarray) -> float:
    return float(-_xlogx(np.asarray(p, dtype=np.float64)).sum())


def kl_array(p: np.ndarray, q: np.ndarray) -> float:
    """``sum p log(p/q)`` with ``0 log 0/q = 0`` and ``+inf`` when ``p > 0 = q``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    pos = p > 0
    if np.any(pos & (q <= 0)):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, p * (np.log(np.where(pos, p, 1.0)) - np.log(np.where(pos, q, 1.0))), 0.0)
    return max(float(terms.sum()), 0.0)


def _as_array(p) -> np.ndarray:
    return p.probs if isinstance(p, JointDist) else np.asarray(p, dtype=np.float64)


def entropy(p) -> float:
    """Shannon entropy in nats of a distribution (any shape)."""
    return entropy_array(_as_array(p))


def _group(x: str | Iterable[str]) -> tuple[str, ...]:
    return _names(x)


def cond_entropy(j: JointDist, target, given) -> float:
    """``H(target | given) = H(target, given) - H(given)``."""
    t, g = _group(target), _group(given)
    if not g:
        return entropy(marginalize(j, t))
    return max(entropy(marginalize(j, t + g)) - entropy(marginalize(j, g)), 0.0)


def mutual_info(j: JointDist, a, b) -> float:
    a, b = _group(a), _group(b)
    if set(a) & set(b):
        raise DimensionError(f"overlapping axis groups {a} and {b}")
    val = entropy(marginalize(j, a)) + entropy(marginalize(j, b)) - entropy(marginalize(j, a + b))
    return max(val, 0.0)


def cond_mutual_info(j: JointDist, a, b, c) -> float:
    """``I(a; b | c) = H(a,c) + H(b,c) - H(a,b,c) - H(c)``."""
    a, b, c = _group(a), _group(b), _group(c)
    if not c:
        return mutual_info(j, a, b)
    val = (
        entropy(marginalize(j, a + c))
        + entropy(marginalize(j, b + c))
        - entropy(marginalize(j, a + b + c))
        - entropy(marginalize(j, c))
    )
    return max(val, 0.0)


def kl_div(p, q) -> float:
    """KL divergence ``D(p || q)`` in nats.

    Joint distributions are matched by axis name, so ``q`` may list its axes
    in a different order than ``p``.
    """
    if isinstance(p, JointDist) and isinstance(q, JointDist):
        if sorted(p.names) != sorted(q.names):
            raise DimensionError(f"axis mismatch: {p.names} vs {q.names}")
        for name in p.names:
            if p.alphabet_of(name).size != q.alphabet_of(name).size:
                raise DimensionError(f"axis {name!r} has different sizes")
        q = q.reorder(p.names)
    pa, qa = _as_array(p), _as_array(q)
    if pa.shape != qa.shape:
        raise DimensionError(f"shape mismatch: {pa.shape} vs {qa.shape}")
    return kl_array(pa, qa)


# Binary helpers (bits) -------------------------------------------------------


def binary_entropy(r):
    """``h_b(r)`` in bits; vectorized."""
    r = np.asarray(r, dtype=np.float64)
    if np.any((r < 0) | (r > 1)):
        raise DomainError(f"binary_entropy: argument outside [0, 1]: {r}")
    out = -(_xlogx(r) + _xlogx(1.0 - r)) / LN2
    return float(out) if out.ndim == 0 else out


def inv_binary_entropy(h: float) -> float:
    """Inverse of ``h_b`` on ``[0, 0.5]`` by 60 bisection steps."""
    if not 0.0 <= h <= 1.0:
        raise DomainError(f"inv_binary_entropy: argument {h} outside [0, 1]")
    if h == 0.0:
        return 0.0
    lo, hi = 0.0, 0.5
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) if h < 1.0 else 0.5


def binary_convolve(a, b):
    """``a * b = (1 - a) b + a (1 - b)``."""
    if np.any((np.asarray(a) < 0) | (np.asarray(a) > 1) | (np.asarray(b) < 0) | (np.asarray(b) > 1)):
        raise DomainError("binary_convolve: arguments must lie in [0, 1]")
    return (1 - a) * b + a * (1 - b)


def binary_kl(p: float, q: float) -> float:
    """Binary divergence ``D_b(p || q)`` in bits."""
    return to_bits(kl_array(np.array([p, 1 - p]), np.array([q, 1 - q])))


def mgl_bound(H: float, p: float) -> float:
    """``h_b(h_b^{-1}(H) * p)`` in bits.

    Lower bound on ``H(V|W)`` when ``V`` is ``U`` passed through a binary
    symmetric channel with crossover ``p`` and ``H(U|W) >= H``.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"mgl_bound: crossover {p} outside [0, 1]")
    return binary_entropy(binary_convolve(inv_binary_entropy(H), p))
