"""Finite-alphabet probability objects.

Distributions are stored as float64 numpy arrays whose axes are identified by
name (``"U"``, ``"V"``, ``"W"``, ...), never by position. All objects are
immutable after construction: the underlying arrays are flagged read-only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, ValidationError

MAX_ALPHABET = 16
PROB_ATOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    name: str
    size: int

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 1:
            raise ValidationError(f"alphabet {self.name!r}: size must be a positive integer")
        if self.size > MAX_ALPHABET:
            raise ValidationError(
                f"alphabet {self.name!r}: size {self.size} exceeds the supported maximum {MAX_ALPHABET}"
            )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _names(keep: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(keep, str):
        return (keep,)
    return tuple(keep)


def _check_probs(probs: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(probs)):
        raise ValidationError(f"{what}: non-finite entry")
    bad = np.argwhere((probs < -PROB_ATOL) | (probs > 1 + PROB_ATOL))
    if bad.size:
        cell = tuple(int(i) for i in bad[0])
        raise ValidationError(f"{what}: entry {cell} = {probs[cell]!r} is outside [0, 1]")


class JointDist:
    """Probability tensor over named finite alphabets.

    Parameters
    ----------
    axes : sequence of Alphabet
        One alphabet per tensor axis, names unique.
    probs : array_like
        Nonnegative entries with total mass 1 (within 1e-12).
    """

    __slots__ = ("axes", "probs")

    def __init__(self, axes: Sequence[Alphabet], probs, *, check: bool = True):
        axes = tuple(axes)
        probs = np.asarray(probs, dtype=np.float64)
        if len({a.name for a in axes}) != len(axes):
            raise DimensionError(f"duplicate axis names in {[a.name for a in axes]}")
        if probs.shape != tuple(a.size for a in axes):
            raise DimensionError(
                f"probability tensor shape {probs.shape} does not match axes "
                f"{[(a.name, a.size) for a in axes]}"
            )
        if check:
            label = "".join(a.name for a in axes) or "scalar"
            _check_probs(probs, f"P_{label}")
            total = probs.sum()
            if abs(total - 1.0) > PROB_ATOL:
                raise ValidationError(f"P_{label}: total mass {total!r} differs from 1")
            probs = np.clip(probs, 0.0, None)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "probs", _frozen(probs))

    def __setattr__(self, key, value):
        raise AttributeError("JointDist is immutable")

    def __repr__(self):
        names = ",".join(f"{a.name}:{a.size}" for a in self.axes)
        return f"{type(self).__name__}({names})"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DimensionError(f"unknown axis {name!r}; have {self.names}") from None

    def alphabet_of(self, name: str) -> Alphabet:
        return self.axes[self.axis(name)]

    def marginal(self, keep: str | Iterable[str]) -> "JointDist":
        return marginalize(self, keep)

    def reorder(self, order: Iterable[str]) -> "JointDist":
        order = _names(order)
        if sorted(order) != sorted(self.names):
            raise DimensionError(f"reorder {order} is not a permutation of {self.names}")
        perm = [self.axis(n) for n in order]
        return _make(tuple(self.axes[i] for i in perm), np.transpose(self.probs, perm))


class FiniteDist(JointDist):
    """A distribution on a single alphabet."""

    __slots__ = ()

    def __init__(self, alphabet: Alphabet, probs, *, check: bool = True):
        super().__init__((alphabet,), probs, check=check)

    @property
    def alphabet(self) -> Alphabet:
        return self.axes[0]


def _make(axes: tuple[Alphabet, ...], probs: np.ndarray) -> JointDist:
    if len(axes) == 1:
        return FiniteDist(axes[0], probs, check=False)
    return JointDist(axes, probs, check=False)


class CondDist:
    """Stochastic map from the product alphabet of ``given`` to ``target``.

    ``table`` has shape ``(*given sizes, target size)``; every slice along the
    last axis is a probability vector. ``degenerate`` marks rows that were
    filled uniformly because their conditioning event had zero probability.
    """

    __slots__ = ("given", "target", "table", "degenerate")

    def __init__(self, given: Sequence[Alphabet], target: Alphabet, table, degenerate=None,
                 *, check: bool = True):
        given = tuple(given)
        table = np.asarray(table, dtype=np.float64)
        shape = tuple(a.size for a in given) + (target.size,)
        if table.shape != shape:
            raise DimensionError(f"conditional table shape {table.shape}, expected {shape}")
        names = [a.name for a in given] + [target.name]
        if len(set(names)) != len(names):
            raise DimensionError(f"duplicate axis names in {names}")
        label = f"P_{target.name}|{''.join(a.name for a in given)}"
        if check:
            _check_probs(table, label)
            sums = table.sum(axis=-1)
            bad = np.argwhere(np.abs(sums - 1.0) > PROB_ATOL)
            if bad.size:
                row = tuple(int(i) for i in bad[0])
                raise ValidationError(f"{label}: row {row} sums to {sums[row]!r}")
            table = np.clip(table, 0.0, None)
        if degenerate is None:
            degenerate = np.zeros(shape[:-1], dtype=bool)
        degenerate = np.array(degenerate, dtype=bool)
        degenerate.flags.writeable = False
        object.__setattr__(self, "given", given)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "table", _frozen(table))
        object.__setattr__(self, "degenerate", degenerate)

    def __setattr__(self, key, value):
        raise AttributeError("CondDist is immutable")

    def __repr__(self):
        return f"CondDist({self.target.name}|{','.join(a.name for a in self.given)})"

    @classmethod
    def from_matrix(cls, given: Alphabet, target: Alphabet, matrix) -> "CondDist":
        """Single-letter conditioning: row ``i`` is the law of target given letter ``i``."""
        return cls((given,), target, matrix)

    @property
    def rows(self) -> list[FiniteDist]:
        flat = self.table.reshape(-1, self.target.size)
        return [FiniteDist(self.target, r, check=False) for r in flat]


def joint(axes: Sequence[tuple[str, int]], probs) -> JointDist:
    """Convenience constructor from ``(name, size)`` pairs."""
    return JointDist([Alphabet(n, s) for n, s in axes], probs)


def compose(base: JointDist, cond: CondDist, on_axes: Iterable[str] | None = None) -> JointDist:
    """Append ``cond.target`` to ``base`` as ``P_base * P_{target|given}``.

    The new axis is conditionally independent of every axis of ``base`` that is
    not among ``cond.given``.
    """
    given_names = tuple(a.name for a in cond.given)
    if on_axes is not None and _names(on_axes) != given_names:
        raise DimensionError(f"on_axes {tuple(on_axes)} do not match conditional inputs {given_names}")
    if cond.target.name in base.names:
        raise DimensionError(f"axis {cond.target.name!r} already present in {base.names}")
    for a in cond.given:
        if a.name not in base.names:
            raise DimensionError(f"conditioning axis {a.name!r} absent from {base.names}")
        if base.alphabet_of(a.name).size != a.size:
            raise DimensionError(
                f"axis {a.name!r}: size {base.alphabet_of(a.name).size} vs conditional input size {a.size}"
            )
    letters = "abcdefghijklmnopqrstuvwxyz"
    sub = {n: letters[i] for i, n in enumerate(base.names)}
    new = letters[len(base.names)]
    spec_base = "".join(sub[n] for n in base.names)
    spec_cond = "".join(sub[n] for n in given_names) + new
    out = np.einsum(f"{spec_base},{spec_cond}->{spec_base}{new}", base.probs, cond.table)
    return JointDist(base.axes + (cond.target,), out, check=False)


def marginalize(j: JointDist, keep: str | Iterable[str]) -> JointDist:
    """Sum out every axis not in ``keep``; result axes follow the order of ``keep``."""
    keep = _names(keep)
    if len(set(keep)) != len(keep):
        raise DimensionError(f"repeated axis in {keep}")
    idx = [j.axis(n) for n in keep]
    drop = tuple(i for i in range(len(j.axes)) if i not in idx)
    p = j.probs.sum(axis=drop) if drop else j.probs
    remaining = [i for i in range(len(j.axes)) if i in idx]
    perm = [remaining.index(i) for i in idx]
    return _make(tuple(j.axes[i] for i in idx), np.transpose(p, perm))


def condition(j: JointDist, target: str, given: str | Iterable[str]) -> CondDist:
    """Return ``P_{target|given}``.

    Rows whose conditioning event has zero probability are filled with the
    uniform distribution and flagged in ``CondDist.degenerate``.
    """
    given = _names(given)
    if target in given:
        raise DimensionError(f"target {target!r} also listed as conditioning axis")
    m = marginalize(j, given + (target,)).probs
    den = m.sum(axis=-1, keepdims=True)
    zero = den[..., 0] <= 0.0
    size = j.alphabet_of(target).size
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.where(den > 0, m / np.where(den > 0, den, 1.0), 1.0 / size)
    return CondDist(tuple(j.alphabet_of(n) for n in given), j.alphabet_of(target), table, zero, check=False)


def product(*dists: JointDist) -> JointDist:
    """Independent product of distributions on disjoint axes."""
    axes: tuple[Alphabet, ...] = ()
    p = np.ones(())
    for d in dists:
        axes += d.axes
        p = np.multiply.outer(p, d.probs)
    return JointDist(axes, p, check=False)


def simplex_grid(dim: int, step: float) -> np.ndarray:
    """All probability vectors of length ``dim`` whose entries are multiples of ``step``.

    Rows come in lexicographically descending order, e.g. ``dim=2, step=0.5``
    gives ``[1, 0], [0.5, 0.5], [0, 1]``. There are ``C(1/step + dim - 1, dim - 1)``
    rows.
    """
    if not 0 < step <= 1:
        raise DomainError(f"step must lie in (0, 1], got {step}")
    if dim < 1:
        raise DomainError(f"dim must be positive, got {dim}")
    m = int(round(1.0 / step))
    if abs(m * step - 1.0) > 1e-9:
        raise DomainError(f"1/step must be an integer, got step={step}")
    n = comb(m + dim - 1, dim - 1)
    if dim == 1:
        return np.ones((1, 1))
    bars = np.array(list(itertools.combinations(range(m + dim - 1), dim - 1)), dtype=np.int64)[::-1]
    edges = np.concatenate(
        [np.full((n, 1), -1), bars, np.full((n, 1), m + dim - 1)], axis=1
    )
    counts = np.diff(edges, axis=1) - 1
    return counts / m


def grid_count(dim: int, step: float) -> int:
    return comb(int(round(1.0 / step)) + dim - 1, dim - 1)
