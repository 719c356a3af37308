"""Channel-side quantities: capacity, expurgated and red-alert exponents.

A channel is a row-stochastic matrix ``W[x, y] = P(y | x)``; every public
function also accepts a :class:`~dhtexp.prob.CondDist`. Input distributions
carry a time-sharing letter ``S`` whose alphabet equals the input alphabet, so
``P_SX = P_S P_{X|S}`` and the channel only sees ``X``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError, ValidationError
from .info import LN2, kl_array
from .prob import PROB_ATOL, Alphabet, CondDist, FiniteDist, simplex_grid

RHO_MAX = 1e12


def as_matrix(channel) -> np.ndarray:
    if isinstance(channel, CondDist):
        if len(channel.given) != 1:
            raise DimensionError("a channel has exactly one input axis")
        return np.asarray(channel.table)
    w = np.asarray(channel, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"channel matrix must be 2-D, got shape {w.shape}")
    if np.any(w < -PROB_ATOL) or np.any(np.abs(w.sum(axis=1) - 1.0) > PROB_ATOL):
        raise ValidationError("channel rows must be probability vectors")
    return np.clip(w, 0.0, None)


def rows_identical(channel, atol: float = 1e-12) -> bool:
    w = as_matrix(channel)
    return bool(np.all(np.abs(w - w[0]) <= atol))


@dataclass(frozen=True)
class InputDist:
    """``P_SX = P_S P_{X|S}`` with ``S`` and ``X`` on the same alphabet.

    Parameters
    ----------
    P_S : array_like, shape (k,)
    P_X_given_S : array_like, shape (k, k)
        Row ``s`` is the input law used when the time-sharing letter is ``s``.
    """

    P_S: np.ndarray
    P_X_given_S: np.ndarray

    def __post_init__(self):
        ps = np.array(self.P_S, dtype=np.float64)
        px = np.array(self.P_X_given_S, dtype=np.float64)
        if ps.ndim != 1 or px.shape != (ps.size, ps.size):
            raise DimensionError(
                f"S and X alphabets must coincide: P_S has {ps.shape}, P_X|S has {px.shape}"
            )
        if np.any(ps < -PROB_ATOL) or abs(ps.sum() - 1) > PROB_ATOL:
            raise ValidationError("P_S is not a probability vector")
        if np.any(px < -PROB_ATOL) or np.any(np.abs(px.sum(axis=1) - 1) > PROB_ATOL):
            raise ValidationError("P_X|S rows are not probability vectors")
        ps, px = np.clip(ps, 0, None), np.clip(px, 0, None)
        ps.flags.writeable = False
        px.flags.writeable = False
        object.__setattr__(self, "P_S", ps)
        object.__setattr__(self, "P_X_given_S", px)

    @classmethod
    def from_dists(cls, P_S: FiniteDist, P_X_given_S: CondDist) -> "InputDist":
        return cls(P_S.probs, P_X_given_S.table)

    @classmethod
    def single(cls, P_X) -> "InputDist":
        """No time sharing: ``S`` is constant and ``X ~ P_X``."""
        px = np.asarray(P_X, dtype=np.float64)
        k = px.size
        ps = np.zeros(k)
        ps[0] = 1.0
        rows = np.full((k, k), 1.0 / k)
        rows[0] = px
        return cls(ps, rows)

    @property
    def size(self) -> int:
        return self.P_S.size

    @property
    def P_X(self) -> np.ndarray:
        return self.P_S @ self.P_X_given_S

    def joint(self) -> np.ndarray:
        """``P_SX`` as a (k, k) array."""
        return self.P_S[:, None] * self.P_X_given_S

    def as_dists(self, s_name: str = "S", x_name: str = "X"):
        a_s, a_x = Alphabet(s_name, self.size), Alphabet(x_name, self.size)
        return FiniteDist(a_s, self.P_S, check=False), CondDist((a_s,), a_x, self.P_X_given_S, check=False)


@dataclass(frozen=True)
class ChannelExponentValue:
    """An exponent value in nats with its optimizer.

    ``value`` may be ``+inf``; ``-inf`` is the sentinel for an empty feasible
    set, in which case ``feasible`` is False.
    """

    value: float
    rho: float | None = None
    input: InputDist | None = None
    feasible: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def bits(self) -> float:
        return self.value / LN2


# ---------------------------------------------------------------------------
# capacity


def _mi_rows(px: np.ndarray, w: np.ndarray) -> float:
    py = px @ w
    return float(sum(px[x] * kl_array(w[x], py) for x in range(len(px)) if px[x] > 0))


def mutual_information(px, channel) -> float:
    """``I(X;Y)`` in nats for input law ``px``."""
    return _mi_rows(np.asarray(px, dtype=np.float64), as_matrix(channel))


def capacity(channel, tol: float = 1e-9, max_iter: int = 1_000_000) -> tuple[float, FiniteDist]:
    """Blahut-Arimoto capacity in nats and a capacity-achieving input law.

    Iterates until ``max_x D(W_x || P_Y) - I(P_X)``, an upper bound on the
    gap to capacity, falls below ``tol``; the returned value is the lower
    (achieved) end of that certified interval.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    w = as_matrix(channel)
    k = w.shape[0]
    px = np.full(k, 1.0 / k)
    alphabet = Alphabet("X", k)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), 0.0)
    for _ in range(max_iter):
        py = px @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            logpy = np.where(py > 0, np.log(np.where(py > 0, py, 1.0)), 0.0)
        d = (w * (logw - logpy)).sum(axis=1)
        lower = float(px @ d)
        upper = float(d.max())
        if upper - lower <= tol:
            return max(lower, 0.0), FiniteDist(alphabet, px, check=False)
        px = px * np.exp(d - d.max())
        px /= px.sum()
    raise ConfigurationError(f"Blahut-Arimoto did not reach tol={tol} in {max_iter} iterations")


# ---------------------------------------------------------------------------
# expurgated exponent


def bhattacharyya(channel) -> np.ndarray:
    """``Z[x, x'] = sum_y sqrt(W(y|x) W(y|x'))``."""
    r = np.sqrt(as_matrix(channel))
    return np.clip(r @ r.T, 0.0, 1.0)


def pair_weights(inp: InputDist) -> np.ndarray:
    """``A[x, x'] = sum_s P_S(s) P(x|s) P(x'|s)``."""
    px = inp.P_X_given_S
    return np.einsum("s,sx,sy->xy", inp.P_S, px, px)


class _ExpurgatedFunction:
    """``g(rho) = -rho R - rho log sum A Z^(1/rho)`` for fixed pair weights."""

    def __init__(self, A: np.ndarray, Z: np.ndarray):
        pos = (A > 0) & (Z > 0)
        self.a = A[pos]
        self.logz = np.log(Z[pos])
        self.mass = float(self.a.sum())
        # sum a ln Z / mass: the 1/rho coefficient of log S(rho) as rho grows
        self.mean_logz = float((self.a * self.logz).sum() / self.mass) if self.mass > 0 else 0.0

    def log_s(self, rho):
        return np.log(np.sum(self.a * np.exp(np.multiply.outer(1.0 / np.asarray(rho), self.logz)), axis=-1))

    def g0(self, rho):
        """``-rho log S(rho)``: the rate-free part of ``g``."""
        rho = np.asarray(rho, dtype=np.float64)
        return -rho * self.log_s(rho)

    def slope(self, rho: float, R: float) -> float:
        t = np.exp(self.logz / rho)
        s = float(np.sum(self.a * t))
        return -R - np.log(s) + float(np.sum(self.a * t * self.logz)) / (rho * s)

    def limit(self, R: float) -> float:
        """``lim g(rho)`` as ``rho`` grows, for rates where it is finite."""
        return -self.mean_logz


def _maximize_g(f: _ExpurgatedFunction, R: float):
    if f.mass <= 0:
        return float("inf"), float("inf"), "all pairs separable"
    tail = R + np.log(f.mass)
    if tail < -1e-15:
        return float("inf"), float("inf"), "unbounded as rho grows"
    if tail <= 1e-15:
        # asymptotic slope zero: concave g increases to its limit
        return f.limit(R), float("inf"), "limit"
    if f.slope(1.0, R) <= 0:
        return float(f.g0(1.0) - R), 1.0, "boundary"
    lo, hi = 1.0, 2.0
    while f.slope(hi, R) > 0:
        lo, hi = hi, hi * 2.0
        if hi > RHO_MAX:
            return float(f.g0(RHO_MAX) - RHO_MAX * R), RHO_MAX, "rho cap"
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if f.slope(mid, R) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    rho = 0.5 * (lo + hi)
    return float(f.g0(rho) - rho * R), rho, "interior"


def expurgated_fixed(R: float, inp: InputDist, channel) -> ChannelExponentValue:
    """Expurgated exponent ``E_x(R, P_SX)`` in nats for a fixed input.

    Maximizes ``g(rho) = -rho R - rho log sum_{s,x,x'} P_S(s) P(x|s) P(x'|s)
    Z(x,x')^(1/rho)`` over ``rho >= 1``. ``g`` is concave, so the maximizer is
    found by bisection on ``g'``. When the supremum is approached only as
    ``rho`` grows without bound, the analytic limit is returned with
    ``rho = inf``: the limit is ``-sum A ln Z`` over pairs with ``Z > 0`` when
    those pairs carry all the weight and ``R = 0``, and ``+inf`` when pairs
    with ``Z = 0`` carry enough weight that ``R < -ln(mass of Z > 0)``.
    """
    if R < 0:
        raise DomainError(f"rate must be nonnegative, got {R}")
    w = as_matrix(channel)
    if w.shape[0] != inp.size:
        raise DimensionError(f"input alphabet {inp.size} vs channel inputs {w.shape[0]}")
    f = _ExpurgatedFunction(pair_weights(inp), bhattacharyya(w))
    value, rho, how = _maximize_g(f, R)
    return ChannelExponentValue(max(value, 0.0) + 0.0, rho=rho, input=inp, diagnostics={"branch": how})


class ExpurgatedTable:
    """Certified lower bounds on ``E_x(R, P_SX)`` for many inputs and rates at once.

    ``g(rho) = g0(rho) - rho R`` is tabulated on a log-spaced ``rho`` grid;
    ``max_j g(rho_j)`` never exceeds the true maximum, and the ``rho -> inf``
    limit is included exactly, so the bound is tight at ``R = 0``.
    """

    def __init__(self, inputs: list[InputDist], channel, n_rho: int = 240, rho_max: float = 1e6):
        weights = np.stack([pair_weights(inp) for inp in inputs]) if inputs else np.zeros((0, 1, 1))
        self._build(weights, bhattacharyya(channel), n_rho, rho_max)

    @classmethod
    def from_weights(cls, weights: np.ndarray, channel, n_rho: int = 240, rho_max: float = 1e6):
        """Build from stacked pair weights ``A[i, x, x']`` (see :func:`pair_weights`)."""
        obj = cls.__new__(cls)
        obj._build(np.asarray(weights, dtype=np.float64), bhattacharyya(channel), n_rho, rho_max)
        return obj

    def _build(self, weights, Z, n_rho, rho_max):
        n = weights.shape[0]
        self.rho = np.geomspace(1.0, rho_max, n_rho)
        pos = Z > 0
        A = weights.reshape(n, -1)[:, pos.ravel()]
        logz = np.log(Z[pos])
        self.mass = A.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.lim = np.where(self.mass > 0, -(A @ logz) / np.where(self.mass > 0, self.mass, 1.0), np.inf)
            # S_i(rho) = sum A Z^(1/rho); g0 = -rho log S
            S = A @ np.exp(np.outer(logz, 1.0 / self.rho))
            self.g0 = np.where(S > 0, -self.rho[None, :] * np.log(np.where(S > 0, S, 1.0)), np.inf)

    def _finish(self, vals, R, mass, lim):
        with np.errstate(divide="ignore"):
            tail = R + np.log(mass)
        vals = np.where(tail <= 1e-15, np.maximum(vals, lim), vals)
        vals = np.where(tail < -1e-15, np.inf, vals)
        return np.maximum(vals, 0.0)

    def lower(self, R) -> np.ndarray:
        """Lower bound for input ``i`` at rate ``R[i]`` (``R`` broadcast over inputs)."""
        R = np.broadcast_to(np.asarray(R, dtype=np.float64), self.mass.shape)
        vals = (self.g0 - R[:, None] * self.rho[None, :]).max(axis=1)
        return self._finish(vals, R, self.mass, self.lim)

    def lower_rates(self, i: int, R) -> np.ndarray:
        """Lower bounds for input ``i`` at each rate in ``R``."""
        R = np.asarray(R, dtype=np.float64)
        vals = (self.g0[i][None, :] - R[:, None] * self.rho[None, :]).max(axis=1)
        return self._finish(vals, R, self.mass[i], self.lim[i])


def expurgated_free(R: float, channel, grid_step: float = 0.05, refine_rounds: int = 3) -> ChannelExponentValue:
    """``max_{P_X} E_x(R, P_X)`` without time sharing.

    Grid search over the input simplex followed by pattern refinement that
    moves mass between pairs of letters with a step halved each round.
    """
    w = as_matrix(channel)
    k = w.shape[0]
    grid = simplex_grid(k, grid_step)

    def ev(px):
        return expurgated_fixed(R, InputDist.single(px), w).value

    vals = [ev(px) for px in grid]
    best = int(np.argmax(vals))
    px, val = grid[best].copy(), vals[best]
    step = grid_step / 2
    for _ in range(refine_rounds):
        improved = True
        while improved:
            improved = False
            for i, j in itertools.permutations(range(k), 2):
                if px[j] < step - 1e-15:
                    continue
                cand = px.copy()
                cand[i] += step
                cand[j] -= step
                v = ev(cand)
                if v > val + 1e-15:
                    px, val, improved = cand, v, True
        step /= 2
    return ChannelExponentValue(val, input=InputDist.single(px), diagnostics={"grid_points": len(grid)})


# ---------------------------------------------------------------------------
# red-alert exponent


def red_alert_fixed(inp: InputDist, channel) -> ChannelExponentValue:
    """``E_m(P_SX) = sum_s P_S(s) D(P_{Y|S=s} || W(.|s))`` in nats."""
    w = as_matrix(channel)
    if w.shape[0] != inp.size:
        raise DimensionError(f"input alphabet {inp.size} vs channel inputs {w.shape[0]}")
    py_s = inp.P_X_given_S @ w
    total = 0.0
    for s in range(inp.size):
        if inp.P_S[s] > 0:
            total += inp.P_S[s] * kl_array(py_s[s], w[s])
    return ChannelExponentValue(total, input=inp)


def row_terms(rows: np.ndarray, w: np.ndarray):
    """Per candidate row ``r`` and letter ``s``: ``I(r, W)`` and ``D(r W || W_s)``.

    Returns ``(mi, div)`` with shapes ``(n,)`` and ``(n, k)``.
    """
    py = rows @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), -np.inf)
        logpy = np.where(py > 0, np.log(np.where(py > 0, py, 1.0)), 0.0)
        # I = sum_x r_x sum_y w_xy (log w_xy - log py_y)
        inner = np.where(w[None] > 0, w[None] * (np.where(w > 0, logw, 0.0)[None] - logpy[:, None, :]), 0.0)
        mi = np.einsum("nx,nxy->n", rows, inner)
        # D(py || w_s)
        py_logpy = np.where(py > 0, py * logpy, 0.0).sum(axis=1)
        cross = np.einsum("ny,sy->ns", py, np.where(w > 0, logw, 0.0))
        support_bad = np.einsum("ny,sy->ns", (py > 0).astype(float), (w <= 0).astype(float)) > 0
    div = np.where(support_bad, np.inf, py_logpy[:, None] - cross)
    return np.maximum(mi, 0.0), np.maximum(div, 0.0)


def red_alert_max(R: float, channel, tol: float = 1e-3, grid_step: float = 0.02,
                  max_points: int = 2_000_000) -> ChannelExponentValue:
    """``max E_m(P_SX)`` subject to ``|I(X;Y|S) - R| <= tol``.

    Exhaustive over ``P_S`` and each row of ``P_{X|S}`` on simplex grids.
    Returns the ``-inf`` sentinel with ``feasible = False`` when no grid point
    meets the rate band.
    """
    w = as_matrix(channel)
    k = w.shape[0]
    rows = simplex_grid(k, grid_step)
    ps_grid = simplex_grid(k, grid_step)
    total = len(ps_grid) * len(rows) ** k
    if total > max_points:
        raise ConfigurationError(f"red_alert_max grid has {total} points (limit {max_points}); raise grid_step")
    mi, div = row_terms(rows, w)
    best = (-np.inf, None)
    for combo in itertools.product(range(len(rows)), repeat=k):
        c = np.array(combo)
        i_s = mi[c]
        e_s = div[c, np.arange(k)]
        I = ps_grid @ i_s
        with np.errstate(invalid="ignore"):
            E = np.where(ps_grid > 0, ps_grid * e_s, 0.0).sum(axis=1)
        ok = np.abs(I - R) <= tol
        if ok.any():
            j = int(np.flatnonzero(ok)[np.argmax(E[ok])])
            if E[j] > best[0]:
                best = (float(E[j]), (ps_grid[j], rows[c]))
    if best[1] is None:
        return ChannelExponentValue(-np.inf, feasible=False, diagnostics={"reason": "no grid point meets the rate band"})
    return ChannelExponentValue(best[0], input=InputDist(*best[1]))


# ---------------------------------------------------------------------------
# pairwise divergence


def max_pair_divergence(channel) -> tuple[float, tuple[int, int]]:
    """``max_{a, b} D(W_a || W_b)`` over ordered pairs; ties go to the smallest ``(a, b)``."""
    w = as_matrix(channel)
    best, arg = 0.0, (0, 0)
    for a, b in itertools.product(range(w.shape[0]), repeat=2):
        d = kl_array(w[a], w[b])
        if d > best:
            best, arg = d, (a, b)
    return best, arg
