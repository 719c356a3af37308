"""I-projections: minimize ``D(P || Q)`` over joints with pinned marginals.

The feasible sets are intersections of linear families (fixed marginals) with
at most one conditional-entropy superlevel set ``H(T | G) >= h``. Both are
convex, so the minimum is global.

Marginal families are handled by iterative proportional fitting (IPF), which
computes the exact I-projection onto an intersection of linear families. When
an entropy floor binds, the Lagrangian ``D(P || Q) - lam * H(T | G)`` is
minimized by mirror descent in the KL geometry (each step is itself an IPF
projection) and ``lam`` is located by a bracketed root search on
``H(T | G) = h``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .errors import ConfigurationError, DimensionError
from .info import kl_array
from .prob import JointDist, _names, marginalize

IPF_TOL = 1e-12
IPF_MAX_ITER = 100_000
MD_TOL = 1e-13
MD_MAX_ITER = 20_000
LAMBDA_MAX = 1e4
FLOOR_TOL = 1e-10


@dataclass(frozen=True)
class MarginalConstraint:
    """Pin the marginal of the projected joint on ``target.names``."""

    target: JointDist

    @property
    def axes(self) -> tuple[str, ...]:
        return self.target.names


@dataclass(frozen=True)
class EntropyFloorConstraint:
    """Require ``H(target | given) >= floor`` (nats)."""

    target: str
    given: tuple[str, ...]
    floor: float

    def __post_init__(self):
        object.__setattr__(self, "given", _names(self.given))


@dataclass(frozen=True)
class ProjectionResult:
    value: float
    argmin: JointDist | None
    iterations: int
    feasible: bool
    converged: bool = True
    multiplier: float = 0.0
    floor_active: bool = False
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# array-level machinery


@dataclass
class _Cons:
    """A marginal constraint on array axes ``keep``; ``target`` is keepdims-shaped."""

    keep: tuple[int, ...]
    drop: tuple[int, ...]
    target: np.ndarray


def _cons(ndim: int, keep: Sequence[int], target: np.ndarray) -> _Cons:
    keep = tuple(sorted(keep))
    drop = tuple(i for i in range(ndim) if i not in keep)
    return _Cons(keep, drop, target)


def _marg(p: np.ndarray, drop: tuple[int, ...]) -> np.ndarray:
    return p.sum(axis=drop, keepdims=True) if drop else p


def ipf(r: np.ndarray, cons: list[_Cons], tol: float = IPF_TOL, max_iter: int = IPF_MAX_ITER):
    """Scale the nonnegative measure ``r`` onto the constraint family.

    Returns ``(p, sweeps, converged)``; ``p`` is the I-projection of ``r``.
    """
    p = np.array(r, dtype=np.float64)
    if not cons:
        s = p.sum()
        return (p / s if s > 0 else p), 0, True
    if len(cons) == 1:
        c = cons[0]
        m = _marg(p, c.drop)
        with np.errstate(divide="ignore", invalid="ignore"):
            p *= np.where(m > 0, c.target / np.where(m > 0, m, 1.0), 0.0)
        return p, 1, True
    for it in range(1, max_iter + 1):
        err = 0.0
        for c in cons:
            m = _marg(p, c.drop)
            err = max(err, float(np.abs(m - c.target).sum()))
            with np.errstate(divide="ignore", invalid="ignore"):
                p *= np.where(m > 0, c.target / np.where(m > 0, m, 1.0), 0.0)
        if err < tol:
            return p, it, True
    return p, max_iter, False


def _consistent(cons: list[_Cons], ndim: int, atol: float = 1e-9) -> bool:
    for a, b in itertools.combinations(cons, 2):
        common = set(a.keep) & set(b.keep)
        drop_a = tuple(i for i in range(ndim) if i not in common)
        ma = a.target.sum(axis=tuple(i for i in drop_a if i in a.keep), keepdims=True)
        mb = b.target.sum(axis=tuple(i for i in drop_a if i in b.keep), keepdims=True)
        if np.abs(ma - mb).sum() > atol:
            return False
    return True


def _lp_feasible(support: np.ndarray, cons: list[_Cons]) -> bool:
    cells = np.flatnonzero(support.ravel())
    if cells.size == 0:
        return False
    rows, rhs = [], []
    shape = support.shape
    for c in cons:
        tshape = c.target.shape
        idx = np.unravel_index(cells, shape)
        tidx = tuple(idx[i] if tshape[i] > 1 else np.zeros_like(idx[i]) for i in range(len(shape)))
        flat_t = np.ravel_multi_index(tidx, tshape)
        for k in range(c.target.size):
            rows.append((flat_t == k).astype(float))
            rhs.append(c.target.ravel()[k])
    res = optimize.linprog(
        np.zeros(cells.size), A_eq=np.array(rows), b_eq=np.array(rhs),
        bounds=(0, None), method="highs",
    )
    return res.status == 0


def feasible_within_support(q: np.ndarray, cons: list[_Cons]) -> bool:
    """Does some joint supported on ``supp(q)`` meet every marginal constraint?"""
    support = q > 0
    if not cons:
        return bool(support.any())
    if not _consistent(cons, q.ndim):
        return False
    ind = support.astype(float)
    for c in cons:
        if np.any((c.target > 0) & (_marg(ind, c.drop) == 0)):
            return False
    if len(cons) == 1:
        return True
    if len(cons) == 2:
        a, b = cons
        common = tuple(sorted(set(a.keep) & set(b.keep)))
        drop_c = tuple(i for i in range(q.ndim) if i not in common)
        overlap = a.target.sum(axis=tuple(i for i in drop_c if i in a.keep), keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            witness = np.where(overlap > 0, a.target * b.target / np.where(overlap > 0, overlap, 1.0), 0.0)
        witness = np.broadcast_to(witness, q.shape)
        if not np.any((witness > 0) & ~support):
            return True
    return _lp_feasible(support, cons)


def _cond_entropy_terms(p: np.ndarray, tg_drop, g_drop):
    p_tg = _marg(p, tg_drop)
    p_g = _marg(p, g_drop)
    return p_tg, p_g


def cond_entropy_array(p: np.ndarray, tg_drop: tuple[int, ...], g_drop: tuple[int, ...]) -> float:
    p_tg, p_g = _cond_entropy_terms(p, tg_drop, g_drop)

    def h(a):
        a = a[a > 0]
        return float(-(a * np.log(a)).sum())

    return max(h(p_tg) - h(p_g), 0.0)


@dataclass
class _Floor:
    tg_drop: tuple[int, ...]
    g_drop: tuple[int, ...]
    value: float


def _lagrangian(p, q, fl: _Floor, lam: float) -> float:
    return kl_array(p, q) - lam * cond_entropy_array(p, fl.tg_drop, fl.g_drop)


def _md_solve(q, cons, fl: _Floor, lam: float, p0: np.ndarray):
    """Minimize ``D(P||Q) - lam H(T|G)`` over the marginal family by mirror descent.

    The objective is (1 + lam)-smooth and 1-strongly convex relative to the
    negative entropy, so the step ``1 / (1 + lam)`` always decreases it; a
    larger step is tried first and kept when it also decreases the objective.
    """
    p = p0
    f = _lagrangian(p, q, fl, lam)
    eta_safe = 1.0 / (1.0 + lam)
    eta = min(1.0, 4.0 * eta_safe)
    it = 0
    for it in range(1, MD_MAX_ITER + 1):
        p_tg, p_g = _cond_entropy_terms(p, fl.tg_drop, fl.g_drop)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_q = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), -np.inf)
            log_p = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
            cond = np.where(p > 0, p_tg / np.where(p_g > 0, p_g, 1.0), 1.0)
            log_cond = np.log(np.broadcast_to(cond, p.shape))
        while True:
            e = max(eta, eta_safe)
            with np.errstate(invalid="ignore"):
                # gradient step on D - lam H in the KL geometry
                logr = e * log_q + (1.0 - e) * log_p - e * lam * log_cond
            finite = np.isfinite(logr)
            shift = logr[finite].max()
            r = np.where(finite, np.exp(np.where(finite, logr, 0.0) - shift), 0.0)
            cand, _, _ = ipf(r, cons)
            fc = _lagrangian(cand, q, fl, lam)
            if fc <= f + 1e-15 or e <= eta_safe:
                break
            eta = max(eta / 2.0, eta_safe)
        delta = float(np.abs(cand - p).sum())
        p, f = cand, fc
        if e > eta_safe and eta < 1.0:
            eta = min(1.0, 2.0 * eta)
        if delta < MD_TOL:
            return p, it, True
    return p, it, False


def project_array(q: np.ndarray, cons: list[_Cons], floor: _Floor | None = None,
                  witness: np.ndarray | None = None) -> dict:
    """Array-level I-projection.

    Returns a dict with ``value``, ``p``, ``feasible``, ``converged``,
    ``iterations``, ``multiplier`` and ``floor_active``.
    """
    out = dict(value=float("inf"), p=None, feasible=False, converged=True,
               iterations=0, multiplier=0.0, floor_active=False)
    if not feasible_within_support(q, cons):
        return out
    p, iters, conv = ipf(np.where(q > 0, q, 0.0), cons)
    out.update(p=p, feasible=True, converged=conv, iterations=iters, value=kl_array(p, q))
    if floor is None:
        return out
    h0 = cond_entropy_array(p, floor.tg_drop, floor.g_drop)
    if h0 >= floor.value - FLOOR_TOL:
        return out

    out["floor_active"] = True
    total = iters
    cache: dict[float, tuple[np.ndarray, float]] = {0.0: (p, h0)}
    warm = [p]

    def solve(lam: float):
        nonlocal total
        if lam in cache:
            return cache[lam]
        pl, it, ok = _md_solve(q, cons, floor, lam, warm[0])
        total += it
        if not ok:
            out["converged"] = False
        warm[0] = pl
        cache[lam] = (pl, cond_entropy_array(pl, floor.tg_drop, floor.g_drop))
        return cache[lam]

    lo, hi = 0.0, 1.0
    while solve(hi)[1] < floor.value - FLOOR_TOL:
        lo, hi = hi, hi * 4.0
        if hi > LAMBDA_MAX:
            out["converged"] = False
            out["iterations"] = total
            if witness is not None and cond_entropy_array(witness, floor.tg_drop, floor.g_drop) >= floor.value - FLOOR_TOL:
                out.update(p=witness, value=kl_array(witness, q), multiplier=float("inf"))
            else:
                out.update(p=None, value=float("inf"), feasible=False)
            return out
    lam = _illinois(lambda t: solve(t)[1] - floor.value, lo, hi, solve(lo)[1] - floor.value,
                    solve(hi)[1] - floor.value)
    pl, _ = solve(lam)
    out.update(p=pl, value=kl_array(pl, q), multiplier=float(lam), iterations=total)
    return out


def _illinois(g, lo: float, hi: float, g_lo: float, g_hi: float) -> float:
    """Root of the increasing function ``g`` on ``[lo, hi]``; returns a point with ``g >= 0``.

    Regula falsi with the Illinois modification keeps a sign bracket, so the
    returned multiplier always satisfies the floor.
    """
    side = 0
    for _ in range(200):
        if g_hi <= FLOOR_TOL or hi - lo <= 1e-12 * max(1.0, hi):
            break
        t = hi - g_hi * (hi - lo) / (g_hi - g_lo)
        if not lo < t < hi:
            t = 0.5 * (lo + hi)
        g_t = g(t)
        if g_t >= 0.0:
            hi, g_hi = t, g_t
            if side == 1:
                g_lo *= 0.5
            side = 1
        else:
            lo, g_lo = t, g_t
            if side == -1:
                g_hi *= 0.5
            side = -1
    return hi


# ---------------------------------------------------------------------------
# JointDist-level API


def _to_arrays(Q: JointDist, marginals: Sequence[MarginalConstraint],
               floors: Sequence[EntropyFloorConstraint]):
    names = Q.names
    cons = []
    for mc in marginals:
        for a in mc.axes:
            if a not in names:
                raise DimensionError(f"constraint axis {a!r} not in {names}")
            if mc.target.alphabet_of(a).size != Q.alphabet_of(a).size:
                raise DimensionError(f"constraint axis {a!r} has the wrong size")
        keep = [names.index(a) for a in mc.axes]
        order = sorted(range(len(keep)), key=lambda i: keep[i])
        t = np.transpose(mc.target.probs, order)
        shape = [1] * len(names)
        for k in keep:
            shape[k] = Q.shape[k]
        cons.append(_cons(len(names), keep, t.reshape(shape)))
    if len(floors) > 1:
        raise ConfigurationError("at most one entropy floor is supported")
    fl = None
    if floors:
        f = floors[0]
        for a in (f.target,) + f.given:
            if a not in names:
                raise DimensionError(f"floor axis {a!r} not in {names}")
        tg = {names.index(a) for a in (f.target,) + f.given}
        g = {names.index(a) for a in f.given}
        fl = _Floor(
            tuple(i for i in range(len(names)) if i not in tg),
            tuple(i for i in range(len(names)) if i not in g),
            float(f.floor),
        )
    return cons, fl


def min_kl(Q: JointDist, marginals: Sequence[MarginalConstraint] = (),
           floors: Sequence[EntropyFloorConstraint] = (), witness: JointDist | None = None) -> ProjectionResult:
    """Minimize ``D(P || Q)`` subject to marginal constraints and an entropy floor.

    Parameters
    ----------
    Q : JointDist
        Reference distribution. Cells where ``Q = 0`` are frozen at zero.
    marginals : sequence of MarginalConstraint
        Marginals the minimizer must reproduce.
    floors : sequence of EntropyFloorConstraint
        At most one conditional-entropy floor.
    witness : JointDist, optional
        A known feasible point, used only as a fallback when the floor sits at
        the boundary of what the marginal family allows.

    Returns
    -------
    ProjectionResult
        ``value = +inf`` and ``feasible = False`` when no joint supported on
        ``supp(Q)`` meets the constraints.
    """
    cons, fl = _to_arrays(Q, marginals, floors)
    w = witness.reorder(Q.names).probs if witness is not None else None
    res = project_array(np.asarray(Q.probs), cons, fl, w)
    argmin = None
    if res["p"] is not None:
        p = res["p"] / res["p"].sum()
        argmin = JointDist(Q.axes, p, check=False)
    return ProjectionResult(
        value=res["value"], argmin=argmin, iterations=res["iterations"], feasible=res["feasible"],
        converged=res["converged"], multiplier=res["multiplier"], floor_active=res["floor_active"],
    )


# ---------------------------------------------------------------------------
# Independent oracle


BRUTE_MAX_CELLS = 12
BRUTE_POINTS = 10_000
BRUTE_MAX_FREE = 4
_BISECT_STEPS = 60


def _affine_system(Q: JointDist, marginals: Sequence[MarginalConstraint]):
    names = Q.names
    n = Q.probs.size
    rows, rhs = [np.ones(n)], [1.0]
    idx = np.indices(Q.shape).reshape(len(names), -1)
    for mc in marginals:
        pos = [names.index(a) for a in mc.axes]
        for cell in np.ndindex(*mc.target.shape):
            mask = np.ones(n, dtype=bool)
            for k, c in zip(pos, cell):
                mask &= idx[k] == c
            rows.append(mask.astype(float))
            rhs.append(mc.target.probs[cell])
    return np.array(rows), np.array(rhs)


def _group_matrix(shape, drop):
    """Cell-to-group labels and the (cells x groups) indicator summing out ``drop``."""
    idx = np.indices(shape).reshape(len(shape), -1)
    keep = [i for i in range(len(shape)) if i not in drop]
    if keep:
        labels = np.ravel_multi_index(tuple(idx[k] for k in keep), tuple(shape[k] for k in keep))
    else:
        labels = np.zeros(idx.shape[1], dtype=np.int64)
    m = np.zeros((idx.shape[1], labels.max() + 1))
    m[np.arange(idx.shape[1]), labels] = 1.0
    return labels, m


def _neg_xlogx_rows(a):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0).sum(axis=1)


class _LineOracle:
    """Exact minimization of ``D(x || q)`` along parallel lines ``x = base + s n``.

    Works on batches of lines; uses only bisection on directional derivatives.
    Both the divergence (convex) and the conditional entropy (concave) restrict
    to one-dimensional convex/concave functions, so every step is a monotone
    root search.
    """

    def __init__(self, q: np.ndarray, direction: np.ndarray, shape, fl: _Floor | None):
        self.q = q
        self.logq = np.log(np.where(q > 0, q, 1.0))
        self.n = direction
        self.shape = shape
        self.fl = fl
        # cells where q = 0 must stay empty; lines moving mass into them are cut there
        self.dead = q <= 0
        if fl is not None:
            self.tg_of, self.m_tg = _group_matrix(shape, fl.tg_drop)
            self.g_of, self.m_g = _group_matrix(shape, fl.g_drop)

    def _logx(self, X):
        return np.log(np.clip(X, 1e-300, 1.0))

    def kl(self, X):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(X > 0, X * (self._logx(X) - self.logq), 0.0)
        v = t.sum(axis=1)
        v[np.any((X > 1e-15) & self.dead, axis=1)] = np.inf
        return v

    def _cond_parts(self, X):
        X = np.clip(X, 0.0, 1.0)
        return X @ self.m_tg, X @ self.m_g

    def cond_h(self, X):
        ptg, pg = self._cond_parts(X)
        return _neg_xlogx_rows(ptg) - _neg_xlogx_rows(pg)

    def dkl(self, X):
        return ((self._logx(X) - self.logq) * self.n).sum(axis=1)

    def dh(self, X):
        ptg, pg = self._cond_parts(X)
        log_cond = np.log(np.clip(ptg, 1e-300, 1.0))[:, self.tg_of] - np.log(np.clip(pg, 1e-300, 1.0))[:, self.g_of]
        return -(log_cond * self.n).sum(axis=1)

    def _bisect(self, fun, base, lo, hi):
        """Bracket the last ``s`` in ``[lo, hi]`` with ``fun(s) <= 0``, ``fun`` increasing (vectorized)."""
        lo, hi = lo.copy(), hi.copy()
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            left = fun(base + mid[:, None] * self.n) <= 0
            lo = np.where(left, mid, lo)
            hi = np.where(left, hi, mid)
        return lo, hi

    def minimize(self, base: np.ndarray):
        """Per line: ``(value, s, deficit)``.

        ``value = inf`` when the line misses the feasible set; ``deficit`` is
        then how far the largest entropy on the line falls short of the floor.
        """
        n = self.n
        deficit = np.zeros(len(base))
        # interval of s keeping x >= 0 and the q = 0 cells empty
        with np.errstate(divide="ignore", invalid="ignore"):
            lo_c = np.where(n > 0, -base / n, -np.inf)
            hi_c = np.where(n < 0, -base / n, np.inf)
        dead_move = self.dead & (np.abs(n) > 1e-14)
        if dead_move.any():
            pin = -base[:, dead_move] / n[dead_move]
            lo_c = np.concatenate([lo_c, pin], axis=1)
            hi_c = np.concatenate([hi_c, pin], axis=1)
        s_lo, s_hi = lo_c.max(axis=1), hi_c.min(axis=1)
        bad = ~(s_lo <= s_hi + 1e-15) | np.any(self.dead & (base > 1e-15) & (np.abs(n) <= 1e-14), axis=1)
        s_hi = np.maximum(s_lo, s_hi)
        s_lo = np.where(np.isfinite(s_lo), s_lo, -2.0)
        s_hi = np.where(np.isfinite(s_hi), s_hi, 2.0)
        # unconstrained line minimum of the divergence
        a, b = self._bisect(self.dkl, base, s_lo, s_hi)
        s_star = 0.5 * (a + b)
        if self.fl is not None:
            floor = self.fl.value - 1e-12
            h_star = self.cond_h(base + s_star[:, None] * n)
            need = h_star < floor
            if need.any():
                # maximize the (concave) entropy along the line
                a, b = self._bisect(lambda X: -self.dh(X), base, s_lo, s_hi)
                s_h = 0.5 * (a + b)
                h_max = self.cond_h(base + s_h[:, None] * n)
                deficit = np.where(need, np.maximum(floor - h_max, 0.0), 0.0)
                bad |= need & (h_max < floor)
                # the divergence is convex, so the constrained optimum is the
                # floor crossing between s_star and s_h
                left = s_star < s_h
                rising = lambda X: self.cond_h(X) - floor
                falling = lambda X: floor - self.cond_h(X)
                _, up = self._bisect(rising, base, np.where(left, s_star, s_h), np.where(left, s_h, s_h))
                down, _ = self._bisect(falling, base, np.where(left, s_h, s_h), np.where(left, s_h, s_star))
                s_floor = np.where(left, up, down)
                s_star = np.where(need, s_floor, s_star)
        X = np.clip(base + s_star[:, None] * n, 0.0, None)
        vals = self.kl(X)
        if self.fl is not None:
            vals[self.cond_h(X) < self.fl.value - 1e-10] = np.inf
        vals[bad] = np.inf
        deficit = np.where(bad & (deficit == 0), np.inf, deficit)
        return vals, s_star, deficit


def min_kl_bruteforce(Q: JointDist, marginals: Sequence[MarginalConstraint] = (),
                      floors: Sequence[EntropyFloorConstraint] = (), step: float = 1e-3,
                      seeds: Sequence[JointDist] = ()) -> float:
    """Lattice scan of the feasible set; an upper bound on the true minimum.

    The affine hull of the marginal constraints is parametrized by an
    orthonormal nullspace basis. All but the last nullspace coordinate are
    scanned on a lattice; along the last one the minimum is found exactly by
    one-dimensional bisection, so the returned value is attained by a feasible
    joint. The lattice starts coarse over the whole parameter box, then a
    window of +-4 cells around the best point is rescanned at successively
    finer spacings down to ``step``.

    ``seeds`` are optional points known to satisfy the constraints; windows
    around their lattice positions are rescanned at every level as well. This
    matters when an entropy floor leaves only a sliver of feasible joints that
    a coarse lattice can miss entirely.
    """
    if Q.probs.size > BRUTE_MAX_CELLS:
        raise ConfigurationError(f"brute force limited to {BRUTE_MAX_CELLS} cells, got {Q.probs.size}")
    if step < 1e-3:
        raise ConfigurationError("brute force step must be at least 1e-3")
    A, b = _affine_system(Q, marginals)
    x0, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(A @ x0 - b).max() > 1e-9:
        return float("inf")
    N = linalg.null_space(A)
    d = N.shape[1]
    if d > BRUTE_MAX_FREE:
        raise ConfigurationError(
            f"brute force supports at most {BRUTE_MAX_FREE} free dimensions after the constraints, got {d}")
    q = Q.probs.ravel()
    fl = _to_arrays(Q, (), floors)[1] if floors else None

    if d == 0:
        x = np.clip(x0, 0.0, None)
        if x0.min() < -1e-12:
            return float("inf")
        if fl is not None and cond_entropy_array(x.reshape(Q.shape), fl.tg_drop, fl.g_drop) < fl.value - 1e-10:
            return float("inf")
        return kl_array(x, q)

    # With a floor the feasible set can be a thin slab; a line direction nearly
    # parallel to it makes the lattice coarse across the slab. Every direction
    # gives a valid upper bound, so take the best over all of them.
    rotations = range(d) if fl is not None else range(1)
    seed_x = [sd.reorder(Q.names).probs.ravel() for sd in seeds]
    return min(_lattice_with_line(q, x0, np.roll(N, -r, axis=1), Q.shape, fl, step, seed_x) for r in rotations)


def _lattice_with_line(q, x0, N, shape, fl, step, seed_x=()) -> float:
    d = N.shape[1]
    seed_t = [(N.T @ (x - x0))[:-1] for x in seed_x]
    line = _LineOracle(q, N[:, -1], shape, fl)
    lat = N[:, :-1]

    def evaluate(T: np.ndarray):
        """Best line of a batch as ``(key, t)``; feasible lines rank by value, others by floor deficit."""
        vals, _, deficit = line.minimize(x0[None, :] + T @ lat.T)
        if np.isfinite(vals).any():
            k = int(np.argmin(vals))
            return (0, float(vals[k])), T[k]
        k = int(np.argmin(deficit))
        return (1, float(deficit[k])), T[k]

    if d == 1:
        key, _ = evaluate(np.zeros((1, 0)))
        return key[1] if key[0] == 0 else float("inf")

    radius = 1.0 + float(np.linalg.norm(x0))
    m = d - 1
    h = max(2 * radius / (BRUTE_POINTS ** (1.0 / m) - 1), step)
    best_key, best_t = _scan(evaluate, [np.arange(-radius, radius + h / 2, h)] * m)
    # zoom toward the best feasible line, or toward the smallest floor deficit
    # while no scanned line reaches the floor
    while h > step * (1 + 1e-9):
        # a thin feasible set can slip through the coarse lattice; the seeds
        # still locate it
        centers = ([best_t] if np.isfinite(best_key[1]) else []) + seed_t
        if not centers:
            return float("inf")
        h_new = max(h / 10.0, step)
        half = 4 * h
        for center in centers:
            axes = [np.arange(c - half, c + half + h_new / 2, h_new) for c in center]
            key, t = _scan(evaluate, axes)
            if key <= best_key:
                best_key, best_t = key, t
        h = h_new
    return best_key[1] if best_key[0] == 0 else float("inf")


def _scan(evaluate, axes):
    best_key, best_t = (2, float("inf")), None
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    for start in range(0, len(pts), 100_000):
        key, t = evaluate(pts[start:start + 100_000])
        if best_t is None or key < best_key:
            best_key, best_t = key, t
    return best_key, best_t


# ---------------------------------------------------------------------------
# The constraint sets used by the exponent formulas


T_KINDS = ("T1", "T2", "T3", "T1p", "T2p")


def t_set_constraints(kind: str, P_joint: JointDist, *, u="U", v="V", w="W", s="S", y="Y"):
    """Marginal and entropy-floor constraints defining a T-set.

    ``T1``: pin ``P_UW`` and ``P_VW``. ``T2``: pin ``P_UW`` and ``P_V`` and keep
    ``H(W|V)`` at least its value under ``P``. ``T3``: pin ``P_UW`` and ``P_V``.
    ``T1p``/``T2p`` are the hybrid-coding analogues with time-sharing ``S`` and
    channel output ``Y``: pin ``P_USW`` with ``P_VSWY`` (``T1p``) or with
    ``P_VSY`` plus the floor on ``H(W|V,S,Y)`` (``T2p``).
    """
    from .info import cond_entropy, cond_mutual_info, mutual_info

    def mc(*ax):
        return MarginalConstraint(marginalize(P_joint, ax))

    if kind == "T1":
        return [mc(u, w), mc(v, w)], []
    if kind == "T3":
        return [mc(u, w), mc(v)], []
    if kind == "T2":
        if mutual_info(P_joint, v, w) <= 1e-13:
            # the floor equals its maximum H(W), which forces V and W independent
            return [mc(u, w), mc(v), mc(v, w)], []
        return [mc(u, w), mc(v)], [EntropyFloorConstraint(w, (v,), cond_entropy(P_joint, w, v))]
    if kind == "T1p":
        return [mc(u, s, w), mc(v, s, w, y)], []
    if kind == "T2p":
        if cond_mutual_info(P_joint, w, (v, y), s) <= 1e-13:
            return [mc(u, s, w), mc(v, s, y), mc(v, s, y, w)], []
        return [mc(u, s, w), mc(v, s, y)], [
            EntropyFloorConstraint(w, (v, s, y), cond_entropy(P_joint, w, (v, s, y)))
        ]
    raise ValueError(f"unknown T-set kind {kind!r}; expected one of {T_KINDS}")


def t_set_projection(kind: str, P_joint: JointDist, Q_joint: JointDist, **axis_names) -> ProjectionResult:
    """I-projection of ``Q_joint`` onto the T-set built from ``P_joint``'s marginals."""
    marginals, floors = t_set_constraints(kind, P_joint, **axis_names)
    Q = Q_joint.reorder(P_joint.names) if set(Q_joint.names) == set(P_joint.names) else Q_joint
    return min_kl(Q, marginals, floors, witness=P_joint)
