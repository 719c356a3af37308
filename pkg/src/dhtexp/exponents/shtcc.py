"""Separate hypothesis testing and channel coding (SHTCC).

The exponent is a sup over a test channel ``P_{W|U}``, a time-shared channel
input ``P_SX`` and a compression rate ``R`` of the minimum of four terms: E1
(false acceptance of a jointly typical pair), E2 (binning error), E3
(ordinary-message channel error, expurgated exponent) and E4 (special-message
channel error, red-alert exponent).

The search exploits the structure of the terms in ``R``. When
``I(U;W) > R``, E2 and E4 increase with ``R`` and ``R + tau E_x(R/tau)``
does not increase (its slope is ``1 - rho* <= 0``), so the best rate in that
branch is at a crossing. Otherwise E2 is infinite and the other terms only
decrease with ``R``, so the best rate there is ``R = I(U;W)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

import numpy as np

from ..channel import ExpurgatedTable, InputDist, expurgated_fixed, red_alert_fixed, row_terms
from ..info import cond_mutual_info, kl_div, mutual_info
from ..prob import Alphabet, CondDist, compose, grid_count, simplex_grid
from ..projection import t_set_projection
from .instance import ExponentReport, HTInstance, SearchConfig

INF = float("inf")
# Strict inequalities (R < tau I(X;Y|S)) are enforced with this margin.
STRICT_MARGIN = 1e-9
# R grid stops this far below tau I(X;Y|S).
RATE_EDGE = 1e-6
MAX_CHANNEL_CANDIDATES = 50_000
W_BUDGET = 2_000
TOP_K = 3


@dataclass(frozen=True)
class SHTCCTerms:
    """Per-term breakdown of the SHTCC objective at one point (nats)."""

    E1: float
    E2: float
    E3: float
    E4: float
    R: float
    feasible: bool
    rate_branch: bool
    I_UW_given_V: float
    I_UW: float
    I_VW: float
    I_XY_given_S: float
    E_x: float
    E_m: float

    @property
    def value(self) -> float:
        return min(self.E1, self.E2, self.E3, self.E4)

    def as_dict(self) -> dict:
        return {"E1": self.E1, "E2": self.E2, "E3": self.E3, "E4": self.E4}


def _scale(tau: float, x: float) -> float:
    """``tau * x`` with ``0 * inf = 0`` (the convention for tau = 0)."""
    if tau == 0:
        return 0.0
    return tau * x


# ---------------------------------------------------------------------------
# test-channel statistics


class _WPoint:
    """Information quantities of one test channel, with projections computed on demand."""

    def __init__(self, inst: HTInstance, P_WU: np.ndarray):
        self.P_WU = np.asarray(P_WU, dtype=np.float64)
        nu, nw = self.P_WU.shape
        cond = CondDist((Alphabet("U", nu),), Alphabet("W", nw), self.P_WU, check=False)
        self.P = compose(inst.P_UV, cond)
        self.Q = compose(inst.Q_UV, cond)
        self.a = cond_mutual_info(self.P, "U", "W", "V")
        self.b = mutual_info(self.P, "U", "W")
        self.iv = mutual_info(self.P, "V", "W")
        # every T-set contains P itself, so D(P_UVW || Q_UVW) bounds all three minima
        self.ub = kl_div(self.P, self.Q)
        self._m: dict[str, float] = {}

    def m(self, kind: str) -> float:
        if kind not in self._m:
            self._m[kind] = t_set_projection(kind, self.P, self.Q).value
        return self._m[kind]

    def bounds(self) -> tuple[float, float, float]:
        """Best known upper bounds on ``(m1, m2, m3)``; exact once computed."""
        m1 = self._m.get("T1", self.ub)
        m2 = self._m.get("T2", m1)
        m3 = self._m.get("T3", m2)
        return m1, min(m2, m1), min(m3, m2, m1)


# ---------------------------------------------------------------------------
# channel-input candidates


class _Inputs:
    """A batch of time-shared inputs with capacity, red-alert and expurgated data."""

    def __init__(self, ps: np.ndarray, rows: np.ndarray, W: np.ndarray, tau: float):
        self.ps, self.rows = ps, rows
        k = ps.shape[1]
        flat = rows.reshape(-1, k)
        mi, div = row_terms(flat, W)
        mi = mi.reshape(rows.shape[:2])
        div = div.reshape(rows.shape[:2] + (k,))[:, np.arange(k), np.arange(k)]
        self.Ic = (ps * mi).sum(axis=1)
        with np.errstate(invalid="ignore"):
            self.Em = np.where(ps > 0, ps * div, 0.0).sum(axis=1)
        weights = np.einsum("ns,nsx,nsy->nxy", ps, rows, rows)
        self.table = ExpurgatedTable.from_weights(weights, W)
        self.tau = tau
        self.cap = tau * self.Ic
        self.tau_em = np.where(np.isinf(self.Em), INF, tau * self.Em) if tau > 0 else np.zeros_like(self.Em)
        # E_x tabulated on a fixed rate grid; E_x(R) >= E_x(next grid rate) since it is nonincreasing
        top = max(float(self.Ic.max()), 1e-6)
        self.rate_grid = np.unique(np.concatenate([[0.0], np.geomspace(1e-6, top, 160), np.linspace(0.0, top, 400)]))
        self.ex_grid = np.stack([self.table.lower(r) for r in self.rate_grid], axis=1)

    def __len__(self):
        return len(self.ps)

    def tau_ex(self, idx: np.ndarray, R: np.ndarray) -> np.ndarray:
        """Certified lower bound on ``tau E_x(R / tau)`` for inputs ``idx``; ``R`` has one row per index."""
        R = np.asarray(R, dtype=np.float64)
        if self.tau == 0:
            return np.zeros(R.shape)
        j = np.searchsorted(self.rate_grid, R / self.tau - 1e-15, side="left")
        padded = np.concatenate([self.ex_grid[idx], np.zeros((len(idx), 1))], axis=1)
        v = np.take_along_axis(padded, j.reshape(len(idx), -1), axis=1).reshape(R.shape)
        return np.where(np.isinf(v), INF, self.tau * v)

    def input(self, i: int) -> InputDist:
        return InputDist(self.ps[i], self.rows[i])


def _input_grid(k: int, step: float):
    """All ``(P_S, P_{X|S})`` on the grid; rows for letters with ``P_S = 0`` are fixed to uniform."""
    ps_grid = simplex_grid(k, step)
    rows = simplex_grid(k, step)
    uniform = np.full(k, 1.0 / k)
    out_ps, out_rows = [], []
    for ps in ps_grid:
        active = np.flatnonzero(ps > 0)
        for combo in itertools.product(range(len(rows)), repeat=len(active)):
            r = np.tile(uniform, (k, 1))
            r[active] = rows[list(combo)]
            out_ps.append(ps)
            out_rows.append(r)
    return np.array(out_ps), np.array(out_rows)


def _input_grid_count(k: int, step: float) -> int:
    ps_grid = simplex_grid(k, step)
    n_rows = grid_count(k, step)
    return int(sum(n_rows ** int((ps > 0).sum()) for ps in ps_grid))


def _coarser_steps(step: float):
    """``step`` and then coarser steps whose inverse divides ``1/step`` when possible."""
    m = int(round(1.0 / step))
    divisors = [d for d in range(m, 0, -1) if m % d == 0]
    others = [d for d in range(m, 0, -1) if m % d != 0]
    for d in divisors + others:
        yield 1.0 / d


# ---------------------------------------------------------------------------
# objective


def _branch_values(w: _WPoint, m: tuple[float, float, float], d_v: float, inp: _Inputs, r_points: int):
    """Best value per input over R, using certified lower bounds on E_x.

    Returns ``(value, R)`` arrays; ``-inf`` marks inputs with no feasible rate.
    """
    m1, m2, m3 = m
    a, b, iv = w.a, w.b, w.iv
    n = len(inp)
    cap = inp.cap - STRICT_MARGIN
    best = np.full(n, -INF)
    best_R = np.full(n, np.nan)

    # R = I(U;W): the rate-insensitive branch
    ok = b <= cap
    if ok.any():
        v = np.minimum.reduce([np.full(n, m1), m3 + iv + inp.tau_ex(np.arange(n), np.full(n, b)), d_v + iv + inp.tau_em])
        v = np.where(ok, v, -INF)
        better = v > best
        best, best_R = np.where(better, v, best), np.where(better, b, best_R)

    # a <= R < min(I(U;W), tau I(X;Y|S)) on a rate grid per input
    hi = np.minimum(b - STRICT_MARGIN, inp.cap - RATE_EDGE)
    ok = hi >= a
    if ok.any():
        idx = np.flatnonzero(ok)
        frac = np.linspace(0.0, 1.0, r_points)
        R = a + np.outer(hi[idx] - a, frac)
        tex = inp.tau_ex(idx, R)
        e2 = m2 + R - a
        e3 = m3 + R - a + tex
        e4 = d_v + R - a + inp.tau_em[idx, None]
        v = np.minimum(np.minimum(e2, e3), np.minimum(e4, m1))
        j = np.argmax(v, axis=1)
        v_best = v[np.arange(len(idx)), j]
        better = v_best > best[idx]
        best[idx] = np.where(better, v_best, best[idx])
        best_R[idx] = np.where(better, R[np.arange(len(idx)), j], best_R[idx])
    return best, best_R


def shtcc_objective(inst: HTInstance, P_WU, inp: InputDist, R: float) -> SHTCCTerms:
    """Evaluate E1..E4 exactly at one ``(P_{W|U}, P_SX, R)``.

    Feasibility (``I(U;W|V) <= R < tau I(X;Y|S)``) is reported, not enforced.
    At ``tau = 0`` the products ``tau E_x`` and ``tau E_m`` are taken as 0.
    """
    P_WU = np.asarray(P_WU.table if isinstance(P_WU, CondDist) else P_WU, dtype=np.float64)
    w = _WPoint(inst, P_WU)
    return _objective_at(inst, w, inp, R)


def _objective_at(inst: HTInstance, w: _WPoint, inp: InputDist, R: float) -> SHTCCTerms:
    tau = inst.tau
    d_v = inst.side_info_divergence()
    ic = float(inp.P_S @ row_terms(inp.P_X_given_S, inst.W)[0])
    em = red_alert_fixed(inp, inst.W).value
    ex = expurgated_fixed(R / tau, inp, inst.W).value if tau > 0 else 0.0
    t_ex, t_em = _scale(tau, ex), _scale(tau, em)
    m1, m2, m3 = w.m("T1"), w.m("T2"), w.m("T3")
    rate_branch = w.b > R
    if rate_branch:
        e2 = m2 + R - w.a
        e3 = m3 + R - w.a + t_ex
        e4 = d_v + R - w.a + t_em
    else:
        e2 = INF
        e3 = m3 + w.iv + t_ex
        e4 = d_v + w.iv + t_em
    feasible = bool(w.a <= R + 1e-15 and R < tau * ic)
    return SHTCCTerms(m1, e2, e3, e4, float(R), feasible, bool(rate_branch), w.a, w.b, w.iv, ic, ex, em)


# ---------------------------------------------------------------------------
# search


def _w_candidates(nu: int, nw: int, step: float):
    """Test channels on a grid, one representative per relabeling of ``W``."""
    rows = simplex_grid(nw, step)
    perms = list(itertools.permutations(range(nw)))
    seen = set()
    out = []
    for combo in itertools.product(range(len(rows)), repeat=nu):
        mat = rows[list(combo)]
        key = min(tuple(np.round(mat[:, p], 9).ravel()) for p in perms)
        if key in seen:
            continue
        seen.add(key)
        out.append(mat)
    return out


def _w_step(nu: int, nw: int, step: float) -> float:
    for s in _coarser_steps(step):
        if grid_count(nw, s) ** nu / factorial(nw) <= W_BUDGET:
            return s
    return 1.0


class _Search:
    def __init__(self, inst: HTInstance, cfg: SearchConfig, inputs: _Inputs):
        self.inst, self.cfg, self.inputs = inst, cfg, inputs
        self.d_v = inst.side_info_divergence()
        self.evaluated = 0
        self.projected = 0

    def best_over_inputs(self, w: _WPoint, floor: float, inputs: _Inputs | None = None):
        """``(value, input index, R)`` maximizing over inputs and rates, or None if it cannot beat ``floor``."""
        inputs = inputs or self.inputs
        self.evaluated += 1
        for stage in ("T3", "T1", "T2", None):
            vals, rates = _branch_values(w, w.bounds(), self.d_v, inputs, self.cfg.r_grid)
            i = int(np.argmax(vals))
            if vals[i] <= floor:
                return None
            if stage is None:
                return float(vals[i]), i, float(rates[i])
            w.m(stage)
            self.projected += 1

    def refine_w(self, P_WU: np.ndarray, value: float, i: int, R: float):
        """Move probability between ``W`` letters row by row while the value improves."""
        best = (value, P_WU, i, R)
        step = self.cfg.grid_step
        nu, nw = P_WU.shape
        for _ in range(self.cfg.refine_rounds):
            improved = True
            while improved:
                improved = False
                for u, src, dst in itertools.product(range(nu), range(nw), range(nw)):
                    if src == dst or best[1][u, src] < step - 1e-12:
                        continue
                    cand = best[1].copy()
                    cand[u, src] -= step
                    cand[u, dst] += step
                    cand = np.clip(cand, 0.0, 1.0)
                    res = self.best_over_inputs(_WPoint(self.inst, cand), best[0] + 1e-12)
                    if res is not None:
                        best = (res[0], cand, res[1], res[2])
                        improved = True
            step /= 2
        return best

    def refine_input(self, w: _WPoint, value: float, inp: InputDist):
        """Pattern search over ``P_S`` and the rows of ``P_{X|S}``."""
        best_val, best_inp = value, inp
        step = self.cfg.grid_step / 2
        k = inp.size
        for _ in range(self.cfg.refine_rounds + 2):
            improved = True
            while improved:
                improved = False
                ps_list, rows_list = [], []
                for src, dst in itertools.permutations(range(k), 2):
                    if best_inp.P_S[src] >= step:
                        ps = best_inp.P_S.copy()
                        ps[src] -= step
                        ps[dst] += step
                        ps_list.append(np.clip(ps, 0, 1))
                        rows_list.append(best_inp.P_X_given_S.copy())
                    for s in range(k):
                        if best_inp.P_X_given_S[s, src] >= step:
                            r = best_inp.P_X_given_S.copy()
                            r[s, src] -= step
                            r[s, dst] += step
                            ps_list.append(best_inp.P_S.copy())
                            rows_list.append(np.clip(r, 0, 1))
                if not ps_list:
                    break
                batch = _Inputs(np.array(ps_list), np.array(rows_list), self.inst.W, self.inst.tau)
                res = self.best_over_inputs(w, best_val + 1e-12, batch)
                if res is not None:
                    best_val, best_inp = res[0], batch.input(res[1])
                    improved = True
            step /= 2
        return best_val, best_inp


def _polish_rate(inst: HTInstance, w: _WPoint, inp: InputDist) -> SHTCCTerms | None:
    """Exact objective at the best rate for fixed ``(P_{W|U}, P_SX)``."""
    tau = inst.tau
    ic = float(inp.P_S @ row_terms(inp.P_X_given_S, inst.W)[0])
    cap = tau * ic
    cands = []
    if w.b <= cap - STRICT_MARGIN:
        cands.append(_objective_at(inst, w, inp, w.b))
    hi = min(w.b - STRICT_MARGIN, cap - RATE_EDGE)
    if hi >= w.a:
        # min(E2, E4) - E3 increases in R; bisect for the crossing
        def gap(R):
            t = _objective_at(inst, w, inp, R)
            return min(t.E2, t.E4) - t.E3, t

        lo_t = _objective_at(inst, w, inp, w.a)
        hi_t = _objective_at(inst, w, inp, hi)
        cands += [lo_t, hi_t]
        lo, up = w.a, hi
        g_lo, g_hi = gap(lo)[0], gap(up)[0]
        if g_lo < 0 < g_hi:
            for _ in range(60):
                mid = 0.5 * (lo + up)
                g, t = gap(mid)
                cands.append(t)
                if g < 0:
                    lo = mid
                else:
                    up = mid
                if up - lo < 1e-12:
                    break
    cands = [c for c in cands if c.feasible]
    if not cands:
        return None
    return max(cands, key=lambda t: t.value)


def shtcc_exponent(inst: HTInstance, cfg: SearchConfig | None = None) -> ExponentReport:
    """Search lower bound on the SHTCC exponent.

    Exhaustive over a grid of test channels ``P_{W|U}`` (one per relabeling
    of ``W``) and of inputs ``P_SX``, with rates on a per-point grid, then
    coordinate refinement around the best points and an exact re-evaluation.
    The reported value is the exact objective at a feasible point.
    """
    cfg = cfg or SearchConfig()
    nu, nw, k = inst.nu, cfg.w_size(inst), inst.nx
    diagnostics: dict = {}
    if inst.tau == 0:
        return ExponentReport("shtcc", None, "search lower bound",
                              diagnostics={"reason": "no feasible (W,SX,R): rate must be below tau I(X;Y|S) = 0"})

    s_step = next(s for s in _coarser_steps(cfg.grid_step) if _input_grid_count(k, s) <= MAX_CHANNEL_CANDIDATES)
    ps, rows = _input_grid(k, s_step)
    inputs = _Inputs(ps, rows, inst.W, inst.tau)
    diagnostics.update(input_grid_step=s_step, input_candidates=len(inputs))
    if not np.any(inputs.cap > STRICT_MARGIN):
        return ExponentReport("shtcc", None, "search lower bound",
                              diagnostics={**diagnostics, "reason": "no feasible (W,SX,R): the channel has zero capacity"})

    w_step = _w_step(nu, nw, cfg.grid_step)
    cands = _w_candidates(nu, nw, w_step)
    search = _Search(inst, cfg, inputs)
    points = [_WPoint(inst, c) for c in cands]
    # visit the most promising test channels first so pruning bites early
    prelim = [np.max(_branch_values(p, p.bounds(), search.d_v, inputs, 2)[0]) for p in points]
    order = np.lexsort((np.arange(len(points)), -np.asarray(prelim)))
    feasible_pairs = sum(int(np.sum(inputs.cap - STRICT_MARGIN >= p.a)) for p in points)
    diagnostics.update(w_grid_step=w_step, w_candidates=len(points),
                       feasible_fraction=feasible_pairs / (len(points) * len(inputs)))

    top: list[tuple[float, int, int, float]] = []
    for idx in order:
        if not np.isfinite(prelim[idx]):
            continue
        floor = top[-1][0] if len(top) >= TOP_K else -INF
        res = search.best_over_inputs(points[idx], floor)
        if res is not None:
            top.append((res[0], int(idx), res[1], res[2]))
            top.sort(key=lambda t: (-t[0], t[1]))
            top = top[:TOP_K]
    if not top:
        return ExponentReport("shtcc", None, "search lower bound",
                              diagnostics={**diagnostics, "reason": "no feasible (W,SX,R) on the grid"})

    best_terms, best_w, best_inp = None, None, None
    for value, idx, i, R in top:
        v, P_WU, i2, _ = search.refine_w(points[idx].P_WU, value, i, R)
        w = _WPoint(inst, P_WU)
        _, inp = search.refine_input(w, v, inputs.input(i2))
        terms = _polish_rate(inst, w, inp)
        if terms is not None and (best_terms is None or terms.value > best_terms.value + 1e-15):
            best_terms, best_w, best_inp = terms, w, inp
    diagnostics.update(evaluations=search.evaluated, projections=search.projected)
    if best_terms is None:
        return ExponentReport("shtcc", None, "search lower bound",
                              diagnostics={**diagnostics, "reason": "no feasible point survived exact evaluation"})
    return ExponentReport(
        "shtcc", best_terms.value, "search lower bound",
        terms=best_terms.as_dict(),
        params={
            "P_W_given_U": best_w.P_WU, "P_S": best_inp.P_S, "P_X_given_S": best_inp.P_X_given_S,
            "R_nats": best_terms.R, "rate_branch": best_terms.rate_branch,
            "I_UW_given_V": best_terms.I_UW_given_V, "I_UW": best_terms.I_UW, "I_VW": best_terms.I_VW,
            "I_XY_given_S": best_terms.I_XY_given_S, "E_x": best_terms.E_x, "E_m": best_terms.E_m,
        },
        diagnostics=diagnostics,
    )
