"""Exact Neyman-Pearson errors at finite blocklength by LLR convolution.

The per-letter log-likelihood ratio ``l = ln P/Q`` is put on a lattice of
width ``h`` twice: rounded down (``k_lo``) and up (``k_hi``). Over ``n``
letters the sums bracket the true LLR.

* The reported test accepts when ``sum k_lo >= k*``, with ``k*`` the largest
  threshold keeping ``alpha <= eps``. Its type-II error ``beta_hi`` is an
  exact Q-probability. It is computed under the law ``Q e^{k_lo h}``, which
  sits near P, so tiny values keep full relative precision.
* ``beta_lo`` lower-bounds every test with ``alpha <= eps``. Since
  ``Q(A) = E_P[1_A e^{-L}] >= E_P[1_A e^{-h sum k_hi}]``, minimizing the
  right side over acceptance functions is a fractional knapsack on the
  P-law of ``sum k_hi``.

Letters with ``P > 0 = Q`` carry ``+inf`` LLR (always accepted, no type-II
mass). Letters with ``P = 0 < Q`` carry ``-inf`` (always rejected).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.special import ndtri

from .errors import DimensionError, GuardError, ValidationError
from .exponents.instance import HTInstance
from .prob import JointDist

MAX_BINS = 10_000_000
DIRECT_LIMIT = 4096
DEFAULT_BIN_WIDTH = 1e-4
SHARD = 2_000
MIN_TRIALS = 1_000
ALPHA_ROUNDING = 1e-12


@dataclass(frozen=True)
class PairSource:
    """Per-letter laws of the detector's observables under each hypothesis (flattened)."""

    P: np.ndarray
    Q: np.ndarray
    label: str = ""

    def __post_init__(self):
        P = np.asarray(self.P.probs if isinstance(self.P, JointDist) else self.P, dtype=np.float64).ravel()
        Q = np.asarray(self.Q.probs if isinstance(self.Q, JointDist) else self.Q, dtype=np.float64).ravel()
        if P.shape != Q.shape:
            raise DimensionError(f"P has {P.size} cells and Q has {Q.size}")
        for name, a in (("P", P), ("Q", Q)):
            if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-9:
                raise ValidationError(f"{name} is not a probability vector")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)

    @classmethod
    def centralized(cls, inst: HTInstance) -> "PairSource":
        """The detector sees ``(U, V)`` directly."""
        return cls(inst.P_UV.probs, inst.Q_UV.probs, "centralized")

    @classmethod
    def uncoded(cls, inst: HTInstance) -> "PairSource":
        """The detector sees ``(V, Y)`` with ``X = U`` sent letter by letter."""
        if inst.nu != inst.nx:
            raise DimensionError(f"uncoded transmission needs |U| = |X|, got {inst.nu} and {inst.nx}")
        P = np.einsum("uv,uy->vy", inst.P_UV.probs, inst.W)
        Q = np.einsum("uv,uy->vy", inst.Q_UV.probs, inst.W)
        return cls(P, Q, "uncoded")

    def divergence(self) -> float:
        from .info import kl_array
        return kl_array(self.P, self.Q)


@dataclass(frozen=True)
class NPResult:
    n: int
    eps: float
    bin_width: float
    alpha: float
    beta_lo: float
    beta_hi: float
    threshold: float
    bins: int

    @property
    def beta(self) -> float:
        return self.beta_hi


@dataclass(frozen=True)
class ErrorCurve:
    n: list
    alpha: list
    beta_lo: list
    beta_hi: list
    slope: float
    intercept: float
    residuals: list
    eps: float
    bin_width: float

    def per_n_slopes(self) -> list:
        """``-(1/n) ln beta_hi`` for each ``n``."""
        return [(-math.log(b) / n if b > 0 else math.inf) for n, b in zip(self.n, self.beta_hi)]


class _Lattice:
    def __init__(self, src: PairSource, h: float):
        if not h > 0:
            raise ValidationError(f"bin_width must be positive, got {h}")
        P, Q = src.P, src.Q
        fin = (P > 0) & (Q > 0)
        self.p_inf = float(P[(P > 0) & (Q == 0)].sum())
        self.p_fin = float(P[fin].sum())
        llr = np.log(P[fin]) - np.log(Q[fin])
        # a tiny guard keeps exact lattice points (such as 0) on the lattice
        k_lo = np.floor(llr / h + 1e-9).astype(np.int64)
        k_hi = np.ceil(llr / h - 1e-9).astype(np.int64)
        self.h = h
        self.P, self.Q = P[fin], Q[fin]
        self.llr, self.k_lo, self.k_hi = llr, k_lo, k_hi
        self.kmin = int(min(k_lo.min(), k_hi.min())) if fin.any() else 0
        self.kmax = int(max(k_lo.max(), k_hi.max())) if fin.any() else 0
        self.span = self.kmax - self.kmin + 1
        # Q tilted by the rounded-down LLR; exact for the Q-probabilities of k_lo sums
        tilt = self.Q * np.exp(k_lo * h)
        self.log_m = float(np.log(tilt.sum())) if fin.any() else 0.0
        self.q_tilt = tilt / tilt.sum() if fin.any() else tilt

    def pmf(self, weights: np.ndarray, ks: np.ndarray) -> np.ndarray:
        out = np.zeros(self.span)
        np.add.at(out, ks - self.kmin, weights)
        return out


def _power(pmf: np.ndarray, n: int) -> np.ndarray:
    """n-fold self-convolution of a nonnegative vector (length ``n (len - 1) + 1``)."""
    size = n * (len(pmf) - 1) + 1
    if size >= MAX_BINS:
        raise GuardError(f"{size} lattice bins needed (limit {MAX_BINS}); increase bin_width or reduce n")
    if size <= DIRECT_LIMIT or n <= 2:
        out = np.array([1.0])
        base, k = pmf, n
        while k:
            if k & 1:
                out = np.convolve(out, base)
            k >>= 1
            if k:
                base = np.convolve(base, base)
        return out
    N = sfft.next_fast_len(size, real=True)
    spec = sfft.rfft(pmf, N)
    out = sfft.irfft(spec ** n, N)[:size]
    return np.maximum(out, 0.0)


def exact_np_errors(src: PairSource, n: int, eps: float, bin_width: float = DEFAULT_BIN_WIDTH) -> NPResult:
    """Type-I and certified type-II errors of the deterministic LLR threshold test."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    n = int(n)
    lat = _Lattice(src, bin_width)
    h = bin_width
    fin_mass = lat.p_fin ** n
    if lat.P.size == 0:
        # every sequence is either certainly H0 (+inf) or certainly H1 (-inf)
        return NPResult(n, eps, h, 0.0, 0.0, 0.0, math.inf, 0)
    # P-laws of the rounded sums (sub-probabilities of mass p_fin^n)
    lo_pmf = _power(lat.pmf(lat.P, lat.k_lo), n)
    hi_pmf = _power(lat.pmf(lat.P, lat.k_hi), n)
    base = n * lat.kmin
    ks = base + np.arange(len(lo_pmf))

    # largest threshold with P(sum k_lo < k*) <= eps, up to summation rounding
    below = np.concatenate([[0.0], np.cumsum(lo_pmf)])
    j = int(np.searchsorted(below, eps + ALPHA_ROUNDING, side="right") - 1)
    j = min(j, len(lo_pmf))
    alpha = float(below[j])
    k_star = base + j

    # beta_hi = Q(sum k_lo >= k*) through the tilted law
    tilt = _power(lat.pmf(lat.q_tilt, lat.k_lo), n)
    tilt = tilt / max(tilt.sum(), 1e-300)
    with np.errstate(divide="ignore"):
        log_terms = np.log(tilt[j:]) + n * lat.log_m - ks[j:] * h
    beta_hi = float(np.exp(log_terms).sum()) if j < len(tilt) else 0.0

    # beta_lo: accept the largest sum k_hi values first, fractional at the edge
    need = (1.0 - eps) - (1.0 - fin_mass)
    if need <= 0:
        beta_lo = 0.0
    else:
        order = np.arange(len(hi_pmf))[::-1]
        mass = hi_pmf[order]
        cum = np.cumsum(mass)
        stop = int(np.searchsorted(cum, need, side="left"))
        stop = min(stop, len(mass) - 1)
        take = mass[: stop + 1].copy()
        take[-1] -= cum[stop] - need if cum[stop] > need else 0.0
        weights = np.exp(-(ks[order[: stop + 1]]) * h)
        beta_lo = float(np.sum(np.maximum(take, 0.0) * weights))
    beta_lo = min(beta_lo, beta_hi)
    return NPResult(n, eps, h, alpha, beta_lo, beta_hi, k_star * h, len(lo_pmf))


def stein_slope(src: PairSource, n_list, eps: float, bin_width: float = DEFAULT_BIN_WIDTH,
                threads: int = 1) -> ErrorCurve:
    """Least-squares slope of ``-ln beta_hi`` against ``n``."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be strictly increasing")
    if len(n_list) < 2:
        raise ValidationError("at least two blocklengths are needed for a slope")

    def run(n):
        return exact_np_errors(src, n, eps, bin_width)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, n_list))
    else:
        results = [run(n) for n in n_list]
    beta_hi = np.array([r.beta_hi for r in results])
    if np.any(beta_hi <= 0):
        slope, intercept, resid = math.inf, math.nan, [math.nan] * len(n_list)
    else:
        y = -np.log(beta_hi)
        x = np.array(n_list, dtype=np.float64)
        slope, intercept = np.polyfit(x, y, 1)
        resid = (y - (slope * x + intercept)).tolist()
    return ErrorCurve(
        n_list, [r.alpha for r in results], [r.beta_lo for r in results], beta_hi.tolist(),
        float(slope), float(intercept), resid, eps, bin_width,
    )


def llr_std(src: PairSource) -> float:
    """Standard deviation of the per-letter LLR under P (square root of the dispersion)."""
    P, Q = src.P, src.Q
    m = (P > 0) & (Q > 0)
    llr = np.log(P[m]) - np.log(Q[m])
    d = float(np.sum(P[m] * llr))
    return float(np.sqrt(max(np.sum(P[m] * llr ** 2) - d ** 2, 0.0)))


def normal_approx_neg_log_beta(src: PairSource, n: int, eps: float) -> float:
    """Estimate ``n D - sqrt(n V) Phi^{-1}(1 - eps) + (1/2) ln n`` of ``-ln beta``."""
    return n * src.divergence() - math.sqrt(n) * llr_std(src) * float(ndtri(1.0 - eps)) + 0.5 * math.log(n)


def wilson(k: int, m: int, z: float = 1.959963984540054):
    """Wilson score interval ``(center, radius)`` for ``k`` successes out of ``m``."""
    p = k / m
    den = 1 + z * z / m
    center = (p + z * z / (2 * m)) / den
    radius = z * math.sqrt(p * (1 - p) / m + z * z / (4 * m * m)) / den
    return center, radius


@dataclass(frozen=True)
class MCResult:
    n: int
    trials: int
    seed: int
    alpha_hat: float | None
    beta_hat: float | None
    alpha_interval: tuple | None
    beta_interval: tuple | None
    skipped: bool = False
    reason: str = ""
    exact: NPResult | None = field(default=None, compare=False)


def _sample_sums(rng, probs, ks, n, count, inf_prob):
    """Sums of ``k`` over ``n`` letters; ``+inf`` when a letter from the infinite bucket appears."""
    cells = np.concatenate([probs, [inf_prob]])
    cells = cells / cells.sum()
    vals = np.concatenate([ks.astype(np.float64), [np.inf]])
    idx = rng.choice(len(cells), size=(count, n), p=cells)
    return vals[idx].sum(axis=1)


def mc_np_errors(src: PairSource, n: int, eps: float, trials: int, seed: int,
                 bin_width: float = DEFAULT_BIN_WIDTH, threads: int = 1) -> MCResult:
    """Monte Carlo errors of the same deterministic test, with Wilson intervals.

    Draws are made in shards of fixed size, each with its own Philox stream
    spawned from ``seed``, so results do not depend on ``threads``.
    """
    if trials < MIN_TRIALS:
        raise ValidationError(f"trials must be at least {MIN_TRIALS}, got {trials}")
    exact = exact_np_errors(src, n, eps, bin_width)
    if exact.beta_hi < 10.0 / trials:
        return MCResult(n, trials, seed, None, None, None, None, True,
                        f"exact beta_hi = {exact.beta_hi:.3g} < 10/trials; too few type-II hits expected", exact)
    lat = _Lattice(src, bin_width)
    k_star = round(exact.threshold / bin_width)
    # P = 0 < Q letters carry -inf; under Q they are always rejected
    q_neg = float(src.Q[(src.P == 0) & (src.Q > 0)].sum())
    sizes = [min(SHARD, trials - s) for s in range(0, trials, SHARD)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def shard(i):
        rng = np.random.Generator(np.random.Philox(children[i]))
        sp = _sample_sums(rng, lat.P, lat.k_lo, n, sizes[i], lat.p_inf)
        q_cells = np.concatenate([lat.Q, [q_neg]])
        q_cells = q_cells / q_cells.sum()
        q_vals = np.concatenate([lat.k_lo.astype(np.float64), [-np.inf]])
        sq = q_vals[rng.choice(len(q_cells), size=(sizes[i], n), p=q_cells)].sum(axis=1)
        return int(np.sum(sp < k_star)), int(np.sum(sq >= k_star))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(shard, range(len(sizes))))
    else:
        counts = [shard(i) for i in range(len(sizes))]
    rej = sum(c[0] for c in counts)
    acc = sum(c[1] for c in counts)
    return MCResult(n, trials, seed, rej / trials, acc / trials, wilson(rej, trials), wilson(acc, trials),
                    exact=exact)
