"""Binary example where joint coding strictly beats separation.

``U`` is uniform, ``V`` is ``U`` through a BSC(p0) under the null and a
BSC(p1) under the alternative, and the channel is a BSC(q). Sending ``U``
uncoded gives ``D_b(q*p0 || q*p1)``, while every separation-based scheme is
capped by ``max_r f'(r)`` with ``f'(r) = 1 - h_b(r*p0) + E_x(1 - h_b(r))``
(bits, uniform channel input).
"""

from __future__ import annotations

import numpy as np

from ..channel import InputDist, expurgated_fixed
from ..info import LN2, binary_convolve, binary_entropy, binary_kl
from .instance import HTInstance

Q_CROSSOVER = 0.2
P0 = 0.8
P1 = 0.25


def bsc(p: float) -> np.ndarray:
    return np.array([[1.0 - p, p], [p, 1.0 - p]])


def example1_instance(q: float = Q_CROSSOVER, p0: float = P0, p1: float = P1) -> HTInstance:
    """Uniform ``U``; ``V|U`` is BSC(p0) vs BSC(p1); channel BSC(q); tau = 1."""
    return HTInstance.from_arrays(0.5 * bsc(p0), 0.5 * bsc(p1), bsc(q), tau=1.0)


def uncoded_bits(q: float = Q_CROSSOVER, p0: float = P0, p1: float = P1) -> float:
    """``D_b(q*p0 || q*p1)`` in bits."""
    return float(binary_kl(binary_convolve(q, p0), binary_convolve(q, p1)))


def branch2_bound_bits(q: float = Q_CROSSOVER, p0: float = P0) -> float:
    """``1 - h_b(q*p0)`` in bits: the cap on separation when the binning term is inactive."""
    return 1.0 - float(binary_entropy(binary_convolve(q, p0)))


def f_prime(r, q: float = Q_CROSSOVER, p0: float = P0) -> np.ndarray:
    """``1 - h_b(r*p0) + E_x(1 - h_b(r))`` in bits for the uniform-input BSC(q)."""
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    inp = InputDist.single([0.5, 0.5])
    channel = bsc(q)
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        rate_bits = 1.0 - float(binary_entropy(ri))
        ex = expurgated_fixed(max(rate_bits, 0.0) * LN2, inp, channel).value / LN2
        out[i] = 1.0 - float(binary_entropy(binary_convolve(ri, p0))) + ex
    return out


def fig2_curve(q: float = Q_CROSSOVER, p0: float = P0, step: float = 0.005):
    """``(r, f'(r))`` pairs for ``r`` from ``q`` to 0.5 in increments of ``step``."""
    n = int(round((0.5 - q) / step))
    r = np.round(q + step * np.arange(n + 1), 12)
    return list(zip(r.tolist(), f_prime(r, q, p0).tolist()))


def example1_report(cfg=None, search: bool = True) -> dict:
    """Landmark values in bits with pass/fail checks against their tolerances.

    ``search=False`` skips the two sup-type searches (SHTCC and JHTCC).
    """
    from .jhtcc import jhtcc_exponent
    from .shtcc import shtcc_exponent
    from .baselines import uncoded_exponent

    inst = example1_instance()
    curve = fig2_curve()
    r_star, ceiling = max(curve, key=lambda t: t[1])
    unc = uncoded_exponent(inst) / LN2
    b2 = branch2_bound_bits()
    landmarks = {
        "uncoded_bits": unc,
        "fig2_max_bits": ceiling,
        "fig2_argmax_r": r_star,
        "branch2_bound_bits": b2,
    }
    checks = {
        "uncoded_bits": abs(unc - 0.3244) <= 1e-3,
        "fig2_max_bits": abs(ceiling - 0.161) <= 1e-3 and r_star == 0.5,
        "branch2_bound_bits": abs(b2 - 0.0956) <= 1e-3,
    }
    if search:
        sh = shtcc_exponent(inst, cfg)
        jh = jhtcc_exponent(inst, cfg)
        landmarks["shtcc_bits"] = sh.value_bits
        landmarks["jhtcc_bits"] = jh.value_bits
        checks["shtcc_bits"] = sh.feasible and 0.08 <= sh.value_bits <= 0.161 + 2e-3
        checks["jhtcc_bits"] = jh.feasible and jh.value_bits >= 0.3244 - 1e-9 and jh.value_bits >= sh.value_bits
    return {"landmarks": landmarks, "checks": checks, "all_pass": all(checks.values())}
