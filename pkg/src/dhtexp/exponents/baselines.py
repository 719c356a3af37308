"""Closed-form and small-search exponents: uncoded, one-bit, zero capacity, single-letter."""

from __future__ import annotations

import itertools

import numpy as np

from ..channel import as_matrix, max_pair_divergence, rows_identical
from ..errors import ConfigurationError, DimensionError, PreconditionError
from ..info import kl_array
from ..prob import simplex_grid
from ..projection import MarginalConstraint, min_kl
from .instance import ExponentReport, HTInstance

MAX_K1_GRID = 200_000


def _vy_laws(inst: HTInstance, x_given_u: np.ndarray):
    """``P_VY`` and ``Q_VY`` when ``X ~ x_given_u[U]`` is sent over the channel."""
    uy = x_given_u @ inst.W
    P = np.einsum("uv,uy->vy", inst.P_UV.probs, uy)
    Q = np.einsum("uv,uy->vy", inst.Q_UV.probs, uy)
    return P, Q


def uncoded_exponent(inst: HTInstance) -> float:
    """``D(P_VY || Q_VY)`` in nats when ``X = U`` is sent letter by letter."""
    if inst.nu != inst.nx:
        raise DimensionError(f"uncoded transmission needs |U| = |X|, got {inst.nu} and {inst.nx}")
    P, Q = _vy_laws(inst, np.eye(inst.nu))
    return kl_array(P, Q)


def beta0(inst: HTInstance):
    """``min D(P~_UV || Q_UV)`` over joints with marginals ``P_U`` and ``P_V``."""
    return min_kl(
        inst.Q_UV,
        [MarginalConstraint(inst.P_UV.marginal("U")), MarginalConstraint(inst.P_UV.marginal("V"))],
    )


def onebit_exponent(inst: HTInstance) -> ExponentReport:
    """Exponent of the one-bit scheme.

    ``D(P_V || Q_V)`` at ``tau = 0``; otherwise
    ``min(beta_0, tau E_c + D(P_V || Q_V))`` where ``E_c`` is the largest
    divergence between two channel rows.
    """
    d_v = inst.side_info_divergence()
    if inst.tau == 0:
        return ExponentReport("onebit", d_v, "closed form", terms={"D_V": d_v})
    b0 = beta0(inst)
    ec, pair = max_pair_divergence(inst.W)
    second = inst.tau * ec + d_v
    value = min(b0.value, second)
    return ExponentReport(
        "onebit", value, "closed form",
        terms={"beta0": b0.value, "tau_Ec_plus_D_V": second, "D_V": d_v, "E_c": ec},
        params={"pair": list(pair)},
        diagnostics={"beta0_converged": b0.converged},
    )


def zero_capacity_exponent(inst: HTInstance) -> ExponentReport:
    """Optimal exponent ``D(P_V || Q_V)`` for a channel whose rows are all equal."""
    if not rows_identical(inst.W, atol=1e-12):
        w = as_matrix(inst.W)
        bad = np.argwhere(np.abs(w - w[0]) > 1e-12)[0]
        raise PreconditionError(
            f"channel rows differ (row {int(bad[0])}, column {int(bad[1])}): capacity is not zero"
        )
    d_v = inst.side_info_divergence()
    return ExponentReport("zerocap", d_v, "exact", terms={"D_V": d_v})


def multiletter_k1(inst: HTInstance, grid_step: float = 0.05) -> ExponentReport:
    """``max D(P_VY || Q_VY)`` over single-letter maps ``P_{X|U}``.

    The divergence is jointly convex and both laws are linear in ``P_{X|U}``,
    so the maximum sits at a deterministic map; all ``|X|^|U|`` of them are
    enumerated, together with the simplex grid when it is small enough.
    """
    if inst.tau != 1:
        raise PreconditionError(f"the single-letter bound needs tau = 1, got {inst.tau}")
    nu, nx = inst.nu, inst.nx
    best, arg = -1.0, None
    eye = np.eye(nx)
    candidates = [eye[list(m)] for m in itertools.product(range(nx), repeat=nu)]
    rows = simplex_grid(nx, grid_step)
    n_grid = len(rows) ** nu
    if n_grid <= MAX_K1_GRID:
        candidates += [rows[list(c)] for c in itertools.product(range(len(rows)), repeat=nu)]
    elif grid_step < 0.5:
        raise ConfigurationError(f"k1 grid has {n_grid} points (limit {MAX_K1_GRID}); raise grid_step")
    if nu == nx:
        candidates.insert(0, np.eye(nu))
    for m in candidates:
        P, Q = _vy_laws(inst, m)
        v = kl_array(P, Q)
        if v > best + 1e-15:
            best, arg = v, m
    return ExponentReport(
        "k1", best, "search lower bound",
        terms={"D_VY": best}, params={"P_X_given_U": arg},
        diagnostics={"candidates": len(candidates)},
    )
