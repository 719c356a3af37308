"""Problem instance, search configuration and report types."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import as_matrix
from ..errors import DimensionError, ValidationError
from ..info import LN2, kl_div
from ..prob import Alphabet, CondDist, JointDist, marginalize


@dataclass(frozen=True)
class HTInstance:
    """Distributed test of ``P_UV`` against ``Q_UV`` over the channel ``P_{Y|X}``.

    Parameters
    ----------
    P_UV, Q_UV : JointDist
        Laws of (observer data, detector side information) under the two
        hypotheses, with axes named ``U`` and ``V``.
    channel : CondDist
        ``P_{Y|X}``, axes ``X -> Y``.
    tau : float
        Channel uses per source sample.
    v_factorization : tuple of int, optional
        ``(|E|, |Z|)`` when ``V = (E, Z)`` with letter ``v = e |Z| + z``.
    """

    P_UV: JointDist
    Q_UV: JointDist
    channel: CondDist
    tau: float = 1.0
    v_factorization: tuple[int, int] | None = None

    def __post_init__(self):
        for name, j in (("P_UV", self.P_UV), ("Q_UV", self.Q_UV)):
            if j.names != ("U", "V"):
                raise DimensionError(f"{name} must have axes ('U', 'V'), got {j.names}")
        if self.P_UV.shape != self.Q_UV.shape:
            raise DimensionError(f"P_UV {self.P_UV.shape} and Q_UV {self.Q_UV.shape} differ in shape")
        if not isinstance(self.channel, CondDist) or len(self.channel.given) != 1:
            raise DimensionError("channel must be a CondDist with one input axis")
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValidationError(f"tau must be a finite nonnegative number, got {self.tau}")
        if self.v_factorization is not None:
            e, z = self.v_factorization
            if e * z != self.P_UV.shape[1]:
                raise DimensionError(f"|E| * |Z| = {e * z} does not equal |V| = {self.P_UV.shape[1]}")

    @classmethod
    def from_arrays(cls, P_UV, Q_UV, channel, tau: float = 1.0, v_factorization=None) -> "HTInstance":
        P_UV = np.asarray(P_UV, dtype=np.float64)
        Q_UV = np.asarray(Q_UV, dtype=np.float64)
        w = as_matrix(channel)
        axes = [Alphabet("U", P_UV.shape[0]), Alphabet("V", P_UV.shape[1])]
        ch = CondDist((Alphabet("X", w.shape[0]),), Alphabet("Y", w.shape[1]), w)
        vf = tuple(v_factorization) if v_factorization is not None else None
        return cls(JointDist(axes, P_UV), JointDist(axes, Q_UV), ch, float(tau), vf)

    def with_tau(self, tau: float) -> "HTInstance":
        return HTInstance(self.P_UV, self.Q_UV, self.channel, float(tau), self.v_factorization)

    @property
    def W(self) -> np.ndarray:
        return np.asarray(self.channel.table)

    @property
    def nu(self) -> int:
        return self.P_UV.shape[0]

    @property
    def nv(self) -> int:
        return self.P_UV.shape[1]

    @property
    def nx(self) -> int:
        return self.W.shape[0]

    @property
    def ny(self) -> int:
        return self.W.shape[1]

    def side_info_divergence(self) -> float:
        """``D(P_V || Q_V)`` in nats."""
        return kl_div(marginalize(self.P_UV, "V"), marginalize(self.Q_UV, "V"))


@dataclass(frozen=True)
class SearchConfig:
    """Grid-search budget for the sup-type exponents.

    ``w_card`` defaults to ``|U| + 1`` and ``s_card`` to ``|X|`` when left as None.
    """

    w_card: int | None = None
    grid_step: float = 0.05
    r_grid: int = 40
    refine_rounds: int = 2
    s_card: int | None = None

    def __post_init__(self):
        if not 0 < self.grid_step <= 0.5:
            raise ValidationError(f"grid_step must lie in (0, 0.5], got {self.grid_step}")
        if self.w_card is not None and self.w_card < 1:
            raise ValidationError("w_card must be at least 1")
        if self.r_grid < 2:
            raise ValidationError("r_grid must be at least 2")
        if self.refine_rounds < 0:
            raise ValidationError("refine_rounds must be nonnegative")

    def w_size(self, inst: HTInstance) -> int:
        return self.w_card if self.w_card is not None else inst.nu + 1

    def s_size(self, inst: HTInstance) -> int:
        return self.s_card if self.s_card is not None else inst.nx


@dataclass(frozen=True)
class ExponentReport:
    """An exponent in nats, how it was obtained, and its per-term breakdown.

    ``tag`` is ``"exact"`` for proven-optimal values, ``"closed form"`` for
    single achievable evaluations, and ``"search lower bound"`` for sup-type
    searches, whose value is always an evaluated achievable point.
    ``value_nats`` is None when no feasible point exists.
    """

    scheme: str
    value_nats: float | None
    tag: str
    terms: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.value_nats is not None

    @property
    def value_bits(self) -> float | None:
        return None if self.value_nats is None else self.value_nats / LN2

    def to_dict(self, units: str = "bits") -> dict:
        scale = 1.0 / LN2 if units == "bits" else 1.0
        return {
            "scheme": self.scheme,
            "tag": self.tag,
            "feasible": self.feasible,
            "value_nats": _jsonable(self.value_nats),
            "value_bits": _jsonable(self.value_bits),
            "units": units,
            "value": _jsonable(None if self.value_nats is None else self.value_nats * scale),
            "terms": {k: _jsonable(v * scale if isinstance(v, float) else v) for k, v in self.terms.items()},
            "params": _jsonable(self.params),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(x):
    """Convert numpy values and infinities into plain JSON types."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        if np.isnan(x):
            return "nan"
        return float(np.round(x, 12))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x
