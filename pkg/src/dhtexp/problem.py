"""Problem files: JSON with row-major matrices and explicit alphabet sizes."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DhtError, ValidationError
from .exponents.instance import HTInstance

SCHEMA_VERSION = "1"
_SIZE_KEYS = ("U", "V", "X", "Y")


def _matrix(doc: dict, key: str, shape: tuple[int, int]) -> np.ndarray:
    if key not in doc:
        raise ValidationError(f"problem file is missing {key!r}")
    try:
        arr = np.array(doc[key], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{key} is not a numeric matrix: {exc}") from None
    if arr.shape != shape:
        raise ValidationError(f"{key} has shape {arr.shape}, expected {shape} from the declared alphabet sizes")
    bad = np.argwhere(~np.isfinite(arr) | (arr < 0))
    if len(bad):
        i, j = (int(x) for x in bad[0])
        raise ValidationError(f"{key}[{i}][{j}] = {arr[i, j]!r} is not a nonnegative number")
    return arr


def instance_from_dict(doc: dict) -> HTInstance:
    """Validate a parsed problem document and build the instance."""
    if not isinstance(doc, dict):
        raise ValidationError("problem file must hold a JSON object")
    version = doc.get("schema_version")
    if str(version) != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION!r}")
    sizes = doc.get("alphabet_sizes")
    if not isinstance(sizes, dict) or any(k not in sizes for k in _SIZE_KEYS):
        raise ValidationError(f"alphabet_sizes must give {', '.join(_SIZE_KEYS)}")
    try:
        nu, nv, nx, ny = (int(sizes[k]) for k in _SIZE_KEYS)
    except (TypeError, ValueError):
        raise ValidationError("alphabet sizes must be integers") from None
    if min(nu, nv, nx, ny) < 1:
        raise ValidationError("alphabet sizes must be positive")
    P = _matrix(doc, "P_UV", (nu, nv))
    Q = _matrix(doc, "Q_UV", (nu, nv))
    W = _matrix(doc, "channel", (nx, ny))
    for key, arr in (("P_UV", P), ("Q_UV", Q)):
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValidationError(f"{key} sums to {arr.sum():.12g}, not 1")
    row_sums = W.sum(axis=1)
    off = np.flatnonzero(np.abs(row_sums - 1.0) > 1e-9)
    if len(off):
        raise ValidationError(f"channel row {int(off[0])} sums to {row_sums[off[0]]:.12g}, not 1")
    tau = doc.get("tau", 1.0)
    if not isinstance(tau, (int, float)) or isinstance(tau, bool):
        raise ValidationError(f"tau must be a number, got {tau!r}")
    vf = doc.get("v_factorization")
    if vf is not None:
        if isinstance(vf, dict):
            vf = (vf.get("E"), vf.get("Z"))
        try:
            vf = tuple(int(x) for x in vf)
        except (TypeError, ValueError):
            raise ValidationError("v_factorization must give integer sizes E and Z") from None
        if len(vf) != 2:
            raise ValidationError("v_factorization must give exactly two sizes")
    try:
        return HTInstance.from_arrays(P, Q, W, tau=float(tau), v_factorization=vf)
    except DhtError:
        raise
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def load_problem(path) -> HTInstance:
    """Read and validate a problem file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read problem file {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None
    return instance_from_dict(doc)


def builtin_problem_text(name: str = "example1") -> str:
    return resources.files("dhtexp").joinpath("data", f"{name}.json").read_text(encoding="utf-8")


def builtin_problem(name: str = "example1") -> HTInstance:
    return instance_from_dict(json.loads(builtin_problem_text(name)))


def instance_to_dict(inst: HTInstance) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "alphabet_sizes": {"U": inst.nu, "V": inst.nv, "X": inst.nx, "Y": inst.ny},
        "P_UV": inst.P_UV.probs.tolist(),
        "Q_UV": inst.Q_UV.probs.tolist(),
        "channel": inst.W.tolist(),
        "tau": inst.tau,
    }
    if inst.v_factorization is not None:
        doc["v_factorization"] = {"E": inst.v_factorization[0], "Z": inst.v_factorization[1]}
    return doc
