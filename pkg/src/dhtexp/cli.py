"""Command-line interface: ``dhtexp exponent|repro|simulate|channel``.

Reports are JSON with sorted keys; curves are CSV. Output files are written
atomically, so a failing command never leaves a partial file behind.
Exit codes: 0 ok, 2 invalid input, 3 unmet precondition, 4 simulator guard.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (
    InputDist,
    as_matrix,
    capacity,
    expurgated_fixed,
    expurgated_free,
    max_pair_divergence,
    red_alert_fixed,
    red_alert_max,
)
from .errors import DhtError, GuardError, PreconditionError, ValidationError
from .exponents import (
    SearchConfig,
    example1_report,
    fig2_curve,
    jhtcc_exponent,
    multiletter_k1,
    onebit_exponent,
    shtcc_exponent,
    taci_exponent,
    uncoded_exponent,
    zero_capacity_exponent,
)
from .exponents.instance import ExponentReport, _jsonable
from .info import LN2
from .problem import builtin_problem, load_problem
from .simulator import DEFAULT_BIN_WIDTH, PairSource, mc_np_errors, stein_slope

SCHEMES = ("shtcc", "jhtcc", "onebit", "taci", "uncoded", "k1", "zerocap")
EXIT_OK, EXIT_VALIDATION, EXIT_PRECONDITION, EXIT_GUARD = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(doc: dict) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _scale(units: str) -> float:
    return 1.0 / LN2 if units == "bits" else 1.0


def _resolve_problem(source: str):
    path = Path(source)
    if path.exists():
        return load_problem(path)
    if source in ("example1", "example1.json"):
        return builtin_problem("example1")
    raise ValidationError(f"problem file {source} does not exist")


def _search_config(args) -> SearchConfig:
    return SearchConfig(w_card=args.w_card, grid_step=args.grid_step, r_grid=args.r_grid,
                        refine_rounds=args.refine_rounds, s_card=args.s_card)


def _config_echo(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


# ---------------------------------------------------------------------------
# commands


def cmd_exponent(args) -> dict:
    inst = _resolve_problem(args.problem)
    cfg = _search_config(args)
    scheme = args.scheme
    if scheme == "shtcc":
        rep = shtcc_exponent(inst, cfg)
    elif scheme == "jhtcc":
        rep = jhtcc_exponent(inst, cfg)
    elif scheme == "onebit":
        rep = onebit_exponent(inst)
    elif scheme == "taci":
        rep = taci_exponent(inst, cfg)
    elif scheme == "uncoded":
        if inst.tau != 1:
            raise PreconditionError(f"uncoded transmission needs tau = 1, got {inst.tau}")
        v = uncoded_exponent(inst)
        rep = ExponentReport("uncoded", v, "closed form", terms={"D_VY": v})
    elif scheme == "k1":
        rep = multiletter_k1(inst, args.grid_step)
    else:
        rep = zero_capacity_exponent(inst)
    doc = rep.to_dict(args.units)
    doc["config"] = _config_echo(args, ("grid_step", "r_grid", "refine_rounds", "w_card", "s_card", "threads"))
    doc["config"]["tau"] = inst.tau
    return doc


def cmd_repro(args) -> dict | None:
    if args.target == "fig2":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "f_prime_bits"])
        for r, f in fig2_curve(step=args.step):
            w.writerow([f"{r:.3f}", f"{f:.12f}"])
        return {"csv": buf.getvalue()}
    rep = example1_report(_search_config(args), search=not args.skip_search)
    rep["config"] = _config_echo(args, ("grid_step", "r_grid", "refine_rounds", "w_card", "s_card", "skip_search"))
    rep["units"] = "bits"
    return rep


def cmd_simulate(args) -> dict:
    inst = _resolve_problem(args.problem)
    src = PairSource.centralized(inst) if args.scheme == "centralized" else PairSource.uncoded(inst)
    if not 0 < args.eps < 1:
        raise ValidationError(f"--eps must lie in (0, 1), got {args.eps}")
    curve = stein_slope(src, args.n, args.eps, args.bin_width, threads=args.threads)
    target = src.divergence()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "alpha", "beta_lo", "beta_hi", "slope_nats"])
    for n, a, lo, hi, s in zip(curve.n, curve.alpha, curve.beta_lo, curve.beta_hi, curve.per_n_slopes()):
        w.writerow([n, f"{a:.12e}", f"{lo:.12e}", f"{hi:.12e}", f"{s:.12e}"])
    doc = {
        "command": "simulate",
        "scheme": args.scheme,
        "seed": args.seed,
        "config": _config_echo(args, ("eps", "bin_width", "trials", "threads")) | {"n": list(args.n)},
        "units": "nats",
        "slope_nats": curve.slope,
        "intercept": curve.intercept,
        "residuals": curve.residuals,
        "oracle": {"kl_div_nats": target, "kl_div_bits": target / LN2,
                   "relative_gap": abs(curve.slope - target) / target if target > 0 else None},
        "curve_csv": args.csv,
    }
    if args.trials:
        mc = mc_np_errors(src, curve.n[0], args.eps, args.trials, args.seed, args.bin_width, threads=args.threads)
        doc["monte_carlo"] = {
            "n": mc.n, "trials": mc.trials, "skipped": mc.skipped, "reason": mc.reason,
            "alpha_hat": mc.alpha_hat, "beta_hat": mc.beta_hat,
            "alpha_wilson": mc.alpha_interval, "beta_wilson": mc.beta_interval,
            "generator": "Philox",
        }
    return {"json": doc, "csv": buf.getvalue()}


def _load_channel(source: str) -> np.ndarray:
    path = Path(source)
    if not path.exists():
        if source in ("example1", "example1.json"):
            return builtin_problem().W
        raise ValidationError(f"channel file {source} does not exist")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source} is not valid JSON: {exc}") from None
    mat = doc.get("channel") if isinstance(doc, dict) else doc
    try:
        w = np.array(mat, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError("channel must be a numeric matrix") from None
    if w.ndim != 2:
        raise ValidationError("channel must be a matrix")
    bad = np.argwhere(~np.isfinite(w) | (w < 0))
    if len(bad):
        i, j = (int(x) for x in bad[0])
        raise ValidationError(f"channel[{i}][{j}] = {w[i, j]!r} is not a nonnegative number")
    off = np.flatnonzero(np.abs(w.sum(axis=1) - 1.0) > 1e-9)
    if len(off):
        raise ValidationError(f"channel row {int(off[0])} sums to {w[off[0]].sum():.12g}, not 1")
    return as_matrix(w)


def cmd_channel(args) -> dict:
    w = _load_channel(args.channel)
    to_nats = 1.0 if args.units == "nats" else LN2
    rate = (args.rate or 0.0) * to_nats
    if rate < 0:
        raise ValidationError(f"--rate must be nonnegative, got {args.rate}")
    inp = None
    if args.input_dist is not None:
        px = np.array(args.input_dist, dtype=np.float64)
        if px.shape != (w.shape[0],) or np.any(px < 0) or abs(px.sum() - 1) > 1e-9:
            raise ValidationError(f"--input-dist must be a probability vector of length {w.shape[0]}")
        inp = InputDist.single(px)
    params: dict = {}
    if args.quantity == "capacity":
        value, px = capacity(w)
        params["P_X"] = px.probs
    elif args.quantity == "expurgated":
        res = expurgated_fixed(rate, inp, w) if inp else expurgated_free(rate, w)
        value, params["rho"] = res.value, res.rho
        if res.input is not None:
            params["P_S"], params["P_X_given_S"] = res.input.P_S, res.input.P_X_given_S
    elif args.quantity == "redalert":
        res = red_alert_fixed(inp, w) if inp else red_alert_max(rate, w)
        value = res.value
        if res.input is not None:
            params["P_S"], params["P_X_given_S"] = res.input.P_S, res.input.P_X_given_S
        params["feasible"] = res.feasible
    else:
        value, pair = max_pair_divergence(w)
        params["pair"] = list(pair)
    return {
        "command": "channel",
        "quantity": args.quantity,
        "units": args.units,
        "config": _config_echo(args, ("rate", "input_dist")),
        "value": value * _scale(args.units),
        "value_nats": value,
        "value_bits": value / LN2,
        "params": params,
    }


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dhtexp", description="Error exponents for distributed hypothesis testing "
                                                          "over a discrete memoryless channel.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--units", choices=("bits", "nats"), default="bits")
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--timing", action="store_true", help="add wall-clock time (breaks byte-identical reruns)")
    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--grid-step", type=float, default=0.05)
    search.add_argument("--r-grid", type=int, default=40)
    search.add_argument("--refine-rounds", type=int, default=2)
    search.add_argument("--w-card", type=int)
    search.add_argument("--s-card", type=int)

    sub = p.add_subparsers(dest="command", required=True)
    e = sub.add_parser("exponent", parents=[common, search], help="compute one exponent for a problem file")
    e.add_argument("scheme", choices=SCHEMES)
    e.add_argument("problem", help="problem JSON (or 'example1' for the built-in instance)")

    r = sub.add_parser("repro", parents=[common, search], help="reproduce the binary example or its curve")
    r.add_argument("target", choices=("example1", "fig2"))
    r.add_argument("--step", type=float, default=0.005, help="r spacing for fig2")
    r.add_argument("--skip-search", action="store_true", help="example1: skip the SHTCC/JHTCC searches")

    s = sub.add_parser("simulate", parents=[common], help="exact Neyman-Pearson errors and Stein slope")
    s.add_argument("problem")
    s.add_argument("--scheme", choices=("centralized", "uncoded"), default="centralized")
    s.add_argument("--n", type=int, nargs="+", default=[50, 100, 200, 300, 400, 500])
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    s.add_argument("--trials", type=int, default=0, help="Monte Carlo trials at the smallest n (0 skips)")
    s.add_argument("--csv", help="write the error curve CSV here")

    c = sub.add_parser("channel", parents=[common], help="channel capacity and reliability quantities")
    c.add_argument("quantity", choices=("capacity", "expurgated", "redalert", "ec"))
    c.add_argument("channel", help="JSON with a 'channel' matrix (a problem file works)")
    c.add_argument("--rate", type=float, help="rate in --units")
    c.add_argument("--input-dist", type=float, nargs="+", help="fix P_X instead of optimizing it")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        if args.command == "exponent":
            doc = cmd_exponent(args)
        elif args.command == "repro":
            doc = cmd_repro(args)
            if "csv" in doc:
                _emit(doc["csv"], args.out)
                return EXIT_OK
        elif args.command == "simulate":
            res = cmd_simulate(args)
            doc = res["json"]
            if args.csv:
                _atomic_write(args.csv, res["csv"])
        else:
            doc = cmd_channel(args)
        doc.setdefault("command", args.command)
        doc["seed"] = args.seed
        if args.timing:
            doc["timing_seconds"] = time.perf_counter() - start
        _emit(_dump(doc), args.out)
        return EXIT_OK
    except GuardError as exc:
        print(f"dhtexp: simulator guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except PreconditionError as exc:
        print(f"dhtexp: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (DhtError, ValueError) as exc:
        print(f"dhtexp: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
