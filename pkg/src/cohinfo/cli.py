"""Command-line front end.

Every command prints a JSON envelope (or writes CSV for curve-producing commands).
Exit codes: 0 success, 1 numerical failure (e.g. MLE non-convergence), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .capacity import (StateFamily, coherent_information, coherent_information_via_purification,
                       environment_entropy, optimize_ci_family, optimize_ci_general,
                       output_entropy, r_family, scan_delta, singularity_rate_regression,
                       singularity_rate_spectral, u_family, wv_family)
from .channels import Channel, channel_from_spec, complementary
from .states import DensityMatrix, family_rho_r, family_rho_u, family_rho_wv

COMMANDS = ("ci", "optimize", "singularity", "scan-delta", "tomo-state", "tomo-process")


class UsageError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass
class JobConfig:
    command: str
    channel_spec: str | None = None
    family_spec: str | None = None
    options: dict[str, Any] = field(default_factory=dict)


@dataclass
class ResultEnvelope:
    command: str
    config: dict
    results: dict
    curve: list[list[float]] = field(default_factory=list)
    uncertainty: dict = field(default_factory=dict)
    seed: int | None = None
    version: str = __version__
    # the only field allowed to differ between identical runs
    timing: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ResultEnvelope":
        return cls(**json.loads(text))


def parse_state(spec: str) -> DensityMatrix:
    """``u:<u>``, ``wv:<w>,<v>`` or ``r:<r1>,<r2>,<r3>``."""
    name, _, args = spec.partition(":")
    try:
        vals = [float(a) for a in args.split(",")] if args else []
        if name == "u" and len(vals) == 1:
            return family_rho_u(*vals)
        if name == "wv" and len(vals) == 2:
            return family_rho_wv(*vals)
        if name == "r" and len(vals) == 3:
            return family_rho_r(*vals)
    except ValueError as exc:
        raise UsageError(f"invalid state spec {spec!r}: {exc}") from None
    raise UsageError(f"unknown state spec {spec!r}")


def parse_family(spec: str) -> StateFamily:
    """``u``, ``r`` or ``wv:<v>`` (w free, v fixed)."""
    if spec == "u":
        return u_family()
    if spec == "r":
        return r_family()
    name, _, arg = spec.partition(":")
    if name == "wv" and arg:
        try:
            return wv_family(float(arg))
        except ValueError as exc:
            raise UsageError(f"invalid family spec {spec!r}: {exc}") from None
    raise UsageError(f"unknown family spec {spec!r}")


def parse_channel(spec: str) -> Channel:
    try:
        return channel_from_spec(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"window must be 'lo,hi', got {text!r}") from None
    return lo, hi


AXES = {"r1": 0, "r2": 1, "r3": 2}


def _parse_fixed(text: str, axis: str) -> list[float]:
    values = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        if key not in AXES or key == axis or key in values:
            raise UsageError(f"bad fixed assignment {part!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise UsageError(f"bad fixed value {part!r}") from None
    others = [k for k in AXES if k != axis]
    if set(values) != set(others):
        raise UsageError(f"--fixed must assign {' and '.join(others)}")
    return [values[k] for k in others]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohinfo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", help="write to this path instead of stdout")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ci", help="coherent information of a channel at one input state")
    p.add_argument("--channel", required=True)
    p.add_argument("--state", required=True, help="u:<u> | wv:<w>,<v> | r:<r1>,<r2>,<r3>")
    p.add_argument("--method", choices=("direct", "purification"), default="direct")
    common(p)

    p = sub.add_parser("optimize", help="maximize coherent information")
    p.add_argument("--channel", required=True)
    p.add_argument("--family", default="general", help="u | r | wv:<v> | general")
    p.add_argument("--grid", type=int, default=51)
    p.add_argument("--restarts", type=int, default=8)
    common(p)

    p = sub.add_parser("singularity", help="log-singularity rate along a 1-parameter family")
    p.add_argument("--channel", required=True)
    p.add_argument("--family", required=True, help="u | wv:<v>")
    p.add_argument("--side", choices=("output", "environment"), default="output")
    p.add_argument("--method", choices=("spectral", "regression"), default="spectral")
    p.add_argument("--window", default="1e-4,1e-1")
    p.add_argument("--points", type=int, default=40)
    common(p)

    p = sub.add_parser("scan-delta", help="nonadditivity Delta along one r-parameter")
    p.add_argument("--channel-a", required=True)
    p.add_argument("--channel-b", required=True)
    p.add_argument("--family", default="r")
    p.add_argument("--axis", required=True, choices=tuple(AXES))
    p.add_argument("--fixed", required=True, help="e.g. r2=0.07,r3=0.27")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--qa", type=float, help="single-use optimum of channel A (default: computed)")
    p.add_argument("--qb", type=float, help="single-use optimum of channel B (default: computed)")
    p.add_argument("--restarts", type=int, default=8)
    common(p)

    p = sub.add_parser("tomo-state", help="tomographic coherent information with Monte Carlo errors")
    p.add_argument("--channel")
    p.add_argument("--state")
    p.add_argument("--counts-in", help="reconstruct from a count-record JSON file instead")
    p.add_argument("--counts-out", help="write the simulated output-state counts here")
    p.add_argument("--shots", type=int, default=100000)
    p.add_argument("--resamples", type=int, default=20)
    p.add_argument("--max-iter", type=int, default=5000)
    common(p)

    p = sub.add_parser("tomo-process", help="simulated process tomography and process fidelity")
    p.add_argument("--channel", required=True)
    p.add_argument("--shots", type=int, default=0, help="0 for exact probabilities")
    p.add_argument("--max-iter", type=int, default=5000)
    common(p)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> JobConfig:
    """Parse and validate; raises SystemExit(2) on any usage error."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    opts = {k: v for k, v in vars(ns).items() if k not in ("command",)}
    try:
        _validate(ns)
    except UsageError as exc:
        parser.error(str(exc))
    channel = getattr(ns, "channel", None)
    family = getattr(ns, "family", None)
    return JobConfig(ns.command, channel, family, opts)


def _validate(ns: argparse.Namespace) -> None:
    cmd = ns.command
    if cmd in ("ci", "optimize", "singularity", "tomo-process"):
        parse_channel(ns.channel)
    if cmd == "ci":
        parse_state(ns.state)
    if cmd == "optimize" and ns.family != "general":
        parse_family(ns.family)
    if cmd in ("optimize", "scan-delta") and (ns.grid < 1 or ns.restarts < 1):
        raise UsageError("--grid and --restarts must be positive")
    if cmd == "singularity":
        if parse_family(ns.family).arity != 1:
            raise UsageError("singularity needs a 1-parameter family (u or wv:<v>)")
        lo, hi = _parse_window(ns.window)
        if not 0 < lo < hi <= 1:
            raise UsageError(f"window must satisfy 0 < lo < hi <= 1, got {ns.window}")
        if ns.points < 3:
            raise UsageError("--points must be >= 3")
    if cmd == "scan-delta":
        parse_channel(ns.channel_a)
        parse_channel(ns.channel_b)
        if parse_family(ns.family).arity != 3:
            raise UsageError("scan-delta needs the 3-parameter family r")
        fixed = _parse_fixed(ns.fixed, ns.axis)
        if any(not 0 <= f <= 1 for f in fixed):
            raise UsageError("fixed values must lie in [0, 1]")
    if cmd == "tomo-state":
        if ns.counts_in is None:
            if ns.channel is None or ns.state is None:
                raise UsageError("tomo-state needs --channel and --state, or --counts-in")
            parse_channel(ns.channel)
            parse_state(ns.state)
        if ns.shots < 1 or ns.resamples < 2:
            raise UsageError("--shots must be >= 1 and --resamples >= 2")
    if cmd == "tomo-process" and ns.shots < 0:
        raise UsageError("--shots must be >= 0")
    if getattr(ns, "format", "json") == "csv" and cmd in ("ci", "optimize", "tomo-process"):
        raise UsageError(f"{cmd} produces no curve; CSV output is unavailable")


def _cmd_ci(o: dict) -> ResultEnvelope:
    ch, rho = parse_channel(o["channel"]), parse_state(o["state"])
    s_out, s_env = output_entropy(ch, rho), environment_entropy(ch, rho)
    if o["method"] == "purification":
        ic = coherent_information_via_purification(ch, rho)
    else:
        ic = coherent_information(ch, rho)
    return ResultEnvelope("ci", o, {"output_entropy": s_out, "environment_entropy": s_env,
                                    "coherent_information": ic})


def _cmd_optimize(o: dict) -> ResultEnvelope:
    ch = parse_channel(o["channel"])
    if o["family"] == "general":
        res = optimize_ci_general(ch, restarts=o["restarts"], seed=o["seed"])
    else:
        res = optimize_ci_family(ch, parse_family(o["family"]), grid_points=o["grid"])
    return ResultEnvelope("optimize", o, {"best_params": [float(x) for x in res.best_params],
                                          "best_value": res.best_value,
                                          "evaluations": res.evaluations,
                                          "converged": res.converged})


def _cmd_singularity(o: dict) -> ResultEnvelope:
    ch = parse_channel(o["channel"])
    target = complementary(ch) if o["side"] == "environment" else ch
    family = parse_family(o["family"])
    lo, hi = _parse_window(o["window"])
    curve = []
    if o["method"] == "spectral":
        est = singularity_rate_spectral(target, family)
    else:
        est = singularity_rate_regression(target, family, (lo, hi), o["points"])
    eps = np.geomspace(lo, hi, o["points"])
    s = [output_entropy(target, family(e)) for e in eps]
    curve = [[float(e), float(d)] for e, d in zip(eps, np.gradient(s, eps))]
    return ResultEnvelope("singularity", o, {"x": est.x, "method": est.method,
                                             "fit_residual": est.fit_residual,
                                             "eps_window": list(est.eps_window)}, curve)


def _single_use_optimum(ch: Channel, restarts: int, seed: int) -> float:
    return max(0.0, optimize_ci_general(ch, restarts=restarts, seed=seed).best_value)


def _cmd_scan(o: dict) -> ResultEnvelope:
    ch_a, ch_b = parse_channel(o["channel_a"]), parse_channel(o["channel_b"])
    axis = AXES[o["axis"]]
    fixed = _parse_fixed(o["fixed"], o["axis"])
    q_a = o["qa"] if o["qa"] is not None else _single_use_optimum(ch_a, o["restarts"], o["seed"])
    q_b = o["qb"] if o["qb"] is not None else _single_use_optimum(ch_b, o["restarts"], o["seed"])
    curve = scan_delta(ch_a, ch_b, parse_family(o["family"]), axis, fixed,
                       grid_points=o["grid"], q_a=q_a, q_b=q_b)
    positive = [t for t, d in curve if d > 0]
    results = {"q_a": q_a, "q_b": q_b,
               "delta_max": max(d for _, d in curve) if curve else None,
               "positive_interval": [min(positive), max(positive)] if positive else None}
    return ResultEnvelope("scan-delta", o, results, [[t, d] for t, d in curve])


def _cmd_tomo_state(o: dict) -> ResultEnvelope:
    from .states import von_neumann_entropy
    from .tomography import (count_record_from_json, estimate_coherent_information,
                             mle_reconstruct, monte_carlo_errors)

    if o["counts_in"]:
        with open(o["counts_in"]) as fh:
            counts, ps = count_record_from_json(fh.read())
        rec = mle_reconstruct(counts, ps, max_iter=o["max_iter"])
        std = monte_carlo_errors(counts, ps, o["resamples"], seed=o["seed"],
                                 max_iter=o["max_iter"])
        env = ResultEnvelope("tomo-state", o, {"entropy": von_neumann_entropy(rec.rho_hat),
                                               "log_likelihood": rec.log_likelihood,
                                               "iterations": rec.iterations,
                                               "converged": rec.converged},
                             uncertainty={"entropy_std": std}, seed=o["seed"])
        if not rec.converged:
            raise NumericalFailure(env)
        return env
    ch, rho = parse_channel(o["channel"]), parse_state(o["state"])
    est = estimate_coherent_information(ch, rho, o["shots"], o["seed"], o["resamples"],
                                        max_iter=o["max_iter"])
    if o["counts_out"]:
        from .tomography import product_projectors
        from .channels import as_kraus
        dims = tuple(d for d in as_kraus(ch).out_dims if d > 1)
        with open(o["counts_out"], "w") as fh:
            fh.write(est.output_counts.to_json(product_projectors(dims)))
    results = {"output_entropy": est.output_entropy, "joint_entropy": est.joint_entropy,
               "coherent_information": est.value,
               "ideal_coherent_information": coherent_information(ch, rho)}
    unc = {"output_entropy_std": est.std_output, "joint_entropy_std": est.std_joint,
           "coherent_information_std": est.std_value}
    return ResultEnvelope("tomo-state", o, results, uncertainty=unc, seed=o["seed"])


def _cmd_tomo_process(o: dict) -> ResultEnvelope:
    from .tomography import process_tomography

    ch = parse_channel(o["channel"])
    shots = o["shots"] or None
    res = process_tomography(ch, shots=shots, seed=o["seed"], max_iter=o["max_iter"])
    env = ResultEnvelope("tomo-process", o, {"process_fidelity": res.fidelity,
                                             "tp_error": res.choi.tp_error(),
                                             "converged": res.converged}, seed=o["seed"])
    if not res.converged:
        raise NumericalFailure(env)
    return env


DISPATCH = {"ci": _cmd_ci, "optimize": _cmd_optimize, "singularity": _cmd_singularity,
            "scan-delta": _cmd_scan, "tomo-state": _cmd_tomo_state,
            "tomo-process": _cmd_tomo_process}


def emit_csv(curve: Sequence[Sequence[float]], path: str | None = None) -> str:
    """Write ``param,value[,std]`` rows in ascending parameter order (17 significant digits)."""
    if not curve:
        raise ValueError("curve is empty")
    width = len(curve[0])
    if width not in (2, 3) or any(len(row) != width for row in curve):
        raise ValueError("curve rows must all be (param, value) or (param, value, std)")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "value", "std"][:width])
    for row in sorted(curve, key=lambda r: r[0]):
        writer.writerow([format(float(x), ".17g") for x in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def run(config: JobConfig) -> tuple[ResultEnvelope, int]:
    start = time.perf_counter()
    code = 0
    try:
        env = DISPATCH[config.command](config.options)
    except NumericalFailure as exc:
        env, code = exc.args[0], 1
    env.seed = config.options.get("seed")
    env.timing = {"wall_time_s": time.perf_counter() - start}
    return env, code


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    config = parse_args(argv)
    try:
        env, code = run(config)
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"cohinfo: numerical failure: {exc}", file=sys.stderr)
        return 1
    path = config.options.get("output")
    try:
        if config.options.get("format") == "csv":
            if not env.curve:
                print("cohinfo: no curve data to write", file=sys.stderr)
                return 1
            text = emit_csv(env.curve)
        else:
            text = env.to_json()
        _write(text, path)
    except OSError as exc:
        print(f"cohinfo: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
