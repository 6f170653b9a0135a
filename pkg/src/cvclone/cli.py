"""Command-line interface.

Subcommands: limits, run, montecarlo, experiment, sweep. Options may also be
given in a flat JSON file (``--config``) using the option names with dashes
replaced by underscores; command-line flags take precedence. The seed falls
back to ``$CVCLONE_SEED``.

Exit codes: 0 success, 2 invalid usage, 3 numerical failure. On failure a JSON
object ``{"error": {"kind", "message"}}`` is written to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from dataclasses import replace
from typing import Any

import numpy as np

from .cloning import (
    ClippedFidelityWarning,
    CloneReport,
    CloningConfig,
    added_noise_db,
    clone_variance,
    conventional_fidelity,
    conventional_is_clipped,
    optimal_transmission,
    pc_fidelity,
    run_machine_exact,
    run_machine_unitary,
    with_alphabet_fidelity,
)
from .errors import InvalidArgument, NumericalError
from .experiment import ExperimentPlan, reproduce_published_run, run_experiment
from .measurement import DetectorModel, FeedforwardGains

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

DEFAULTS: dict[str, Any] = {
    "n": 1,
    "m": None,
    "t": None,
    "g1": None,
    "g2x": None,
    "g2p": None,
    "eta": 1.0,
    "electronic_noise": 0.0,
    "epr_r": None,
    "verify_eta": None,
    "shots": 100_000,
    "seed": None,
    "workers": 1,
    "alphabet_variance": None,
    "convention": "amplitude",
    "format": "json",
    "out": None,
    "fig": "fig4",
    "param": "t",
    "from": None,
    "to": None,
    "steps": 51,
    "samples": False,
}

SWEEP_PARAMS = ("t", "g1", "eta", "epr-r", "electronic-noise")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="flat JSON file with option values")
    p.add_argument("--format", choices=("json", "csv", "table"), default=S)
    p.add_argument("--out", default=S, help="write output here instead of stdout")


def _add_machine(p: argparse.ArgumentParser, m_help: str = "number of clones M") -> None:
    S = argparse.SUPPRESS
    p.add_argument("--n", type=int, default=S, help="copies N of each input")
    p.add_argument("--m", type=int, default=S, help=m_help)
    p.add_argument("--t", type=float, default=S, help="transmission override")
    p.add_argument("--g1", type=float, default=S)
    p.add_argument("--g2x", type=float, default=S)
    p.add_argument("--g2p", type=float, default=S)
    p.add_argument("--eta", type=float, default=S, help="feedforward detector efficiency")
    p.add_argument("--electronic-noise", dest="electronic_noise", type=float, default=S)
    p.add_argument("--epr-r", dest="epr_r", type=float, default=S, help="EPR squeezing r")
    p.add_argument("--alphabet-variance", dest="alphabet_variance", type=float, default=S)
    p.add_argument("--convention", choices=("amplitude", "quadrature"), default=S)


def _add_mc(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--shots", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--verify-eta", dest="verify_eta", default=S,
                   help="comma-separated verification homodyne efficiencies, one per clone")
    p.add_argument("--samples", action="store_true", default=S, help="include raw samples in JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvclone", description="Phase-conjugate coherent-state cloning simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("limits", help="closed-form fidelities and noise levels for M = 1..M_max")
    _add_common(p)
    p.add_argument("--n", type=int, default=argparse.SUPPRESS)
    p.add_argument("--m", type=int, default=argparse.SUPPRESS, help="largest M")

    p = sub.add_parser("run", help="exact pipeline")
    _add_common(p)
    _add_machine(p)

    p = sub.add_parser("montecarlo", help="Monte Carlo emulation of the experiment")
    _add_common(p)
    _add_machine(p)
    _add_mc(p)

    p = sub.add_parser("experiment", help="fidelities from the published caption data")
    _add_common(p)
    p.add_argument("--fig", choices=("fig3", "fig4"), default=argparse.SUPPRESS)
    p.add_argument("--alphabet-variance", dest="alphabet_variance", type=float, default=argparse.SUPPRESS)
    p.add_argument("--convention", choices=("amplitude", "quadrature"), default=argparse.SUPPRESS)

    p = sub.add_parser("sweep", help="exact pipeline over a parameter range")
    _add_common(p)
    _add_machine(p)
    p.add_argument("--param", choices=SWEEP_PARAMS, default=argparse.SUPPRESS)
    p.add_argument("--from", dest="from", type=float, default=argparse.SUPPRESS)
    p.add_argument("--to", type=float, default=argparse.SUPPRESS)
    p.add_argument("--steps", type=int, default=argparse.SUPPRESS)
    return parser


def resolve_options(argv: list[str]) -> dict[str, Any]:
    ns = vars(build_parser().parse_args(argv))
    opts = dict(DEFAULTS)
    path = ns.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                file_opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(file_opts, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_opts) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(file_opts)
    opts.update(ns)
    if opts["seed"] is None:
        env = os.environ.get("CVCLONE_SEED")
        try:
            opts["seed"] = int(env) if env not in (None, "") else 0
        except ValueError as exc:
            raise UsageError(f"CVCLONE_SEED must be an integer, got {env!r}") from exc
    return opts


# -- building library objects ------------------------------------------------


def _config(opts: dict) -> CloningConfig:
    if opts["m"] is None:
        raise InvalidArgument("--m is required")
    base = CloningConfig(
        N=opts["n"],
        M=opts["m"],
        T_override=opts["t"],
        detector=DetectorModel(opts["eta"], opts["electronic_noise"]),
        epr_r=opts["epr_r"],
    )
    if any(opts[k] is not None for k in ("g1", "g2x", "g2p")):
        g = base.resolved_gains
        gains = FeedforwardGains(
            g.g1 if opts["g1"] is None else opts["g1"],
            g.g2x if opts["g2x"] is None else opts["g2x"],
            g.g2p if opts["g2p"] is None else opts["g2p"],
        )
        base = replace(base, gains=gains)
    return base


def _verify_etas(opts: dict) -> tuple[float, ...] | None:
    v = opts["verify_eta"]
    if v is None:
        return None
    if isinstance(v, str):
        try:
            return tuple(float(x) for x in v.split(","))
        except ValueError as exc:
            raise InvalidArgument(f"bad --verify-eta {v!r}") from exc
    return tuple(float(x) for x in v)


def _maybe_alphabet(report: CloneReport, opts: dict) -> CloneReport:
    if opts["alphabet_variance"] is None:
        return report
    return with_alphabet_fidelity(report, opts["alphabet_variance"], opts["convention"])


# -- commands ----------------------------------------------------------------


def cmd_limits(opts: dict) -> list[dict]:
    N, M_max = opts["n"], opts["m"] if opts["m"] is not None else 10
    if N < 1 or M_max < 1:
        raise InvalidArgument("--n and --m must be >= 1")
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClippedFidelityWarning)
        for M in range(1, M_max + 1):
            f_c, f_pc, var = conventional_fidelity(N, M), pc_fidelity(N, M), clone_variance(N, M)
            rows.append({
                "m": M,
                "f_c": f_c,
                "f_pc": f_pc,
                "gap": f_pc - f_c,
                "t_opt": optimal_transmission(N, M),
                "var": var,
                "db": added_noise_db(var),
                "f_c_clipped": conventional_is_clipped(N, M),
            })
    return rows


def cmd_run(opts: dict) -> dict:
    config = _config(opts)
    if config.epr_r is not None:
        _, _, (rep, anti) = run_machine_unitary(config)
        out = _maybe_alphabet(rep, opts).to_dict()
        out["anticlones"] = [c.to_dict() for c in anti.clones]
        return out
    _, rep = run_machine_exact(config)
    return _maybe_alphabet(rep, opts).to_dict()


def cmd_montecarlo(opts: dict) -> dict:
    config = _config(opts)
    plan = ExperimentPlan(
        config,
        shots=opts["shots"],
        seed=opts["seed"],
        verification_efficiencies=_verify_etas(opts),
        workers=opts["workers"],
    )
    record, report = run_experiment(plan)
    return {
        "record": record.to_dict(include_samples=bool(opts["samples"])),
        "report": _maybe_alphabet(report, opts).to_dict(),
    }


def cmd_experiment(opts: dict) -> dict:
    return reproduce_published_run(opts["fig"], opts["alphabet_variance"], opts["convention"]).to_dict()


def cmd_sweep(opts: dict) -> list[dict]:
    param, lo, hi, steps = opts["param"], opts["from"], opts["to"], opts["steps"]
    if param not in SWEEP_PARAMS:
        raise InvalidArgument(f"--param must be one of {SWEEP_PARAMS}")
    if lo is None or hi is None:
        raise InvalidArgument("--from and --to are required")
    if steps < 1:
        raise InvalidArgument("--steps must be >= 1")
    key = param.replace("-", "_")
    values = np.linspace(lo, hi, steps)
    # fail fast: validate every point before running any of them
    configs = [_config({**opts, key: float(v)}) for v in values]
    for c in configs:
        c.resolved_gains
    rows = []
    for v, config in zip(values, configs):
        anti = None
        if config.epr_r is not None:
            _, _, (rep, anti) = run_machine_unitary(config)
        else:
            _, rep = run_machine_exact(config)
        rep = _maybe_alphabet(rep, opts)
        c = rep.clones[0]
        row = {param: float(v), "fidelity": c.fidelity, "var_x": c.var_x, "var_p": c.var_p,
               "gx": c.gx, "gp": c.gp, "g1": rep.g1}
        if c.alphabet_fidelity is not None:
            row["alphabet_fidelity"] = c.alphabet_fidelity
        if anti is not None:
            a = anti.clones[0]
            row.update(anti_fidelity=a.fidelity, anti_var_x=a.var_x, anti_var_p=a.var_p)
        rows.append(row)
    return rows


COMMANDS = {
    "limits": cmd_limits,
    "run": cmd_run,
    "montecarlo": cmd_montecarlo,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
}


# -- output ------------------------------------------------------------------


def _rows(result) -> list[dict]:
    """Flatten a result into CSV/table rows."""
    if isinstance(result, list):
        return result
    if "report" in result:
        result = result["report"]
    rows = [{"clone_id": i + 1, **c} for i, c in enumerate(result["clones"])]
    for i, c in enumerate(result.get("anticlones", [])):
        rows.append({"clone_id": f"anti{i + 1}", **c})
    return rows


def _fmt(key: str, value) -> str:
    if isinstance(value, bool) or not isinstance(value, float):
        return str(value)
    if key.startswith("db"):
        return f"{value:.2f}"
    if "fidelity" in key or key.startswith("f_") or key == "gap":
        return f"{value:.3f}"
    return f"{value:.4f}"


CSV_CLONE_COLUMNS = ["clone_id", "gx", "gp", "var_x", "var_p", "db_x", "db_p", "fidelity"]


def render(result, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result, indent=2) + "\n"
    rows = _rows(result)
    cols = list(rows[0]) if rows else []
    if cols and cols[0] == "clone_id":
        cols = CSV_CLONE_COLUMNS + [c for c in cols if c not in CSV_CLONE_COLUMNS]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    cells = [[_fmt(c, r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": {"kind": kind, "message": message}}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        opts = resolve_options(argv)
        command = opts["command"]
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            result = COMMANDS[command](opts)
        text = render(result, opts["format"])
    except (UsageError, InvalidArgument) as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _fail("numerical", str(exc), EXIT_NUMERICAL)
    if opts["out"]:
        with open(opts["out"], "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
