"""Command line entry point: ``geptrkn {inspect,converge,sweep,stability}``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .exceptions import GeptrknError, UnknownMethod, UnknownProblem
from .experiments import (DEFAULT_H_LIST, DEFAULT_TOL_LIST, ExperimentConfig, inspect_scheme,
                          run_convergence_table, run_stability_export, run_work_precision,
                          scheme_json, work_precision_csv)

EXIT_OK, EXIT_CONFIG, EXIT_FAILED_ROW = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_number(text: str) -> float:
    """``0.25``, ``1/4``, ``2^-2`` and ``1/2^2`` all give 0.25."""
    t = text.strip().replace("**", "^")
    m = re.fullmatch(rf"({_NUM})(?:\^({_NUM}))?(?:/({_NUM})(?:\^({_NUM}))?)?", t)
    if not m:
        raise ConfigError(f"cannot parse number {text!r}")
    num = float(m.group(1)) ** (float(m.group(2)) if m.group(2) else 1.0)
    if m.group(3):
        den = float(m.group(3)) ** (float(m.group(4)) if m.group(4) else 1.0)
        if den == 0.0:
            raise ConfigError(f"division by zero in {text!r}")
        num /= den
    return num


def parse_list(text: str) -> tuple:
    values = tuple(parse_number(v) for v in text.split(",") if v.strip())
    if not values:
        raise ConfigError("empty list")
    if any(not v > 0 for v in values):
        raise ConfigError(f"list entries must be positive: {text!r}")
    return values


def parse_params(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--param expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out[key.strip()] = value
    return out


def parse_grid(text: str) -> tuple:
    parts = re.split(r"[x,]", text.strip().lower())
    try:
        dims = [int(p) for p in parts if p]
    except ValueError:
        raise ConfigError(f"--grid expects N or NZxNNU, got {text!r}") from None
    if len(dims) == 1:
        dims *= 2
    if len(dims) != 2 or min(dims) < 2:
        raise ConfigError(f"--grid needs two sizes >= 2, got {text!r}")
    return tuple(dims)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geptrkn", description="GEPTRKN collocation methods: experiments and exports")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp, many=False):
        if many:
            sp.add_argument("--method", action="append",
                            help="method name or custom(c1,...); repeat for several")
        else:
            sp.add_argument("--method", default="geptrkn5")
        sp.add_argument("--out", help="output file")

    sp = sub.add_parser("inspect", help="print the coefficients of a method")
    common(sp)

    for name, helptext in (("converge", "fixed-step NCD table"),
                           ("sweep", "adaptive work-precision sweep")):
        sp = sub.add_parser(name, help=helptext)
        common(sp, many=True)
        sp.add_argument("--problem", default="line")
        sp.add_argument("--param", action="append", metavar="K=V",
                        help="problem parameter override (value parsed as JSON)")
        if name == "converge":
            sp.add_argument("--h-list", help="comma separated step sizes, e.g. 1/2^2,1/2^3")
        else:
            sp.add_argument("--tol-list", help="comma separated tolerances")
            sp.add_argument("--lte-mode", default="position",
                            choices=["position", "position_and_derivative"])

    sp = sub.add_parser("stability", help="spectral radius grid of the stability matrix")
    common(sp)
    sp.add_argument("--grid", default="400x400", help="N or NZxNNU")
    sp.add_argument("--zmin", type=float, default=-10.0)
    sp.add_argument("--numin", type=float, default=-10.0)
    return p


def _emit(text, out, stdout):
    if out:
        Path(out).write_text(text)
    else:
        stdout.write(text)


def _cmd_inspect(args, stdout):
    report = inspect_scheme(args.method)
    if args.out:
        Path(args.out).write_text(scheme_json(args.method) + "\n")
    stdout.write(report)
    return EXIT_OK


def _cmd_converge(args, stdout):
    cfg = ExperimentConfig(methods=tuple(args.method or ["geptrkn5"]), problem=args.problem,
                           params=parse_params(args.param), mode="fixed",
                           h_list=parse_list(args.h_list) if args.h_list else DEFAULT_H_LIST)
    table = run_convergence_table(cfg)
    stdout.write(table.to_text())
    if args.out:
        table.to_csv(args.out)
    return EXIT_FAILED_ROW if table.failed else EXIT_OK


def _cmd_sweep(args, stdout):
    cfg = ExperimentConfig(methods=tuple(args.method or ["geptrkn52"]), problem=args.problem,
                           params=parse_params(args.param), mode="adaptive",
                           tol_list=parse_list(args.tol_list) if args.tol_list else DEFAULT_TOL_LIST,
                           lte_mode=args.lte_mode)
    rows = run_work_precision(cfg)
    _emit(work_precision_csv(rows), args.out, stdout)
    return EXIT_OK if all(r.ok for r in rows) else EXIT_FAILED_ROW


def _cmd_stability(args, stdout):
    n_z, n_nu = parse_grid(args.grid)
    if args.zmin > 0 or args.numin > 0:
        raise ConfigError("--zmin and --numin must be <= 0")
    cfg = ExperimentConfig(methods=(args.method,), n_z=n_z, n_nu=n_nu, z_min=args.zmin,
                           nu_min=args.numin)
    if args.out:
        out = Path(args.out)
        grid = run_stability_export(cfg, csv_out=out, json_out=out.with_suffix(".json"))
    else:
        grid = run_stability_export(cfg)
    stdout.write(grid.summary_json() + "\n")
    return EXIT_FAILED_ROW if grid.failed else EXIT_OK


COMMANDS = {"inspect": _cmd_inspect, "converge": _cmd_converge, "sweep": _cmd_sweep,
            "stability": _cmd_stability}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.verb](args, stdout)
    except (ConfigError, UnknownMethod, UnknownProblem, TypeError, ValueError,
            json.JSONDecodeError) as exc:
        sys.stderr.write(f"geptrkn: configuration error: {exc}\n")
        return EXIT_CONFIG
    except GeptrknError as exc:
        sys.stderr.write(f"geptrkn: {type(exc).__name__}: {exc}\n")
        return EXIT_FAILED_ROW
    except OSError as exc:
        sys.stderr.write(f"geptrkn: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
