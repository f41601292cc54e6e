"""``qlab`` command line: one subcommand per experiment kind."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .errors import ConfigError
from .experiments import COLUMNS, COMMON, KINDS, SCHEMAS, run_experiment, validate_entries
from .flatfile import Entry, read_flat

DESCRIPTIONS = {
    "nctorus-star": "star product of two torus elements, cross-checked against operator composition",
    "semiclassical": "semiclassical error of the torus star commutator over an hbar sweep",
    "weyl": "commutator check for quantised symbols on a periodic box",
    "sphere-ode": "RK4 solution of t alpha' + alpha = t against a/t + t/2",
    "poisson-residual": "Poisson-map residual of pi_torus or pi_sphere on random tangent vectors",
    "jacobi-check": "d1_exp, d2_exp, jacobi_dexp and D eta against finite differences on S^2",
    "bracket-validate": "antisymmetry, Leibniz and Jacobi residuals of the Lie-Poisson bracket",
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlab",
        description="Numerical experiments for quantised Lie-Poisson manifolds.",
        epilog="Exit codes: 0 pass, 1 failed criterion or numerical error, 2 invalid config. "
        "QLAB_THREADS caps sweep parallelism (default 1).",
    )
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        p = sub.add_parser(
            kind,
            help=DESCRIPTIONS[kind],
            description=DESCRIPTIONS[kind],
            epilog=f"CSV columns: {', '.join(COLUMNS[kind])}. "
            "A JSON summary {name, pass, max_error, runtime_ms} is written next to the CSV.",
        )
        p.add_argument("--config", type=Path, help="flat key = value config file")
        for key, param in {**COMMON, **SCHEMAS[kind]}.items():
            if key == "kind":
                continue
            p.add_argument(_flag(key), dest=key, metavar=key.upper(), help=param.help)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    kind = args.kind
    try:
        entries: dict[str, Entry] = {}
        source = "<command line>"
        if args.config is not None:
            source = str(args.config)
            try:
                entries = dict(read_flat(args.config))
            except OSError as exc:
                raise ConfigError([f"{source}: {exc.strerror}"]) from None
            given = entries.get("kind")
            if given is not None and given.value != kind:
                raise ConfigError(
                    [f"{source}:{given.line}: kind {given.value!r} does not match subcommand {kind!r}"]
                )
        entries["kind"] = entries.get("kind") or Entry("kind", kind, 0)
        for key in {**COMMON, **SCHEMAS[kind]}:
            value = getattr(args, key, None)
            if key != "kind" and value is not None:
                entries[key] = Entry(key, value, 0)
        cfg = validate_entries(entries, source)
    except ConfigError as exc:
        for line in exc.diagnostics:
            print(f"qlab: {line}", file=sys.stderr)
        return 2

    code, summary = run_experiment(cfg)
    if kind == "nctorus-star" and "product" in summary:
        print(summary["product"])
    status = "PASS" if summary["pass"] else "FAIL"
    print(f"{status} {cfg.name} max_error={summary['max_error']} -> {cfg.output_path}")
    if "error" in summary:
        print(f"qlab: {summary['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
