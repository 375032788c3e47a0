"""Command-line entry point: ``wavespec <subcommand> [--config PATH] [--out DIR] [--seed N] [--quick]``.

Exit codes: 0 pass (or warning), 1 check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .scenarios import RUNNERS, apply_quick, default_config


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavespec", description="Wave-spectrum and boundary-control checks.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "green-check": "Green identity on random triples plus the continuum table",
        "controllability": "controllability test against the invariant-subspace oracle",
        "spectrum": "lattice, atoms, boundary flags, ball base check, distance matrix",
        "reconstruct": "distances between interval atoms against grid geometry",
        "continuum": "continuum boundary operators, components and convergence",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path, help="scenario YAML file")
        s.add_argument("--out", type=Path, help="output directory (overrides outputs.directory)")
        s.add_argument("--seed", type=int, help="random seed (overrides config)")
        s.add_argument("--quick", action="store_true", help="small interval model on a coarse grid")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config(args.command)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.quick:
            cfg = apply_quick(cfg)
        out = args.out or Path(cfg.outputs.directory)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {out} is not writable: {exc.strerror}") from None
        report = RUNNERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for line in report.summary_lines():
        print(line)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
