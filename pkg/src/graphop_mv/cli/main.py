"""Command line: ``graphop-mv {run,estimate,particles}``.

Exit status: 0 all hard invariants hold, 1 a hard invariant failed,
2 configuration error, 3 numerical error during the run.
"""

import argparse
import sys
from pathlib import Path

from ..errors import CFLViolationError, PositivityError, SelfAdjointnessError
from .config import ConfigError, config_from_dict, load_config
from .experiments import estimate_graphop, particle_experiment, run_experiment
from .presets import PRESETS, get_preset


def _parser():
    ap = argparse.ArgumentParser(prog="graphop-mv", description="Graphop McKean-Vlasov experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "integrate the mean-field PDE and check invariants"),
                        ("estimate", "graphop constants: numerical radius, norms, c-regularity"),
                        ("particles", "finite-N particle cross-check")):
        p = sub.add_parser(name, help=help_)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="YAML run configuration")
        src.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
        p.add_argument("--out", help="output directory (default: config 'output' or runs/<name>)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--cadence", type=float, help="override the diagnostics cadence")
    return ap


def _load(args):
    if args.preset:
        data, label = get_preset(args.preset), args.preset
    else:
        cfg = load_config(args.config)
        data, label = cfg.model_dump(exclude_unset=True), Path(args.config).stem
    if args.seed is not None:
        data["seed"] = args.seed
    if args.cadence is not None:
        data.setdefault("time", {})["cadence"] = args.cadence
    return config_from_dict(data), label


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg, label = _load(args)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "estimate":
            outcome = estimate_graphop(cfg, label)
        elif args.command == "particles":
            outcome = particle_experiment(cfg, label)
        else:
            outcome = run_experiment(cfg, label)
    except (PositivityError, CFLViolationError, SelfAdjointnessError) as exc:
        print(f"{label}: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"{label}: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or cfg.output or str(Path("runs") / label)
    outcome.write(out_dir)
    for name, ok in sorted(outcome.summary.get("checks", {}).items()):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"wrote {', '.join(sorted(outcome.files))} to {out_dir}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
