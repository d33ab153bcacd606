"""Command-line interface.

Exit codes: 0 success, 1 study thresholds not met, 2 configuration error,
3 numerical divergence.
"""
import argparse
import sys

from .config import ConfigError, StudyConfig, load_study_config
from .solver import DivergenceError
from .wavekernel import check_exponents

_STUDY_COMMANDS = {
    "simulate": "simulate",
    "wz-study": "wz",
    "increment-study": "increments",
    "sup-study": "sup-convergence",
    "rate-study": "rate",
    "kernel-bounds": "kernel-bounds",
    "sobolev-moments": "sobolev-moments",
    "skeleton-check": "skeleton-check",
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rieszwave",
        description="Numerical studies of the 3D stochastic wave equation "
        "with Riesz-kernel correlated noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in _STUDY_COMMANDS:
        p = sub.add_parser(cmd, help=f"run the {cmd} driver")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="root seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--replicas", type=int, help="replica count override")
        p.add_argument("--threads", type=int, help="worker thread count")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
    p = sub.add_parser("params", help="check exponent admissibility")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    return parser


def _study_config(args, study_tag):
    overrides = {"study": study_tag}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.replicas is not None:
        overrides["M"] = args.replicas
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.format is not None:
        overrides["format"] = args.format
    if args.config is not None:
        return load_study_config(args.config, overrides)
    return StudyConfig({k: str(v) for k, v in overrides.items()})


def _run_params(args):
    report = check_exponents(args.beta, args.p, args.gamma)
    status = "OK" if report.conclusion_holds else "DISCREPANCY"
    print(f"beta={report.beta} p={report.p} gamma={report.gamma}")
    print(f"eta={report.eta:.6g} eta1={report.eta1:.6g}")
    print(
        f"hypotheses_hold={report.hypotheses_hold} "
        f"conclusion_holds={report.conclusion_holds} {status}"
    )
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "params":
        return _run_params(args)
    try:
        cfg = _study_config(args, _STUDY_COMMANDS[args.command])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    from .experiments import run_study

    try:
        result = run_study(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 3
    out_path = result.write(cfg.out, cfg.format)
    print(f"wrote {out_path}")
    for name, fit in sorted(result.rates.items()):
        print(f"{name}: {fit['slope']:.6g} (se {fit['stderr']:.3g})")
    if not result.passed:
        print("study thresholds NOT met", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
