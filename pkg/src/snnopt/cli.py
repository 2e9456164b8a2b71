"""Command-line entry point: ``snnopt <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .engine import SnnParams, Trace
from .geometry import niceness
from .problems import ProblemKind, load_instance, save_instance


def _instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", metavar="PATH", help="instance JSON file")
    p.add_argument("--n", type=int, help="neurons of a generated instance")
    p.add_argument("--m", type=int, help="signal dimension of a generated instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x-mode", choices=("sparse", "gaussian"), help="target of a generated instance")


def _kind_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("nnls", "l1", "l1signed", "lasso"), default="nnls")
    p.add_argument("--beta", type=float, help="Lasso penalty (required for --kind lasso)")


def _kind(args) -> ProblemKind:
    return ProblemKind.parse(args.kind, args.beta)


def _config(args, **extra) -> harness.ExperimentConfig:
    if args.instance is None and (args.n is None or args.m is None):
        raise SystemExit("give --instance PATH or both --n and --m")
    return harness.ExperimentConfig(
        kind=_kind(args),
        instance_path=args.instance,
        n=args.n,
        m=args.m,
        seed=args.seed,
        x_mode=args.x_mode,
        **extra,
    )


def _print(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_gen(args) -> int:
    if args.n is None or args.m is None:
        raise SystemExit("gen needs --n and --m")
    cfg = harness.ExperimentConfig(kind=_kind(args), n=args.n, m=args.m, seed=args.seed, x_mode=args.x_mode)
    inst = cfg.load()
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "instance.json"
    save_instance(inst, path)
    _print({"instance": str(path), "source": cfg.source()})
    return 0


def cmd_params(args) -> int:
    inst = _config(args).load()
    _print(harness.auto_params(inst, _kind(args), args.tmax).to_dict())
    return 0


def cmd_run(args) -> int:
    params = None
    if not args.auto_params:
        if args.dt is None:
            raise SystemExit("run needs --auto-params or an explicit --dt")
        params = SnnParams(
            dt=args.dt, tau=args.tau, alpha=args.alpha, eta=args.eta, mode=args.mode, t_max=args.tmax or 1000
        )
    cfg = _config(
        args,
        params=params,
        t_max=args.tmax,
        probe_every=args.probe_every,
        out_dir=args.out,
        run_oracle=not args.no_oracle,
    )
    res = harness.run_experiment(cfg)
    _print(res.summary)
    return 0 if res.report is None or res.report.ok else 1


def cmd_oracle(args) -> int:
    inst = _config(args).load()
    _print(harness.solve_oracle(inst, _kind(args)).to_dict())
    return 0


def cmd_niceness(args) -> int:
    inst = _config(args).load()
    _print(niceness(inst.F).to_dict())
    return 0


def cmd_verify(args) -> int:
    out = Path(args.out)
    summary = json.loads((out / "summary.json").read_text())
    inst = load_instance(args.instance or out / "instance.json")
    params = SnnParams.from_dict(summary["params"])
    kind = ProblemKind.parse(summary["kind"], summary.get("beta"))
    trace = Trace.read_csv(args.trace or out / "trace.csv")
    oracle = harness.solve_oracle(inst, kind)
    report = harness.verify(trace, inst, params, kind, oracle)
    print(report)
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snnopt", description="Spiking-network solvers for NNLS, l1 and Lasso.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a random instance")
    _instance_args(p)
    _kind_args(p)
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("params", help="print automatic parameters")
    _instance_args(p)
    _kind_args(p)
    p.add_argument("--tmax", type=int)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("run", help="simulate and write trace + summary")
    _instance_args(p)
    _kind_args(p)
    p.add_argument("--auto-params", action="store_true")
    p.add_argument("--dt", type=float)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--mode", choices=("signed", "nonneg"), default="signed")
    p.add_argument("--tmax", type=int)
    p.add_argument("--probe-every", type=int, default=1)
    p.add_argument("--no-oracle", action="store_true")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="run the reference solver")
    _instance_args(p)
    _kind_args(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("niceness", help="report the niceness margins")
    _instance_args(p)
    _kind_args(p)
    p.set_defaults(func=cmd_niceness)

    p = sub.add_parser("verify", help="re-check a finished run")
    p.add_argument("--out", metavar="DIR", required=True, help="run directory")
    p.add_argument("--instance", metavar="PATH")
    p.add_argument("--trace", metavar="PATH")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
