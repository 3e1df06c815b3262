"""Benchmark command line: deterministic runs and paired method comparisons.

    msqn-bench run --problem rosenbrock:d=100 --method type1 --rule forward \
        --n 25 --h 1e-9 --out t.csv
    msqn-bench compare --problem logistic:n=500:d=50:reg=1e-3:seed=7 \
        --method type1:rule=forward --method gd --tol 1e-6 --out-dir results/

Exit codes: 0 success, 1 solver failure, 2 bad flags, 3 I/O failure.
Given fixed seeds the emitted CSV bodies are bit-stable except the wall_ms
column.  Config files are flat key=value text mirroring the flags; explicit
flags override file values.
"""
import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields

from .accelerated import accel_outer
from .baselines import BaselineConfig, run_gd, run_lbfgs, run_nesterov
from .problems import build_problem
from .solver import SolverConfig, type1_iterate, type2_iterate

METHODS = ("type1", "type2", "accel", "gd", "nesterov", "lbfgs")


@dataclass
class RunSpec:
    """Everything needed to reproduce one run; round-trips through key=value text."""

    problem: str = "quadratic:d=10:seed=0"
    method: str = "type1"
    rule: str = "forward"
    n: int = 25
    h: float = 1e-9
    kappa_max: float = 1e9
    seed: int = 0
    m0: float | None = None
    grad_tol: float = 1e-8
    max_outer: int = 500
    budget: int = 10 ** 9
    out: str = ""

    def emit(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name}={'' if value is None else value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RunSpec":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
        kwargs = {}
        for f in fields(cls):
            if f.name not in values:
                continue
            raw = values[f.name]
            if f.name == "m0":
                kwargs[f.name] = float(raw) if raw != "" else None
            elif f.type in ("int", int):
                kwargs[f.name] = int(raw)
            elif f.type in ("float", float):
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = raw
        return cls(**kwargs)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(rule=self.rule, n=self.n, h=self.h,
                            kappa_max=self.kappa_max, grad_tol=self.grad_tol,
                            max_outer=self.max_outer, max_oracle_calls=self.budget,
                            m0=self.m0, seed=self.seed)

    def baseline_config(self) -> BaselineConfig:
        return BaselineConfig(memory=self.n, grad_tol=self.grad_tol,
                              max_outer=max(self.max_outer, 10 ** 5),
                              max_oracle_calls=self.budget)


def execute_run(spec: RunSpec):
    """Build the problem and run the requested method; returns (x, trace)."""
    oracle = build_problem(spec.problem)
    method = spec.method
    if method == "type1":
        return type1_iterate(oracle, spec.solver_config())
    if method == "type2":
        return type2_iterate(oracle, spec.solver_config())
    if method == "accel":
        return accel_outer(oracle, spec.solver_config())
    if method == "gd":
        return run_gd(oracle, spec.baseline_config())
    if method == "nesterov":
        return run_nesterov(oracle, spec.baseline_config())
    if method == "lbfgs":
        return run_lbfgs(oracle, spec.baseline_config())
    raise ValueError(f"unknown method {method!r}")


def _spec_from_args(args) -> RunSpec:
    return RunSpec(problem=args.problem, method=args.method, rule=args.rule,
                   n=args.n, h=args.h, kappa_max=args.kappa_max, seed=args.seed,
                   m0=args.m0, grad_tol=args.grad_tol, max_outer=args.max_outer,
                   budget=args.budget, out=getattr(args, "out", "") or "")


def _apply_method_overrides(spec: RunSpec, method_descriptor: str) -> RunSpec:
    """'type1:rule=forward:n=10' -> RunSpec with those fields replaced."""
    name, *rest = method_descriptor.split(":")
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}")
    values = dict(part.split("=", 1) for part in rest)
    out = RunSpec(**asdict(spec))
    out.method = name
    for key, raw in values.items():
        if key == "rule":
            out.rule = raw
        elif key == "n":
            out.n = int(raw)
        elif key == "h":
            out.h = float(raw)
        elif key == "kappa_max":
            out.kappa_max = float(raw)
        else:
            raise ValueError(f"unsupported method override {key!r}")
    return out


def _add_common_flags(sub):
    sub.add_argument("--problem", required=True)
    sub.add_argument("--rule", default="forward",
                     choices=("forward", "random", "iterates", "greedy", "ortho-batch"))
    sub.add_argument("--n", type=int, default=25)
    sub.add_argument("--h", type=float, default=1e-9)
    sub.add_argument("--kappa-max", dest="kappa_max", type=float, default=1e9)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--m0", type=float, default=None)
    sub.add_argument("--grad-tol", dest="grad_tol", type=float, default=1e-8)
    sub.add_argument("--max-outer", dest="max_outer", type=int, default=500)
    sub.add_argument("--budget", type=int, default=10 ** 9)
    sub.add_argument("--config", default=None,
                     help="flat key=value file; explicit flags override it")


_FLAG_TYPES = {"n": int, "seed": int, "max_outer": int, "budget": int,
               "h": float, "kappa_max": float, "m0": float, "grad_tol": float,
               "tol": float}


def _load_config_defaults(argv, subparsers):
    """Pre-scan argv for --config and install its values as subparser defaults."""
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IOError(f"cannot read config {path}: {exc}") from exc
    defaults = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        raw = raw.strip()
        defaults[key] = _FLAG_TYPES[key](raw) if key in _FLAG_TYPES else raw
    for sub in subparsers:
        sub.set_defaults(**defaults)


def _build_parser():
    parser = argparse.ArgumentParser(prog="msqn-bench")
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="run one method, write a CSV trace")
    _add_common_flags(run)
    run.add_argument("--method", required=True, choices=METHODS)
    run.add_argument("--out", required=True, help="CSV trace destination")

    comp = subs.add_parser("compare", help="run two or more methods on one problem")
    _add_common_flags(comp)
    comp.add_argument("--method", action="append", required=True,
                      help="method name with optional overrides, repeatable")
    comp.add_argument("--tol", type=float, default=1e-6)
    comp.add_argument("--out-dir", dest="out_dir", default=".")
    comp.add_argument("--summary", default=None,
                      help="JSON summary path (default <out-dir>/summary.json)")
    return parser, (run, comp)


def cli_run(args) -> int:
    spec = _spec_from_args(args)
    x, trace = execute_run(spec)
    trace.to_csv(spec.out)
    final_g = trace.final_grad_norm
    print(f"wrote {spec.out}: {len(trace)} rows, "
          f"final grad_norm {final_g if final_g is not None else 'n/a'}")
    return 0


def cli_compare(args) -> int:
    import os

    if len(args.method) < 2:
        raise argparse.ArgumentTypeError("compare needs at least two --method")
    base = _spec_from_args(argparse.Namespace(**{**vars(args), "method": "type1"}))
    os.makedirs(args.out_dir, exist_ok=True)
    summary = []
    for descriptor in args.method:
        spec = _apply_method_overrides(base, descriptor)
        x, trace = execute_run(spec)
        stem = descriptor.replace(":", "_").replace("=", "-")
        csv_path = os.path.join(args.out_dir, f"{stem}.csv")
        trace.to_csv(csv_path)
        summary.append({
            "method": descriptor,
            "oracle_calls_to_tol": trace.oracle_calls_to_tol(args.tol),
            "final_f": trace.final_f,
            "final_grad_norm": trace.final_grad_norm,
        })
        print(f"{descriptor}: calls_to_tol={summary[-1]['oracle_calls_to_tol']} "
              f"final_grad_norm={summary[-1]['final_grad_norm']}")
    summary_path = args.summary or os.path.join(args.out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"wrote {summary_path}")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = _build_parser()
    try:
        _load_config_defaults(argv, subparsers)
        args = parser.parse_args(argv)
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return cli_run(args)
        return cli_compare(args)
    except (argparse.ArgumentTypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # solver failures
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
