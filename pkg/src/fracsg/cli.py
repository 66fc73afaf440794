"""Command-line front end.

Config files are flat ``key = value`` text; list values are comma
separated and ``#`` starts a comment.  Recognized keys are the fields of
:class:`CliConfig` except ``command``.  Flags override file values.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from fracsg.mesh import FractionalOrder

log = logging.getLogger("fracsg")

OUTPUT_ENV = "FRACSG_OUTPUT_DIR"
COMMANDS = ("table1", "local", "example2", "properties", "truncation", "solve")

LIST_KEYS = ("alpha", "r", "N", "M")

# per-command defaults for the list keys
DEFAULTS = {
    "table1": dict(alpha=[1.5], r=[1.5], N=[800], M=[4, 8, 16, 32]),
    "local": dict(alpha=[1.1, 1.5, 1.9], r=[1.0, 1.5, 2.0], N=[16, 32, 64, 128], M=[]),
    "example2": dict(alpha=[1.1, 1.5, 1.9], r=[1.0, 1.5, 2.0], N=[32, 64, 128, 256, 512], M=[25]),
    "properties": dict(alpha=[1.1, 1.3, 1.5, 1.7, 1.9], r=[1.0, 1.5, 2.0, 3.0], N=[16, 64, 256], M=[]),
    "truncation": dict(alpha=[1.1, 1.5, 1.9], r=[1.0, 2.0], N=[32, 64, 128, 256, 512], M=[]),
    "solve": dict(alpha=[1.5], r=[1.5], N=[16], M=[16]),
}

TRUNCATION_BAND = 0.15


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    command: str
    alpha: list[float] = field(default_factory=list)
    r: list[float] = field(default_factory=list)
    N: list[int] = field(default_factory=list)
    M: list[int] = field(default_factory=list)
    tol: float = 1e-14
    out: str = ""
    jobs: int = 1
    example: str = "ex1"
    verbosity: int = 0

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        for a in self.alpha:
            try:
                FractionalOrder(a)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        if any(x < 1.0 for x in self.r):
            raise UsageError("r must be >= 1")
        if self.command != "properties" and any(n < 2 for n in self.N):
            raise UsageError("N must be >= 2")
        if any(n < 1 for n in self.N):
            raise UsageError("N must be >= 1")
        if any(m < 2 for m in self.M):
            raise UsageError("M must be >= 2")
        if not self.tol > 0.0:
            raise UsageError("tol must be positive")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1")
        if self.example not in ("ex1", "ex2"):
            raise UsageError(f"unknown example {self.example!r}")
        if not (self.alpha and self.r and self.N):
            raise UsageError("alpha, r and N lists must be non-empty")

    def output_dir(self) -> Path:
        return Path(self.out or os.environ.get(OUTPUT_ENV) or "fracsg-output")


# {{{ flat config files


def _parse_value(key: str, text: str):
    text = text.strip()
    try:
        if key in ("alpha", "r"):
            return [float(x) for x in text.split(",") if x.strip()]
        if key in ("N", "M"):
            return [int(x) for x in text.split(",") if x.strip()]
        if key == "tol":
            return float(text)
        if key in ("jobs", "verbosity"):
            return int(text)
    except ValueError:
        raise UsageError(f"bad value for {key}: {text!r}") from None
    return text


def parse_config_text(text: str) -> dict:
    known = {f.name for f in fields(CliConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def serialize_config(cfg: CliConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in LIST_KEYS:
            v = ",".join(repr(x) for x in v)
        elif f.name == "tol":
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> CliConfig:
    values = parse_config_text(text)
    if "command" not in values:
        raise UsageError("config has no command")
    return CliConfig(**values)


# }}}


def _comma_list(kind):
    def parse(text: str):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=_comma_list(float), help="fractional order(s) in (1,2)")
    common.add_argument("--r", type=_comma_list(float), help="grading exponent(s) >= 1")
    common.add_argument("--N", type=_comma_list(int), help="time step counts")
    common.add_argument("--M", type=_comma_list(int), help="spatial intervals per side")
    common.add_argument("--tol", type=float, help="linear solver relative tolerance")
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./fracsg-output)")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--jobs", type=int, help="parallel sweep workers")
    common.add_argument("--example", choices=("ex1", "ex2"), help="problem for `solve`")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="fracsg", description="Graded-mesh solver for the fractional sine-Gordon equation.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "table1": "spatial convergence, manufactured solution",
        "local": "temporal convergence at the final time, manufactured solution",
        "example2": "two-mesh temporal convergence, nonsmooth initial data",
        "properties": "coefficient properties and discrete identities",
        "truncation": "truncation-error orders of the discrete Caputo operator",
        "solve": "single run with a trajectory dump",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def resolve_config(args: argparse.Namespace) -> CliConfig:
    base = dict(DEFAULTS[args.command])
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        values = parse_config_text(text)
        values.pop("command", None)
        base.update(values)
    cfg = CliConfig(command=args.command, **base)
    over = {k: getattr(args, k) for k in ("alpha", "r", "N", "M", "tol", "out", "jobs", "example")}
    cfg = replace(cfg, **{k: v for k, v in over.items() if v is not None})
    if args.quiet:
        cfg.verbosity = -1
    elif args.verbose:
        cfg.verbosity = args.verbose
    cfg.validate()
    return cfg


# {{{ commands


def _report_misses(misses: list[str]) -> int:
    for m in misses:
        print(f"BAND MISS {m}")
    return 1 if misses else 0


def _sweep(cfg: CliConfig, example: str, pairing: str, family: str) -> int:
    from fracsg.experiments import SweepConfig, band_misses, run_sweep

    Ms = cfg.M
    if pairing == "M=N":
        Ms = []
    sc = SweepConfig(example, cfg.alpha, cfg.r, cfg.N, Ms, pairing, cfg.tol, str(cfg.output_dir()))
    table = run_sweep(sc, jobs=cfg.jobs)
    print(table.format())
    return _report_misses(band_misses(table, family))


def cmd_table1(cfg: CliConfig) -> int:
    if len(cfg.N) != 1 or not cfg.M:
        raise UsageError("table1 takes a single N and a list of M")
    return _sweep(cfg, "ex1", "fixed_N", "spatial")


def cmd_local(cfg: CliConfig) -> int:
    return _sweep(cfg, "ex1", "M=N", "local")


def cmd_example2(cfg: CliConfig) -> int:
    if len(cfg.M) != 1:
        raise UsageError("example2 takes a single M")
    return _sweep(cfg, "ex2", "fixed_M", "two_mesh")


def cmd_properties(cfg: CliConfig) -> int:
    from fracsg.experiments import property_suite

    report = property_suite(cfg.alpha, cfg.r, cfg.N)
    print(report.format())
    return 0 if report.ok else 1


def cmd_truncation(cfg: CliConfig) -> int:
    from fracsg.experiments import truncation_scan

    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    misses = []
    print(f"{'alpha':>6} {'mu':>6} {'r':>4} {'fitted':>8} {'predicted':>9}")
    for alpha in cfg.alpha:
        for mu in (alpha / 2.0, alpha):
            for r in cfg.r:
                scan = truncation_scan(mu, alpha, r, cfg.N)
                fit = scan.fitted_order
                print(f"{alpha:6g} {mu:6g} {r:4g} {fit:8.4f} {scan.predicted:9.4f}")
                scan.table().write_csv(out / f"trunc_a{alpha:g}_mu{mu:g}_r{r:g}.csv")
                if not abs(fit - scan.predicted) <= TRUNCATION_BAND:
                    misses.append(f"alpha={alpha:g} mu={mu:g} r={r:g}: order {fit:.4f} vs {scan.predicted:.4f}")
    return _report_misses(misses)


def cmd_solve(cfg: CliConfig) -> int:
    from fracsg.experiments import error_h1_exact, example_spec
    from fracsg.grid import SpatialGrid
    from fracsg.mesh import build_graded_mesh
    from fracsg.stepper import dump_trajectory, run

    if any(len(getattr(cfg, k)) != 1 for k in LIST_KEYS):
        raise UsageError("solve takes a single alpha, r, N and M")
    ex = example_spec(cfg.example, cfg.alpha[0])
    spec = ex.problem()
    mesh = build_graded_mesh(spec.T, cfg.N[0], cfg.r[0], spec.order)
    state = run(spec, mesh, SpatialGrid(spec.L, cfg.M[0]), tol=cfg.tol)
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"trajectory_{cfg.example}_a{cfg.alpha[0]:g}_r{cfg.r[0]:g}_N{cfg.N[0]}_M{cfg.M[0]}.csv"
    dump_trajectory(state, path)
    print(f"trajectory written to {path}")
    print(f"max residuals: {max(r[0] for r in state.residuals):.3e} {max(r[1] for r in state.residuals):.3e}")
    if cfg.example == "ex1":
        print(f"H1 error at T: {error_h1_exact(state, ex.exact):.4e}")
    return 0


HANDLERS = {
    "table1": cmd_table1,
    "local": cmd_local,
    "example2": cmd_example2,
    "properties": cmd_properties,
    "truncation": cmd_truncation,
    "solve": cmd_solve,
}


# }}}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fracsg: error: {exc}", file=sys.stderr)
        return 2
    level = {-1: logging.ERROR, 0: logging.WARNING, 1: logging.INFO}.get(cfg.verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fracsg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
