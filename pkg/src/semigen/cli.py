"""Command-line front end.

Subcommands: ``test`` runs the specification test on a user CSV, ``simulate``
runs a rejection-frequency experiment, ``erp`` runs the bandwidth-stability
comparison. JSON is the canonical result format; CSV is a projection.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from .bootstrap import run_test
from .data import (
    CsvFormatError,
    read_sample_csv,
    write_test_result_csv,
    write_test_result_json,
)
from .errors import (
    DimensionMismatch,
    NonFiniteValue,
    SemigenError,
    TooFewObservations,
)
from .simulation import (
    DgpSpec,
    DgpVariant,
    erp_experiment,
    run_mc_experiment,
    write_erp_csv,
)
from .types import (
    GeneratedCovariate,
    IndexForm,
    ModelSpec,
    TestConfig,
    TrimmingSpec,
)

EXIT_OK = 0
EXIT_DATA_ERROR = 2
EXIT_NUMERICAL = 3

MODEL_FORMS = {
    "binary-cf": (GeneratedCovariate.RESIDUAL, IndexForm.COMBINED),
    "partial-cf": (GeneratedCovariate.RESIDUAL, IndexForm.PARTIAL),
    "selection": (GeneratedCovariate.LEVEL, IndexForm.PARTIAL),
    "game": (GeneratedCovariate.LEVEL, IndexForm.COMBINED),
}


class CliError(SemigenError):
    def __init__(self, kind: str, key: str, message: str = ""):
        self.kind = kind
        self.key = key
        super().__init__(f"{kind}({key}){': ' + message if message else ''}")


@dataclass
class RunConfig:
    subcommand: str
    input_csv: str | None
    output: str
    format: str
    model_form: str
    normalize_on: int | None
    alpha_levels: tuple
    n_bootstrap: int
    seed: int
    bias_corrected: bool
    trim_rate: float
    dgp: int
    n: int
    p: float
    reps: int
    warp_speed: bool
    bandwidth: str
    threads: int


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "unrecognized arguments" in message:
            raise CliError("UnknownFlag", message.split()[-1])
        if "invalid" in message:
            raise CliError("InvalidValue", message)
        raise CliError("InvalidValue", message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="semigen", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file; flags override it")
        p.add_argument("--output", default=None)
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--alpha", action="append", type=float, default=None,
                       help="nominal level, repeatable")
        p.add_argument("--bootstrap", type=int, default=999, metavar="J")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-bias-correction", action="store_true")
        p.add_argument("--trim-rate", type=float, default=0.01)
        p.add_argument("--bandwidth", default="auto",
                       help="'auto' or 'c:<C>' for the fixed sigma rule")
        p.add_argument("--threads", type=int, default=None)

    p_test = sub.add_parser("test", help="run the test on CSV data")
    common(p_test)
    p_test.add_argument("--input", default=None, help="CSV with columns y,d,x1..,z1..")
    p_test.add_argument("--model", choices=sorted(MODEL_FORMS), default="binary-cf")
    p_test.add_argument("--normalize-on", type=int, default=None,
                        help="coefficient position fixed to 1")

    for name in ("simulate", "erp"):
        p_sim = sub.add_parser(name)
        common(p_sim)
        p_sim.add_argument("--dgp", type=int, choices=[1, 2, 3], default=1)
        p_sim.add_argument("--n", type=int, default=400)
        p_sim.add_argument("--p", type=float, default=0.0)
        p_sim.add_argument("--reps", type=int, default=1000)
        p_sim.add_argument("--warp-speed", action="store_true")
        if name == "erp":
            p_sim.add_argument("--c-values", default="0.5,1,1.5,2,2.5",
                               help="comma separated bandwidth multipliers")
    return parser


def parse_config(argv) -> argparse.Namespace:
    """Parse flags, applying config-file values as defaults (flags win)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
        known = set(vars(args))
        for key in file_values:
            if key not in known:
                raise CliError("UnknownFlag", key)
        # Re-parse with the file's values as defaults so explicit flags win.
        parser = _build_parser()
        for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
            action.set_defaults(**file_values)
        args = parser.parse_args(argv)
    if args.subcommand == "test" and not args.input:
        raise CliError("MissingRequired", "input_csv")
    if args.alpha is None:
        args.alpha = [0.01, 0.05, 0.10]
    for a in args.alpha:
        if not 0.0 < a < 1.0:
            raise CliError("InvalidValue", "alpha", f"{a} not in (0,1)")
    if args.threads is None:
        args.threads = int(os.environ.get("SEMIGEN_THREADS", "1"))
    return args


def _bandwidth_mode(arg: str):
    if arg == "auto":
        return ("auto",)
    if arg.startswith("c:"):
        try:
            return ("rule", float(arg[2:]))
        except ValueError:
            raise CliError("InvalidValue", "bandwidth", arg) from None
    raise CliError("InvalidValue", "bandwidth", arg)


def _test_config(args) -> TestConfig:
    return TestConfig(
        n_bootstrap=args.bootstrap,
        alpha_levels=tuple(args.alpha),
        bias_corrected=not args.no_bias_correction,
        seed=args.seed,
        n_jobs=args.threads,
    )


def _run_test_command(args) -> int:
    sample = read_sample_csv(args.input)
    gen, form = MODEL_FORMS[args.model]
    n_coef = sample.x.shape[1] + (1 if form is IndexForm.COMBINED else 0)
    beta_dim = n_coef - (1 if args.normalize_on is not None else 0)
    if beta_dim < 1:
        raise CliError("InvalidValue", "normalize_on",
                       "normalization leaves no free coefficient")
    model = ModelSpec(generated_covariate=gen, index_form=form,
                      beta_dim=beta_dim, normalization=args.normalize_on)
    config = _test_config(args)
    trim = TrimmingSpec(rate=args.trim_rate)
    result = run_test(sample, model, trim_spec=trim, config=config,
                      bandwidth_mode=_bandwidth_mode(args.bandwidth))
    out = args.output or "test_result." + args.format
    if args.format == "json":
        write_test_result_json(result, out)
    else:
        write_test_result_csv(result, out)
    print(f"S_n = {result.s_n:.6g}  p-value = {result.p_value:.4g}  -> {out}")
    return EXIT_OK


def _run_simulate_command(args) -> int:
    dgp = DgpSpec(variant=DgpVariant(args.dgp), p=args.p, n=args.n)
    config = _test_config(args)
    report = run_mc_experiment(dgp, config, n_reps=args.reps,
                               warp_speed=args.warp_speed,
                               bandwidth_mode=_bandwidth_mode(args.bandwidth),
                               n_jobs=args.threads)
    out = args.output or "mc_report." + args.format
    if args.format == "json":
        report.write_json(out)
    else:
        report.write_csv(out)
    print(f"{args.reps} replications in {report.runtime_seconds:.1f}s -> {out}")
    return EXIT_OK


def _run_erp_command(args) -> int:
    dgp = DgpSpec(variant=DgpVariant(args.dgp), p=args.p, n=args.n)
    c_values = [float(c) for c in args.c_values.split(",") if c.strip()]
    rows = erp_experiment(dgp, c_values, alpha_levels=tuple(args.alpha),
                          n_reps=args.reps, seed=args.seed, n_jobs=args.threads)
    out = args.output or "erp_curves.csv"
    write_erp_csv(rows, out)
    print(f"{len(rows)} ERP rows -> {out}")
    return EXIT_OK


def run(args) -> int:
    if args.subcommand == "test":
        return _run_test_command(args)
    if args.subcommand == "simulate":
        return _run_simulate_command(args)
    return _run_erp_command(args)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_config(argv)
    except CliError as exc:
        print(f"semigen: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    try:
        return run(args)
    except (CsvFormatError, CliError, FileNotFoundError, DimensionMismatch,
            NonFiniteValue, TooFewObservations) as exc:
        print(f"semigen: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except (SemigenError, FloatingPointError) as exc:
        print(f"semigen: numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
