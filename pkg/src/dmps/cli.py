"""Command-line interface.

Subcommands:
  simulate   one seeded instance, streaming the per-depth observable CSV
  sweep      run a sweep config file (JSON), writing CSVs + manifest
  fit        power-law fit of peak entropies, or fidelity-decay (b0) fit
  theory     evaluate the closed-form peak/curve predictions
  validate   engine-vs-exact trace and fidelity over a bond-dimension list
  spectrum   export the singular-value spectrum at a column cut

Exit codes: 0 success, 1 usage or config error, 2 numeric failure,
3 partial sweep (some grid points failed).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .circuits import LatticeSpec
from .engine import TraceFloorError
from .harness import (
    ConfigError,
    load_config,
    run_instance,
    run_sweep,
    validate_against_oracle,
)
from .observables import record_csv_header, record_csv_row, singular_spectrum
from .theory import (
    TheoryParams,
    fit_b0_from_renyi,
    fit_power_law,
    predicted_operator_ee,
    predicted_s_max_and_t_peak,
    predicted_second_renyi,
)

__all__ = ["main", "console_main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_PARTIAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we reserve that
        raise UsageError(message)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _lattice(args) -> LatticeSpec:
    return LatticeSpec(args.L1, args.L2)


def _cmd_simulate(args) -> int:
    lattice = _lattice(args)
    records, _, flag = run_instance(
        lattice, args.p, args.chi, args.depth, args.seed,
        observe_every=args.observe_every, trace_floor=args.trace_floor,
    )
    run_id = f"simulate_{lattice.L1}x{lattice.L2}"
    lines = [record_csv_header(lattice.L2)]
    lines += [record_csv_row(r, run_id, args.seed, lattice, args.p, args.chi)
              for r in records]
    _emit("\n".join(lines) + "\n", args.out)
    if flag:
        print(f"numeric failure: {flag}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        from dataclasses import replace
        config = replace(config, workers=args.workers)
    out_dir = args.out if args.out is not None else config.output_dir
    if out_dir is None:
        raise UsageError("an output directory is required (--out or config output_dir)")
    result = run_sweep(config, output_dir=out_dir)
    failed = [g for g in result.grids if g.failed]
    for g in failed:
        print(f"grid {g.run_id} failed: {g.failed}", file=sys.stderr)
    print(f"wrote {len(result.grids) - len(failed)}/{len(result.grids)} "
          f"grid points to {out_dir}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _read_csv_columns(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line]
    return {name: [row[i] for row in rows] for i, name in enumerate(header)}


def _cmd_fit(args) -> int:
    if args.mode == "power":
        cols = _read_csv_columns(args.input)
        points = []
        for i in range(len(cols["p"])):
            if args.L1 is not None and int(cols["L1"][i]) != args.L1:
                continue
            if args.L2 is not None and int(cols["L2"][i]) != args.L2:
                continue
            points.append((float(cols["p"][i]), float(cols["s_max_mean_curve"][i])))
        fit = fit_power_law(points)
        _emit(json.dumps(fit.to_json_dict(), indent=1) + "\n", args.out)
    else:  # b0
        if args.p is None or args.L1 is None or args.L2 is None:
            raise UsageError("fit b0 requires --p, --L1 and --L2")
        cols = _read_csv_columns(args.input)
        n = args.L1 * args.L2
        samples = [(float(d), n, float(s2))
                   for d, s2 in zip(cols["depth"], cols["s2_mean"])]
        fit = fit_b0_from_renyi(samples, args.p)
        doc = {"b0": fit.b0, "residual_rms": fit.residual_rms,
               "n_samples": fit.n_samples, "p": args.p, "n_qubits": n}
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return EXIT_OK


def _cmd_theory(args) -> int:
    params = TheoryParams(b0=args.b0, b1=args.b1, b2=args.b2)
    pred = predicted_s_max_and_t_peak(args.L1, args.L2, args.p, params)
    lines = [
        f"branch: {pred.branch}",
        f"s_max: {repr(pred.s_max)}",
        f"t_peak: {repr(pred.t_peak)}",
        f"l_tran: {repr(pred.l_tran)}",
    ]
    if args.depths:
        n = args.L1 * args.L2
        lines.append("depth,operator_ee,second_renyi")
        for t in args.depths:
            ee = predicted_operator_ee(t, args.L1, args.L2, args.p, params)
            s2 = predicted_second_renyi(t, n, args.p, args.b0)
            lines.append(f"{repr(float(t))},{repr(ee)},{repr(s2)}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    report = validate_against_oracle(_lattice(args), args.p, args.depth,
                                     args.chis, args.seed)
    lines = ["chi,trace,fidelity"]
    lines += [f"{r.chi},{repr(r.trace)},{repr(r.fidelity)}" for r in report.rows]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    lattice = _lattice(args)
    records, state, flag = run_instance(
        lattice, args.p, args.chi, args.depth, args.seed,
        observe_every=max(args.depth, 1), trace_floor=args.trace_floor,
    )
    if state is None:
        print(f"numeric failure: {flag}", file=sys.stderr)
        return EXIT_NUMERIC
    cut = args.cut if args.cut is not None else lattice.L2 // 2
    values = singular_spectrum(state, cut)
    if args.top is not None:
        values = values[: args.top]
    lines = ["k,sigma"]
    lines += [f"{k},{repr(float(v))}" for k, v in enumerate(values, start=1)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _int_list(text: str):
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str):
    return [float(x) for x in text.split(",") if x]


def build_parser() -> _Parser:
    parser = _Parser(prog="dmps", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add_lattice(p):
        p.add_argument("--L1", type=int, required=True, help="lattice rows")
        p.add_argument("--L2", type=int, required=True, help="lattice columns (>= L1)")

    sim = sub.add_parser("simulate", help="run one instance, stream observables")
    add_lattice(sim)
    sim.add_argument("--p", type=float, required=True, help="depolarizing rate")
    sim.add_argument("--chi", type=int, required=True, help="bond-dimension cap")
    sim.add_argument("--depth", type=int, required=True, help="number of gate layers")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--observe-every", type=int, default=1, dest="observe_every")
    sim.add_argument("--trace-floor", type=float, default=0.5, dest="trace_floor")
    sim.add_argument("--out", default=None, help="output file (default stdout)")
    sim.set_defaults(func=_cmd_simulate)

    sw = sub.add_parser("sweep", help="run a sweep config file")
    sw.add_argument("--config", required=True, help="JSON sweep config")
    sw.add_argument("--out", default=None, help="output directory")
    sw.add_argument("--workers", type=int, default=None,
                    help="override configured worker count")
    sw.set_defaults(func=_cmd_sweep)

    fit = sub.add_parser("fit", help="power-law or fidelity-decay fits")
    fit.add_argument("mode", choices=["power", "b0"])
    fit.add_argument("--input", required=True,
                     help="smax.csv (power) or agg_*.csv (b0) from a sweep")
    fit.add_argument("--L1", type=int, default=None)
    fit.add_argument("--L2", type=int, default=None)
    fit.add_argument("--p", type=float, default=None, help="noise rate (b0 mode)")
    fit.add_argument("--out", default=None)
    fit.set_defaults(func=_cmd_fit)

    th = sub.add_parser("theory", help="closed-form peak and curve predictions")
    add_lattice(th)
    th.add_argument("--p", type=float, required=True)
    th.add_argument("--b0", type=float, required=True)
    th.add_argument("--b1", type=float, required=True)
    th.add_argument("--b2", type=float, required=True)
    th.add_argument("--depths", type=_float_list, default=None,
                    help="comma-separated depths for curve output")
    th.add_argument("--out", default=None)
    th.set_defaults(func=_cmd_theory)

    va = sub.add_parser("validate", help="engine vs exact oracle (<= 9 qubits)")
    add_lattice(va)
    va.add_argument("--p", type=float, required=True)
    va.add_argument("--depth", type=int, required=True)
    va.add_argument("--chis", type=_int_list, required=True,
                    help="comma-separated bond dimensions")
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--out", default=None)
    va.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("spectrum", help="singular-value spectrum at a cut")
    add_lattice(sp)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--chi", type=int, required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cut", type=int, default=None,
                    help="column cut (default: middle)")
    sp.add_argument("--top", type=int, default=None, help="keep only the top K values")
    sp.add_argument("--trace-floor", type=float, default=0.0, dest="trace_floor")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_help()
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TraceFloorError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def console_main() -> None:
    sys.exit(main())
