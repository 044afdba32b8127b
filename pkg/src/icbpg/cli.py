"""Command line interface for dataset generation, runs, and verification.

Subcommands:

* generate: write a synthetic sparse least-squares dataset to a directory.
* calibrate: compute and store the reference objective value for a dataset.
* run: solve one schedule on a calibrated dataset and write its trace.
* compare: run the default schedule comparison and write the report files.
* verify: execute the invariant suites; exits nonzero on any violation.
"""

import argparse
import os
import sys

from . import bench, datasets, verify


def _cmd_generate(args):
    spec = datasets.DatasetSpec(shape=args.shape, N=args.n, p=args.p,
                                seed=args.seed)
    manifest = datasets.generate_dataset(spec, args.out)
    print("wrote %s: shape=%s m=%d n=%d p=%d lambda=%g seed=%d"
          % (args.out, manifest["shape"], manifest["m"], manifest["n"],
             manifest["p"], manifest["lambda"], manifest["seed"]))
    return 0


def _cmd_calibrate(args):
    f_star, x_hat, radius = bench.calibrate(args.data, budget=args.budget)
    print("calibrated %s: F_star=%.12g radius=%.6g nnz(x_hat)=%d"
          % (args.data, f_star, radius, int((x_hat != 0.0).sum())))
    return 0


def _cmd_run(args):
    record = bench.run_single(args.data, args.schedule, eps=args.eps,
                              max_cycles=args.max_cycles, out_dir=args.out)
    gap = record.cycles[-1].gap_to_ref if record.cycles else None
    print("%s: cycles=%d cpu=%.3fs final_gap=%s termination=%s"
          % (record.schedule_label, len(record.cycles), record.total_cpu_s,
             "n/a" if gap is None else "%.3e" % gap,
             record.termination_reason))
    if args.out:
        print("trace written to %s" % args.out)
    return 0


def _cmd_compare(args):
    summaries = bench.compare(args.data, args.out, eps=args.eps,
                              max_cycles=args.max_cycles,
                              repetitions=args.repetitions)
    for s in summaries:
        print("%-14s cycles=%-6d cpu=%.3fs final_gap=%.3e termination=%s"
              % (s["schedule"], s["total_cycles"], s["total_cpu_s"],
                 s["final_gap"], s["termination"]))
    print("report files in %s" % args.out)
    return 0


def _cmd_verify(args):
    os.makedirs(args.out, exist_ok=True)
    results = verify.run_all(quick=args.quick, out_dir=args.out,
                             seed=args.seed, data_dir=args.data)
    for res in results:
        print(res.line())
        for failure in res.failures:
            print("    %s" % failure)
    failed = [res.name for res in results if not res.passed]
    print("summary written to %s" % os.path.join(args.out,
                                                 verify.SUMMARY_FILE))
    if failed:
        print("FAILED suites: %s" % ", ".join(failed))
        return 1
    print("all suites passed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="icbpg",
        description="Inexact cyclic block proximal gradient benchmark tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--shape", choices=("tall", "wide"), required=True)
    p.add_argument("--n", type=int, required=True,
                   help="size parameter N (rows; columns follow the shape)")
    p.add_argument("--p", type=int, default=10, help="number of blocks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("calibrate", help="store the reference optimum")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--budget", type=int, default=bench.DEFAULT_EVAL_BUDGET,
                   help="cycle budget for the calibration run")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("run", help="run one tolerance schedule")
    p.add_argument("--data", required=True, help="calibrated dataset directory")
    p.add_argument("--schedule", required=True,
                   help="inv2:DTILDE or fixed:DELTA")
    p.add_argument("--eps", type=float, default=None,
                   help="target gap (default 1e-6 * (1 + |F_star|))")
    p.add_argument("--max-cycles", type=int, default=3000)
    p.add_argument("--out", default=None, help="directory for the trace CSV")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="run the default schedule comparison")
    p.add_argument("--data", required=True, help="calibrated dataset directory")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--max-cycles", type=int, default=3000)
    p.add_argument("--repetitions", type=int, default=1,
                   help="timing repetitions per schedule (min CPU kept)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--quick", action="store_true",
                   help="reduced probe counts for a fast pass")
    p.add_argument("--out", default="verify_out",
                   help="directory for the summary and grid CSVs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default=None,
                   help="optional directory for caching the instrumented "
                        "dataset and its calibration")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
