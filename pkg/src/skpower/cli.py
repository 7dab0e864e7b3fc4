"""Command-line surface: ``skpower gen | run | bench | verify``.

Exit codes: 0 success (or verification pass), 1 usage error, 2 runtime
failure, 3 verification below threshold.  The environment variable
``SKPOWER_THREADS`` caps internal BLAS parallelism (applied on package
import, before numpy is loaded).
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import bench as bench_mod
from . import data_io, diagnostics, power, sketching
from .linalg import pinv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VERIFY_FAIL = 3


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_matrix(path: str) -> np.ndarray:
    if path.endswith(".skpw"):
        return data_io.read_binary(path)
    return data_io.read_matrix_market(path)


def _print_kv(**kwargs) -> None:
    for key, value in kwargs.items():
        if isinstance(value, float):
            print(f"{key}={value:.12g}")
        else:
            print(f"{key}={value}")


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def _cmd_gen(args) -> int:
    m, n, seed = args.m, args.n, args.seed
    if args.kind == "polydecay":
        matrix = data_io.gen_polydecay(m, n, seed)
        spectrum = max(m, n) / np.arange(1.0, min(m, n) + 1.0)
    elif args.kind == "expdecay":
        matrix = data_io.gen_expdecay(m, n, args.rate, seed)
        spectrum = np.exp(-args.rate * np.arange(min(m, n), dtype=float))
    else:
        matrix = data_io.gen_lowrank_plus_noise(m, n, args.rank, args.noise, seed)
        spectrum = np.ones(args.rank)
    data_io.write_binary(matrix, args.out)
    top = ", ".join(f"{v:.6g}" for v in spectrum[:5])
    _print_kv(
        out=args.out,
        kind=args.kind,
        m=m,
        n=n,
        seed=seed,
        prescribed_top_singular_values=f"[{top}{', ...' if len(spectrum) > 5 else ''}]",
        prescribed_sigma_min=float(spectrum[-1]),
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _derive_parameters(args, m: int, n: int):
    """Resolve (r1, r2, q, s) from (k, l, eps) unless given explicitly."""
    s = args.s
    if args.method == "classical-randsvd" and args.r1 is None:
        args.r1 = n  # classical iteration has no primary sketch
    if args.r1 is not None and args.r2 is not None and args.q is not None:
        return args.r1, args.r2, args.q, (s if s is not None else 1)
    if args.l is None:
        raise ValueError("either --l (with --eps) or all of --r1/--r2/--q are required")
    if args.sketch == "countsketch":
        r1, s_auto = sketching.countsketch_size(args.l, args.eps, args.delta, args.c)
        if s is None:
            s = s_auto
    else:
        r1 = sketching.sketch_size(args.sketch, args.l, args.eps, args.delta, args.c, n=n)
        s = s if s is not None else 1
    r1 = args.r1 if args.r1 is not None else min(r1, n)
    r2 = args.r2 if args.r2 is not None else 2 * args.k
    q = args.q if args.q is not None else power.choose_q(args.eps, min(m, r1))
    return r1, r2, q, s


def _cmd_run(args) -> int:
    a = _load_matrix(args.data)
    m, n = a.shape
    r1, r2, q, s = _derive_parameters(args, m, n)
    spec = power.RangeFinderSpec(
        k=args.k,
        l=args.l if args.l is not None else min(m, n),
        r1=r1,
        r2=r2,
        q=q,
        eps=args.eps,
        sketch_kind=args.sketch,
        seed=args.seed,
        stabilized=not args.no_stabilize,
        s=s,
    )
    profile = diagnostics.SpectralProfile.from_matrix(a)
    stage: dict[str, float] = {}
    saved: dict[str, np.ndarray] = {}
    t0 = time.perf_counter()
    if args.method in ("classical-randsvd", "sketched-randsvd"):
        if args.method == "classical-randsvd":
            q_basis = power.range_finder_classical(
                a, args.k, r2, q, args.seed, stabilized=spec.stabilized
            )
        else:
            q_basis = power.range_finder_sketched(a, spec)
        stage["rangefinder"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        u, sigma, v = power.randsvd(a, q_basis)
        stage["svd_assembly"] = time.perf_counter() - t1
        spec_err, frob_err = diagnostics.projection_residuals(a, q_basis)
        saved = {"U": u, "sigma": sigma.reshape(1, -1), "V": v}
    elif args.method in ("lowrank-factorize", "lowrank-factorize-unsketched"):
        if args.method == "lowrank-factorize-unsketched":
            spec = power.RangeFinderSpec(
                k=args.k,
                l=spec.l,
                r1=n,
                r2=r2,
                q=q,
                eps=args.eps,
                sketch_kind="identity",
                seed=args.seed,
                stabilized=spec.stabilized,
                s=s,
                s2_kind=args.sketch,
                s2_r=r1,
            )
        result = power.lowrank_factorize(a, spec)
        stage.update(result.elapsed)
        spec_err, frob_err = diagnostics.approximation_residuals(a, result.Y @ result.X)
        saved = {"Y": result.Y, "X": result.X}
    elif args.method == "nystrom":
        result = power.nystrom_psd(a, spec)
        stage.update(result.elapsed)
        spec_err, frob_err = diagnostics.approximation_residuals(
            a, result.C @ (pinv(result.W) @ result.C.T)
        )
        saved = {"C": result.C, "W": result.W}
    else:
        raise ValueError(f"unknown method {args.method!r}")
    if profile.values[args.k] > 0.0:
        rel_err = diagnostics.relative_error(spec_err, profile, args.k)
    else:
        rel_err = float("nan")  # exactly rank-k input: sigma_{k+1} vanishes

    _print_kv(
        method=args.method,
        m=m,
        n=n,
        k=args.k,
        l=spec.l,
        r1=spec.r1,
        r2=spec.r2,
        q=spec.q,
        s=s,
        sketch=args.sketch,
        seed=args.seed,
        spec_err=float(spec_err),
        frob_err=float(frob_err),
        rel_err=float(rel_err),
    )
    for name, seconds in stage.items():
        _print_kv(**{f"stage_{name}_ms": seconds * 1e3})
    if args.save_prefix:
        for name, matrix in saved.items():
            path = f"{args.save_prefix}.{name}.skpw"
            data_io.write_binary(np.atleast_2d(matrix), path)
            print(f"saved={path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _cmd_bench(args) -> int:
    values: dict = {}
    if args.config:
        values.update(bench_mod.parse_config_file(args.config))
    overrides = {
        "dataset": args.data,
        "label": args.label,
        "methods": args.methods,
        "k": args.k,
        "l_values": args.l_values,
        "eps": args.eps,
        "q_max": args.q_max,
        "trials": args.trials,
        "root_seed": args.seed,
        "sketch_kind": args.sketch,
        "s": args.s,
        "output": args.out,
        "workers": args.workers,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    cfg = bench_mod.config_from_mapping(values)

    def progress(rec):
        print(
            f"done method={rec.method} l={rec.l} trial={rec.trial} "
            f"q_max={rec.q_iter} time_ms={rec.time_ms:.1f} rel_err={rec.rel_err:.4g}",
            flush=True,
        )

    records = bench_mod.run_benchmark(cfg, progress=progress if args.verbose else None)
    print(f"wrote {len(records)} records to {cfg.output_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _cmd_verify(args) -> int:
    a = _load_matrix(args.data)
    m, n = a.shape
    if m > 2000:
        raise ValueError(
            f"matrix has {m} rows; the certifier is desk-scale only (m <= 2000) -- "
            "truncate or subsample the input"
        )
    profile = diagnostics.SpectralProfile.from_matrix(a)
    lam = diagnostics.regularization_level(profile, args.k)
    if args.r is not None:
        r = args.r
    elif args.sketch == "countsketch":
        r = sketching.countsketch_size(args.k, args.eps, args.delta, args.c)[0]
    else:
        r = sketching.sketch_size(args.sketch, args.k, args.eps, args.delta, args.c, n=n)
    passes = 0
    worst = 0.0
    for trial in range(args.trials):
        sk = sketching.make_sketch(
            args.sketch, n, r, sketching.substream(args.seed, trial), s=args.s
        )
        report = diagnostics.certify_spectral_approx(a, sk.apply_right(a), lam, args.eps)
        passes += report.holds
        worst = max(worst, report.measured)
    rate = passes / args.trials
    _print_kv(
        sketch=args.sketch,
        r=r,
        k=args.k,
        eps=args.eps,
        lam=float(lam),
        trials=args.trials,
        pass_rate=float(rate),
        worst_measured=float(worst),
        threshold=float(args.threshold),
    )
    return EXIT_OK if rate >= args.threshold else EXIT_VERIFY_FAIL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="skpower", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic matrix file")
    gen.add_argument("kind", choices=["polydecay", "expdecay", "lowrank"])
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--rate", type=float, default=0.1, help="expdecay rate")
    gen.add_argument("--rank", type=int, default=10, help="lowrank rank")
    gen.add_argument("--noise", type=float, default=0.0, help="lowrank noise level")
    gen.add_argument("--out", required=True, help="output .skpw path")
    gen.set_defaults(func=_cmd_gen)

    run = sub.add_parser("run", help="run one algorithm once and print errors")
    run.add_argument("--data", required=True, help=".skpw or MatrixMarket file")
    run.add_argument("--method", required=True, choices=list(bench_mod.METHODS))
    run.add_argument("--k", type=int, required=True)
    run.add_argument("--l", type=int)
    run.add_argument("--eps", type=float, default=0.5)
    run.add_argument("--delta", type=float, default=0.1)
    run.add_argument("--c", type=float, default=2.0, help="sketch-size multiplier")
    run.add_argument("--r1", type=int, help="explicit primary sketch size")
    run.add_argument("--r2", type=int, help="explicit block size")
    run.add_argument("--q", type=int, help="explicit power-iteration count")
    run.add_argument("--sketch", default="countsketch", choices=list(sketching.SKETCH_KINDS))
    run.add_argument("--s", type=int, help="countsketch non-zeros per row")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--no-stabilize", action="store_true")
    run.add_argument("--save-prefix", help="write factors as <prefix>.<name>.skpw")
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="error-vs-time benchmark, records to CSV")
    bench.add_argument("--config", help="flat key=value config file")
    bench.add_argument("--data", help="dataset path or synthetic recipe")
    bench.add_argument("--label")
    bench.add_argument("--methods", help="comma-separated method list")
    bench.add_argument("--k", type=int)
    bench.add_argument("--l-values", dest="l_values", help="comma-separated sketch sizes")
    bench.add_argument("--eps", type=float)
    bench.add_argument("--q-max", dest="q_max", type=int)
    bench.add_argument("--trials", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--sketch", choices=list(sketching.SKETCH_KINDS))
    bench.add_argument("--s", type=int)
    bench.add_argument("--out")
    bench.add_argument("--workers", type=int)
    bench.add_argument("--verbose", action="store_true")
    bench.set_defaults(func=_cmd_bench)

    verify = sub.add_parser("verify", help="certify regularized spectral approximation")
    verify.add_argument("--data", required=True)
    verify.add_argument("--sketch", default="gaussian", choices=list(sketching.SKETCH_KINDS))
    verify.add_argument("--k", type=int, required=True)
    verify.add_argument("--eps", type=float, default=0.5)
    verify.add_argument("--delta", type=float, default=0.1)
    verify.add_argument("--c", type=float, default=2.0)
    verify.add_argument("--r", type=int, help="explicit sketch size (overrides sizing rule)")
    verify.add_argument("--s", type=int, default=1)
    verify.add_argument("--trials", type=int, default=50)
    verify.add_argument("--threshold", type=float, default=0.9)
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"skpower: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
