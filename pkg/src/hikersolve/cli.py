"""Command-line entry point and JSON reporting.

Every subcommand prints one JSON report to stdout (schema version
``hikersolve-report-1``; absent sections are omitted, never null) and
fails with a single machine-parsable ``ERROR: ...`` line on stderr and a
nonzero exit status. Vector files (weights, right-hand sides, labels,
solutions) are PTS1 files with d = 1.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import data, krylov, oracle, skeleton, solver, treecode
from . import tree as tree_mod
from .config import Config, apply_overrides, parse_config_file
from .kernels import eval_block

REPORT_VERSION = "hikersolve-report-1"

_SHAPE_ALIASES = {
    "cube": "uniform_cube",
    "sphere": "sphere_surface",
    "mixture": "gaussian_mixture",
}

# the standard verification instance: d=3 unit cube, a moderately wide
# gaussian, exact sampling, tight tolerance
VERIFY_DEFAULTS = dict(
    kernel="gaussian", h=0.3, lam=1e-2, tau=1e-7,
    sample_mode="exact", max_rank=384,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"ERROR: {message}\n")


def _add_config_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)


def _add_kernel_flags(p):
    p.add_argument("--kernel", choices=("gaussian", "laplace3d", "polynomial"))
    p.add_argument("--h", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--shift", type=float)
    p.add_argument("--lambda", dest="lam", type=float)


def _add_build_flags(p):
    p.add_argument("--leaf", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--max-rank", dest="max_rank", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--sample-mode", dest="sample_mode",
                   choices=skeleton.SAMPLE_MODES)
    p.add_argument("--knn", type=int)


def _add_points_flags(p):
    p.add_argument("--points", required=True)
    p.add_argument("--normalize", choices=("unit-box",))


def _add_krylov_flags(p):
    p.add_argument("--tol", type=float)
    p.add_argument("--maxiter", type=int)
    p.add_argument("--restart", type=int)


def build_parser():
    parser = _Parser(prog="hikersolve")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate a synthetic point set")
    p.add_argument("--shape", required=True,
                   choices=sorted(set(_SHAPE_ALIASES) | set(data.SHAPES)))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    _add_config_flags(p)

    p = sub.add_parser("build", help="tree + skeletons, emit statistics")
    _add_points_flags(p)
    _add_build_flags(p)
    _add_kernel_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-stats")

    p = sub.add_parser("matvec", help="fast kernel summation")
    _add_points_flags(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--out")
    p.add_argument("--verify", action="store_true",
                   help="compare against the dense oracle (n <= 4096)")
    _add_build_flags(p)
    _add_kernel_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-stats")

    p = sub.add_parser("factor", help="factorize and emit statistics")
    _add_points_flags(p)
    _add_build_flags(p)
    _add_kernel_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-stats")

    p = sub.add_parser("solve", help="solve (Ktilde + lambda I) x = b")
    _add_points_flags(p)
    p.add_argument("--rhs", required=True)
    p.add_argument("--method", choices=("direct", "hybrid"), default="direct")
    p.add_argument("--operator", choices=("compressed", "dense"),
                   default="compressed")
    p.add_argument("--out")
    _add_krylov_flags(p)
    _add_build_flags(p)
    _add_kernel_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-stats")

    p = sub.add_parser("krr", help="kernel ridge regression")
    p.add_argument("--train", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--test")
    p.add_argument("--test-labels", dest="test_labels")
    p.add_argument("--normalize", choices=("unit-box",))
    p.add_argument("--method", choices=("direct", "hybrid"), default="direct")
    p.add_argument("--operator", choices=("compressed", "dense"),
                   default="compressed")
    p.add_argument("--out-weights", dest="out_weights")
    p.add_argument("--out-pred", dest="out_pred")
    _add_krylov_flags(p)
    _add_build_flags(p)
    _add_kernel_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-stats")

    p = sub.add_parser("bench", help="scaling benchmark")
    p.add_argument("--sizes", default="")
    p.add_argument("--dense-sizes", dest="dense_sizes", default="")
    p.add_argument("--shape", default="cube",
                   choices=sorted(set(_SHAPE_ALIASES) | set(data.SHAPES)))
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--repeats", type=int, default=5)
    _add_build_flags(p)
    _add_kernel_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-stats")

    p = sub.add_parser("verify", help="oracle error metrics on a standard instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--d", type=int, default=3)
    _add_build_flags(p)
    _add_kernel_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-stats")

    return parser


def _resolve_config(args, base=None):
    cfg = base or Config()
    if getattr(args, "config", None):
        cfg = parse_config_file(args.config, base=cfg)
    explicit = {k: v for k, v in vars(args).items() if v is not None}
    return apply_overrides(cfg, explicit)


def _load_points(args):
    ps = data.load_points(args.points)
    if getattr(args, "normalize", None) == "unit-box":
        ps = data.normalize_unit_box(ps)
    return ps


def _build_stage(cfg, ps):
    """tree, skeletons, operator, and per-phase wall times."""
    kernel = cfg.kernel_spec()
    threads = cfg.effective_threads()
    timings = {}
    t0 = time.perf_counter()
    tr = tree_mod.build_tree(ps, cfg.leaf, seed=cfg.seed)
    timings["build"] = time.perf_counter() - t0

    knn = None
    if cfg.sample_mode == "knn_augmented":
        t0 = time.perf_counter()
        knn = tree_mod.knn_bruteforce(tr.points, min(cfg.knn, tr.n - 1))
        timings["knn"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    skels = skeleton.build_skeletons(
        tr, kernel, cfg.skeleton_config(), knn=knn, threads=threads
    )
    timings["skeletonize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    op = treecode.build_operator(tr, skels, kernel)
    timings["assemble"] = time.perf_counter() - t0
    return tr, skels, op, timings


def _make_report(cfg, command, extra_echo=None, timings=None, ranks=None,
                 errors=None, krylov_report=None):
    echo = {"command": command, **cfg.echo()}
    if extra_echo:
        echo.update(extra_echo)
    report = {"version": REPORT_VERSION, "config_echo": echo}
    if timings:
        report["timings"] = {k: float(v) for k, v in timings.items()}
    if ranks:
        report["ranks"] = {str(k): int(v) for k, v in ranks.items()}
    if errors:
        report["errors"] = {k: float(v) for k, v in errors.items()}
    if krylov_report is not None:
        report["krylov"] = {
            "iterations": int(krylov_report.iterations),
            "residuals": [float(r) for r in krylov_report.residuals],
        }
    return report


def _flatten_metrics(metrics):
    flat = {}
    for key, value in metrics.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                flat[f"{key}_L{sub}"] = v
        else:
            flat[key] = value
    return flat


def _cmd_gen(args):
    cfg = _resolve_config(args)
    shape = _SHAPE_ALIASES.get(args.shape, args.shape)
    t0 = time.perf_counter()
    ps = data.generate(shape, args.n, cfg.seed, d=args.d,
                       k_clusters=args.clusters)
    data.save_points(ps, args.out, format=args.format)
    timings = {"generate": time.perf_counter() - t0}
    extra = {"shape": shape, "n": args.n, "d": args.d, "out": args.out}
    return _make_report(cfg, "gen", extra_echo=extra, timings=timings)


def _cmd_build(args):
    cfg = _resolve_config(args)
    ps = _load_points(args)
    tr, skels, _, timings = _build_stage(cfg, ps)
    ranks = skels.max_rank_per_level(tr)
    extra = {"points": args.points, "n": ps.n, "d": ps.d}
    return _make_report(cfg, "build", extra_echo=extra, timings=timings,
                        ranks=ranks)


def _cmd_matvec(args):
    cfg = _resolve_config(args)
    ps = _load_points(args)
    w = data.load_vector(args.weights)
    if w.shape[0] != ps.n:
        raise ValueError(
            f"weights length {w.shape[0]} does not match n={ps.n}"
        )
    tr, skels, op, timings = _build_stage(cfg, ps)
    t0 = time.perf_counter()
    u_tree = treecode.hmatvec(op, w[tr.perm], cfg.lam)
    timings["matvec"] = time.perf_counter() - t0
    u = np.empty_like(u_tree)
    u[tr.perm] = u_tree
    if args.out:
        data.save_vector(u, args.out)
    errors = {}
    if args.verify:
        if ps.n > treecode.MATERIALIZE_MAX_POINTS:
            raise ValueError(
                f"--verify is limited to n <= {treecode.MATERIALIZE_MAX_POINTS}"
            )
        dense = oracle.dense_kernel_matrix(cfg.kernel_spec(), tr.points, cfg.lam)
        ref = dense @ w[tr.perm]
        errors["matvec_relerr"] = (
            np.linalg.norm(u_tree - ref) / np.linalg.norm(ref)
        )
    extra = {"points": args.points, "n": ps.n, "d": ps.d}
    return _make_report(cfg, "matvec", extra_echo=extra, timings=timings,
                        ranks=skels.max_rank_per_level(tr),
                        errors=errors or None)


def _factorize_stage(cfg, tr, op, timings):
    t0 = time.perf_counter()
    f = solver.factorize(op, cfg.lam, threads=cfg.effective_threads())
    timings["factorize"] = time.perf_counter() - t0
    return f


def _cmd_factor(args):
    cfg = _resolve_config(args)
    ps = _load_points(args)
    tr, skels, op, timings = _build_stage(cfg, ps)
    f = _factorize_stage(cfg, tr, op, timings)
    for level, seconds in f.level_seconds.items():
        timings[f"factorize_level{level}"] = seconds
    errors = {
        f"z_cond_L{level}": cond
        for level, cond in f.z_cond_per_level().items()
    }
    extra = {"points": args.points, "n": ps.n, "d": ps.d}
    return _make_report(cfg, "factor", extra_echo=extra, timings=timings,
                        ranks=skels.max_rank_per_level(tr),
                        errors=errors or None)


def _cmd_solve(args):
    cfg = _resolve_config(args)
    ps = _load_points(args)
    b = data.load_vector(args.rhs)
    if b.shape[0] != ps.n:
        raise ValueError(f"rhs length {b.shape[0]} does not match n={ps.n}")
    tr, skels, op, timings = _build_stage(cfg, ps)
    f = _factorize_stage(cfg, tr, op, timings)
    kr = None
    t0 = time.perf_counter()
    if args.method == "direct":
        x = solver.solve(f, b)
    else:
        mode = "dense_oracle" if args.operator == "dense" else "compressed"
        x_tree, kr = krylov.hybrid_solve(
            op, f, b[tr.perm], tol=cfg.tol, max_iter=cfg.maxiter,
            restart=cfg.restart, operator_mode=mode,
        )
        x = np.empty_like(x_tree)
        x[tr.perm] = x_tree
    timings["solve"] = time.perf_counter() - t0
    if args.out:
        data.save_vector(x, args.out)
    resid = treecode.hmatvec(op, x[tr.perm], cfg.lam) - b[tr.perm]
    errors = {"residual_vs_Ktilde": np.linalg.norm(resid) / np.linalg.norm(b)}
    if kr is not None:
        errors["final_residual"] = kr.final_residual
    extra = {"points": args.points, "n": ps.n, "d": ps.d,
             "method": args.method}
    return _make_report(cfg, "solve", extra_echo=extra, timings=timings,
                        ranks=skels.max_rank_per_level(tr), errors=errors,
                        krylov_report=kr)


def _cmd_krr(args):
    cfg = _resolve_config(args)
    train = data.load_points(args.train)
    if args.normalize == "unit-box":
        train = data.normalize_unit_box(train)
    y = data.load_vector(args.labels)
    if y.shape[0] != train.n:
        raise ValueError(f"labels length {y.shape[0]} does not match n={train.n}")
    tr, skels, op, timings = _build_stage(cfg, train)
    f = _factorize_stage(cfg, tr, op, timings)
    kr = None
    t0 = time.perf_counter()
    if args.method == "direct":
        w_tree = solver.solve(f, y[tr.perm], in_tree_order=True)
    else:
        mode = "dense_oracle" if args.operator == "dense" else "compressed"
        w_tree, kr = krylov.hybrid_solve(
            op, f, y[tr.perm], tol=cfg.tol, max_iter=cfg.maxiter,
            restart=cfg.restart, operator_mode=mode,
        )
    timings["fit"] = time.perf_counter() - t0
    w = np.empty_like(w_tree)
    w[tr.perm] = w_tree
    if args.out_weights:
        data.save_vector(w, args.out_weights)

    pred_train = treecode.hmatvec(op, w_tree, 0.0)
    errors = {
        "rmse_train": float(
            np.sqrt(np.mean((pred_train - y[tr.perm]) ** 2))
        )
    }
    if args.test:
        test = data.load_points(args.test)
        if args.normalize == "unit-box":
            test = data.normalize_unit_box(test)
        pred_test = _cross_predict(cfg.kernel_spec(), test, tr.points, w_tree)
        if args.out_pred:
            data.save_vector(pred_test, args.out_pred)
        if args.test_labels:
            y_test = data.load_vector(args.test_labels)
            if y_test.shape[0] != test.n:
                raise ValueError(
                    f"test labels length {y_test.shape[0]} does not match "
                    f"n={test.n}"
                )
            errors["rmse_test"] = float(
                np.sqrt(np.mean((pred_test - y_test) ** 2))
            )
    extra = {"train": args.train, "n": train.n, "d": train.d,
             "method": args.method}
    return _make_report(cfg, "krr", extra_echo=extra, timings=timings,
                        ranks=skels.max_rank_per_level(tr), errors=errors,
                        krylov_report=kr)


def _cross_predict(kernel, test, train_points, w_tree, chunk=1024):
    out = np.empty(test.n)
    for lo in range(0, test.n, chunk):
        hi = min(lo + chunk, test.n)
        out[lo:hi] = eval_block(
            kernel, test.coords[lo:hi], train_points.coords
        ) @ w_tree
    return out


def _parse_sizes(text):
    return [int(s) for s in text.split(",") if s.strip()]


def _cmd_bench(args):
    cfg = _resolve_config(args)
    sizes = _parse_sizes(args.sizes)
    dense_sizes = _parse_sizes(args.dense_sizes)
    if not sizes and not dense_sizes:
        raise ValueError("bench needs --sizes and/or --dense-sizes")
    shape = _SHAPE_ALIASES.get(args.shape, args.shape)
    bench_cfg = _BenchConfig(shape, args.d, cfg.kernel_spec())
    result = oracle.scaling_benchmark(
        sizes, bench_cfg, cfg.seed,
        pipeline=standard_pipeline(cfg) if sizes else None,
        dense_sizes=dense_sizes or None,
        solve_repeats=args.repeats,
    )
    timings = {}
    for phase, values in result["timings"].items():
        ns = result["dense_sizes"] if phase.startswith("dense") else result["sizes"]
        for n, secs in zip(ns, values):
            timings[f"{phase}_n{n}"] = secs
    errors = {
        f"exponent_{phase}": p for phase, p in result["exponents"].items()
    }
    extra = {"sizes": result["sizes"], "shape": shape, "d": args.d}
    if dense_sizes:
        extra["dense_sizes"] = dense_sizes
    return _make_report(cfg, "bench", extra_echo=extra, timings=timings,
                        errors=errors)


class _BenchConfig:
    def __init__(self, shape, d, kernel):
        self.shape = shape
        self.d = d
        self.kernel = kernel


def standard_pipeline(cfg):
    """The fast-path stages, packaged for oracle.scaling_benchmark."""
    kernel = cfg.kernel_spec()
    threads = cfg.effective_threads()

    def build(ps):
        return tree_mod.build_tree(ps, cfg.leaf, seed=cfg.seed)

    def skeletonize(tr):
        knn = None
        if cfg.sample_mode == "knn_augmented":
            knn = tree_mod.knn_bruteforce(tr.points, min(cfg.knn, tr.n - 1))
        return skeleton.build_skeletons(
            tr, kernel, cfg.skeleton_config(), knn=knn, threads=threads
        )

    def assemble(tr, skels):
        return treecode.build_operator(tr, skels, kernel)

    def factorize(op):
        return solver.factorize(op, cfg.lam, threads=threads)

    def solve(f, b):
        return solver.solve(f, b, in_tree_order=True)

    return oracle.BenchmarkPipeline(build, skeletonize, assemble, factorize, solve)


def _cmd_verify(args):
    cfg = _resolve_config(args, base=Config(**VERIFY_DEFAULTS))
    ps = data.generate("uniform_cube", args.n, cfg.seed, d=args.d)
    tr, skels, op, timings = _build_stage(cfg, ps)
    f = _factorize_stage(cfg, tr, op, timings)
    t0 = time.perf_counter()
    metrics = oracle.error_report(
        op, f, cfg.kernel_spec(), tr.points, cfg.lam,
        trials=args.trials, seed=cfg.seed,
    )
    timings["verify"] = time.perf_counter() - t0
    extra = {"n": args.n, "d": args.d, "trials": args.trials}
    return _make_report(cfg, "verify", extra_echo=extra, timings=timings,
                        ranks=skels.max_rank_per_level(tr),
                        errors=_flatten_metrics(metrics))


_COMMANDS = {
    "gen": _cmd_gen,
    "build": _cmd_build,
    "matvec": _cmd_matvec,
    "factor": _cmd_factor,
    "solve": _cmd_solve,
    "krr": _cmd_krr,
    "bench": _cmd_bench,
    "verify": _cmd_verify,
}


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(report, indent=2)
    print(text)
    out_stats = getattr(args, "out_stats", None)
    if out_stats:
        with open(out_stats, "w") as fh:
            fh.write(text + "\n")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
