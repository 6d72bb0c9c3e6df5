"""Benchmark command line: generate instances, run solver sweeps, summarize.

``generate`` persists alignment instances as binary containers so sweeps can
be replayed on identical inputs anywhere.  ``run`` executes every
(method, epsilon, size, seed) cell from the shared initialization pi0 = p q^T
and appends one comma-separated row per run; failures are recorded, never
silently dropped.  ``summarize`` averages the per-run rows into the
per-method table layout, with "-" rows for groups where every run failed.
"""

import argparse
import csv
import io
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines, graph_align, ipg

RESULTS_HEADER = [
    "method",
    "epsilon",
    "n",
    "seed",
    "loss",
    "sparsity",
    "feasibility",
    "accuracy",
    "time_s",
    "iters",
    "status",
]
ENTROPIC_METHODS = ("epgd", "ppa", "bapg")
ALL_METHODS = ("ipg", "cg", "epgd", "ppa", "bapg")
STATUS_FAILED = "failed"


@dataclass
class RunConfig:
    """Sweep definition mirroring the CLI flags."""

    sizes: tuple = (100,)
    seeds: int = 20
    p_edge: float = 0.2
    eta: float = 0.1
    methods: tuple = ALL_METHODS
    epsilons: tuple = (1e-3, 1e-2, 1e-1, 1.0)
    max_iter: int = 5000
    tol: float = 1e-9
    gamma_factor: float = 1.01
    alpha: float = 3.0
    output_dir: str = "gwot_out"
    jobs: int = 1

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("need at least one seed")
        if not self.sizes:
            raise ValueError("need at least one problem size")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")


def instance_path(output_dir, n, seed_index):
    return os.path.join(output_dir, f"instance_n{n}_seed{seed_index:03d}.gwai")


def cmd_generate(config, base_seed=0):
    """Write one instance file per (size, seed index); returns the paths."""
    os.makedirs(config.output_dir, exist_ok=True)
    paths = []
    for n in config.sizes:
        for idx in range(config.seeds):
            seed = graph_align.instance_seed(base_seed, idx)
            inst = graph_align.make_instance(n, config.p_edge, config.eta, seed)
            path = instance_path(config.output_dir, n, idx)
            graph_align.save_instance(inst, path)
            paths.append(path)
    return paths


def _expand_grid(config):
    """All (method, epsilon-or-None, n, seed index) cells of the sweep."""
    cells = []
    for n in config.sizes:
        for idx in range(config.seeds):
            for method in config.methods:
                if method in ENTROPIC_METHODS:
                    for eps in config.epsilons:
                        cells.append((method, eps, n, idx))
                else:
                    cells.append((method, None, n, idx))
    return cells


def _run_cell(args):
    """Execute one sweep cell; never raises (failures become failed rows)."""
    path, method, eps, n, idx, max_iter, tol, gamma_factor, alpha = args
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass
    try:
        inst = graph_align.load_instance(path)
        p = inst.p.weights
        q = inst.q.weights
        pi0 = np.outer(p, q)
        c1 = inst.c1.entries
        c2 = inst.c2.entries
        t0 = time.perf_counter()
        if method == "ipg":
            cfg = ipg.IpgConfig(
                gamma_factor=gamma_factor,
                alpha=alpha,
                max_iter=max_iter,
                rel_tol=tol,
                record_shadow=True,
            )
            pi, trace = ipg.ipg_solve(c1, c2, p, q, pi0, cfg)
            elapsed = time.perf_counter() - t0
            if trace.status == ipg.STATUS_INNER_FAILURE:
                raise baselines.SolverFailure("projection inner solver hit its cap")
            ipg.verify_ipg_trace(trace, n, n)
        elif method == "cg":
            pi, trace = baselines.cg_solve(c1, c2, p, q, pi0, max_iter=max_iter, tol=tol)
            elapsed = time.perf_counter() - t0
        else:
            cfg = baselines.EntropicConfig(epsilon=eps, max_iter=max_iter, outer_tol=tol)
            solver = {
                "epgd": baselines.epgd_solve,
                "ppa": baselines.ppa_solve,
                "bapg": baselines.bapg_solve,
            }[method]
            pi, trace = solver(c1, c2, p, q, pi0, cfg)
            elapsed = time.perf_counter() - t0
        metrics = graph_align.evaluate(pi, inst, elapsed, trace.iterations, trace.status)
        return [
            method,
            "" if eps is None else repr(float(eps)),
            str(n),
            str(idx),
            repr(metrics.loss),
            repr(metrics.sparsity),
            repr(metrics.feasibility),
            repr(metrics.accuracy),
            repr(metrics.time_s),
            str(metrics.iters),
            metrics.status,
        ]
    except Exception:
        return [
            method,
            "" if eps is None else repr(float(eps)),
            str(n),
            str(idx),
            "",
            "",
            "",
            "",
            "",
            "",
            STATUS_FAILED,
        ]


def cmd_run(config, base_seed=0, results_name="results.csv"):
    """Run the sweep and write the long-form results file; returns its path.

    Missing instance files are generated on the fly.  Cells run in parallel
    across up to ``config.jobs`` workers (never within a solver); rows are
    written in grid order by a single writer regardless of completion order.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    for n in config.sizes:
        for idx in range(config.seeds):
            path = instance_path(config.output_dir, n, idx)
            if not os.path.exists(path):
                seed = graph_align.instance_seed(base_seed, idx)
                inst = graph_align.make_instance(n, config.p_edge, config.eta, seed)
                graph_align.save_instance(inst, path)

    cells = _expand_grid(config)
    tasks = [
        (
            instance_path(config.output_dir, n, idx),
            method,
            eps,
            n,
            idx,
            config.max_iter,
            config.tol,
            config.gamma_factor,
            config.alpha,
        )
        for (method, eps, n, idx) in cells
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_run_cell, tasks))
    else:
        rows = [_run_cell(task) for task in tasks]

    out_path = os.path.join(config.output_dir, results_name)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        writer.writerows(rows)
    return out_path


def _format_eps(eps_label):
    return eps_label if eps_label else "-"


def summarize_rows(rows):
    """Group rows by (method, epsilon, n) and average metrics over ok runs.

    Returns a list of dicts in deterministic order; groups whose runs all
    failed carry "-" in every metric column and a nonzero failure count.
    """
    groups = {}
    order = []
    for row in rows:
        key = (row["method"], row["epsilon"], int(row["n"]))
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    order.sort(key=lambda k: (k[0], float(k[1]) if k[1] else -1.0, k[2]))

    metric_cols = ["loss", "sparsity", "feasibility", "accuracy", "time_s", "iters"]
    out = []
    for key in order:
        method, eps_label, n = key
        rows_here = groups[key]
        ok = [r for r in rows_here if r["status"] != STATUS_FAILED]
        failed = len(rows_here) - len(ok)
        entry = {
            "method": method,
            "epsilon": _format_eps(eps_label),
            "n": n,
            "ok_runs": len(ok),
            "failed_runs": failed,
        }
        for col in metric_cols:
            if ok:
                entry[col] = float(np.mean([float(r[col]) for r in ok]))
            else:
                entry[col] = "-"
        out.append(entry)
    return out


def render_summary_csv(summary):
    cols = [
        "method",
        "epsilon",
        "n",
        "loss",
        "sparsity",
        "feasibility",
        "accuracy",
        "time_s",
        "iters",
        "ok_runs",
        "failed_runs",
    ]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(cols)
    for entry in summary:
        writer.writerow(
            [entry[c] if isinstance(entry[c], str) else repr(entry[c]) if isinstance(entry[c], float) else str(entry[c]) for c in cols]
        )
    return buf.getvalue()


def render_summary_text(summary):
    cols = ["method", "epsilon", "n", "loss", "sparsity", "feasibility", "accuracy", "time_s", "iters", "ok", "fail"]
    lines = []
    rows = []
    for entry in summary:
        def fmt(col, val):
            if val == "-":
                return "-"
            if col in ("loss", "feasibility"):
                return f"{val:.2e}"
            if col in ("sparsity", "accuracy"):
                return f"{val:.2f}"
            if col == "time_s":
                return f"{val:.2f}"
            if col == "iters":
                return f"{val:.0f}"
            return str(val)

        rows.append(
            [
                entry["method"],
                entry["epsilon"],
                str(entry["n"]),
                fmt("loss", entry["loss"]),
                fmt("sparsity", entry["sparsity"]),
                fmt("feasibility", entry["feasibility"]),
                fmt("accuracy", entry["accuracy"]),
                fmt("time_s", entry["time_s"]),
                fmt("iters", entry["iters"]),
                str(entry["ok_runs"]),
                str(entry["failed_runs"]),
            ]
        )
    widths = [max(len(cols[i]), max((len(r[i]) for r in rows), default=0)) for i in range(len(cols))]
    lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(cols)))
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(cols))))
    return "\n".join(lines) + "\n"


def cmd_summarize(results_path, out_dir=None):
    """Aggregate a results file; writes summary.csv/summary.txt, returns text."""
    with open(results_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_HEADER:
            raise ValueError(
                f"{results_path}: unexpected header {reader.fieldnames}"
            )
        rows = list(reader)
    summary = summarize_rows(rows)
    text = render_summary_text(summary)
    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(results_path))
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write(render_summary_csv(summary))
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(text)
    return text


def _add_common_flags(parser):
    parser.add_argument("--n", type=int, nargs="+", default=[100], help="problem sizes")
    parser.add_argument("--seeds", type=int, default=20, help="instances per size")
    parser.add_argument("--p-edge", type=float, default=0.2, help="edge probability")
    parser.add_argument("--eta", type=float, default=0.1, help="edge flip probability")
    parser.add_argument("--base-seed", type=int, default=0, help="seed-derivation base")
    parser.add_argument("--out", default="gwot_out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gwot",
        description="Gromov-Wasserstein graph-alignment benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate and persist instances")
    _add_common_flags(gen)

    run = sub.add_parser("run", help="run the solver sweep")
    _add_common_flags(run)
    run.add_argument(
        "--methods",
        nargs="+",
        choices=ALL_METHODS,
        default=list(ALL_METHODS),
        help="solvers to run",
    )
    run.add_argument(
        "--epsilons",
        type=float,
        nargs="+",
        default=[1e-3, 1e-2, 1e-1, 1.0],
        help="entropic regularization grid",
    )
    run.add_argument("--max-iter", type=int, default=5000)
    run.add_argument("--tol", type=float, default=1e-9)
    run.add_argument("--gamma-factor", type=float, default=1.01)
    run.add_argument("--alpha", type=float, default=3.0)
    run.add_argument("--jobs", type=int, default=1, help="parallel runs")

    summ = sub.add_parser("summarize", help="aggregate a results file")
    summ.add_argument("results", help="path to results.csv")
    summ.add_argument("--out", default=None, help="directory for summary files")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            config = RunConfig(
                sizes=tuple(args.n),
                seeds=args.seeds,
                p_edge=args.p_edge,
                eta=args.eta,
                output_dir=args.out,
            )
            paths = cmd_generate(config, base_seed=args.base_seed)
            print(f"wrote {len(paths)} instance files under {config.output_dir}")
        elif args.command == "run":
            config = RunConfig(
                sizes=tuple(args.n),
                seeds=args.seeds,
                p_edge=args.p_edge,
                eta=args.eta,
                methods=tuple(args.methods),
                epsilons=tuple(args.epsilons),
                max_iter=args.max_iter,
                tol=args.tol,
                gamma_factor=args.gamma_factor,
                alpha=args.alpha,
                output_dir=args.out,
                jobs=args.jobs,
            )
            out_path = cmd_run(config, base_seed=args.base_seed)
            print(f"results written to {out_path}")
        else:
            print(cmd_summarize(args.results, out_dir=args.out), end="")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
