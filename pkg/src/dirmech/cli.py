"""Command-line front door: every pipeline behind one executable.

Subcommands: copula-test, round, psi, odrs, schedule, certify,
constants, gen.  All randomized runs are seeded (flag, else the
DIRMECH_SEED environment variable, else 0) and every artifact embeds the
seed, trial count, and parameter echo, so a report can be reproduced
byte-for-byte from its own header (up to the timestamp field).

Exit codes: 0 success, 1 input validation failure, 2 statistical or
certification failure, 64 bad flags.

--threads N runs Monte Carlo chunks (and certification boxes) on a
worker pool; the chunk decomposition is fixed independently of N, so
output is identical for every N and N=1 is the reference execution.
"""

import argparse
import csv
import io
import json
import os
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import online, psi, rounding, scheduling
from .certify import certify_region, small_g_factors
from .copula import dirichlet_copula_batch, psi_mc_oracle
from .randomness import DirichletParams, RngState
from .scheduling import SchedulingInstance, analysis_constants

__all__ = ["main"]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2
EXIT_USAGE = 64

# Monte Carlo work is split into fixed-size chunks regardless of thread
# count so outputs are thread-count invariant
CHUNK = 200_000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _version():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return "unknown"


def _read_input(path):
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _chunked(trials, rng, worker, threads):
    """Run worker(sub_rng, chunk_size) over a fixed chunk decomposition,
    optionally on a thread pool; results returned in chunk order."""
    sizes = [CHUNK] * (trials // CHUNK)
    if trials % CHUNK:
        sizes.append(trials % CHUNK)
    subs = rng.split(len(sizes))
    if threads <= 1:
        return [worker(s, n) for s, n in zip(subs, sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, subs, sizes))


def _emit(args, header, rows, row_fields):
    """Write the artifact: JSON object or CSV with a commented header."""
    out = sys.stdout if args.out == "-" else open(args.out, "w")
    try:
        if args.format == "json":
            json.dump({"header": header, "rows": rows}, out, indent=2)
            out.write("\n")
        else:
            for key, val in header.items():
                out.write(f"# {key}={val}\n")
            writer = csv.DictWriter(out, fieldnames=row_fields)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: row.get(k, "") for k in row_fields})
    finally:
        if out is not sys.stdout:
            out.close()


def _header(args, **extra):
    h = {
        "subcommand": args.cmd,
        "seed": args.seed,
        "version": _version(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if hasattr(args, "trials"):
        h["trials"] = args.trials
    h.update(extra)
    return h


def _cmd_copula_test(args):
    from scipy import stats as sp_stats

    rho = [float(v) for v in args.rho.split(",")]
    try:
        params = DirichletParams(rho)
    except ValueError as exc:
        print(f"invalid rho: {exc}", file=sys.stderr)
        return EXIT_INVALID
    rng = RngState(args.seed)

    def worker(sub, n):
        return dirichlet_copula_batch(params, n, sub).A

    A = np.concatenate(_chunked(args.trials, rng, worker, args.threads))
    rows = []
    worst_p = 1.0
    for i, r in enumerate(rho):
        stat, pval = sp_stats.kstest(A[:, i], "uniform")
        worst_p = min(worst_p, pval)
        rows.append({"column": i, "rho": r, "ks_stat": stat, "ks_pvalue": pval})
    for i in range(len(rho)):
        for j in range(i + 1, len(rho)):
            cov = float(np.cov(A[:, i], A[:, j])[0, 1])
            rows.append({"column": f"{i}x{j}", "rho": "", "ks_stat": "", "ks_pvalue": "", "cov": cov})
    _emit(args, _header(args, rho=rho, worst_ks_pvalue=worst_p),
          rows, ["column", "rho", "ks_stat", "ks_pvalue", "cov"])
    return EXIT_OK if worst_p >= 1e-6 else EXIT_FAILED


def _cmd_round(args):
    try:
        inst = rounding.BipartiteInstance.from_json(_read_input(args.input))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        return EXIT_INVALID
    violations = rounding.validate_instance(inst)
    if violations:
        for v in violations:
            print(f"invalid instance: {v}", file=sys.stderr)
        return EXIT_INVALID
    rng = RngState(args.seed)

    def worker(sub, n):
        return rounding.dep_round_batch(inst, n, sub)

    X = np.concatenate(_chunked(args.trials, rng, worker, args.threads))
    stats = rounding.selection_stats(inst, X)
    rows = [
        {
            "kind": s.kind,
            "ids": "/".join(map(str, s.ids)),
            "empirical": s.empirical,
            "bound": s.bound,
            "half_width": s.half_width,
            "passed": s.passed,
        }
        for s in stats
    ]
    ok = all(s.passed for s in stats)
    _emit(args, _header(args, input=args.input, all_passed=ok),
          rows, ["kind", "ids", "empirical", "bound", "half_width", "passed"])
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_psi(args):
    try:
        query = psi.PsiQuery(args.x1, args.x2, args.rho1, args.rho2)
    except ValueError as exc:
        print(f"invalid query: {exc}", file=sys.stderr)
        return EXIT_INVALID
    upper = psi.psi_upper_bound(query, args.k, args.k)
    lower = psi.psi_partial_sum(query, args.jmax)
    row = {"x1": args.x1, "x2": args.x2, "rho1": args.rho1, "rho2": args.rho2,
           "lower": lower, "upper": upper}
    if args.trials > 0:
        est, hw = psi_mc_oracle(args.x1, args.x2, args.rho1, args.rho2,
                                args.trials, RngState(args.seed))
        row["mc_estimate"] = est
        row["mc_half_width"] = hw
    _emit(args, _header(args, k=args.k, jmax=args.jmax), [row],
          list(row.keys()))
    return EXIT_OK


def _cmd_odrs(args):
    try:
        stream = online.MatchingStream.from_json(_read_input(args.input))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"invalid stream: {exc}", file=sys.stderr)
        return EXIT_INVALID
    violations = stream.validate()
    if violations:
        for v in violations:
            print(f"invalid stream: {v}", file=sys.stderr)
        return EXIT_INVALID
    rng = RngState(args.seed)
    params = online.OnlineParams()

    def worker(sub, n):
        committed, _, schedule = online.run_odrs_batch(stream, n, sub, params)
        return committed

    chunks = _chunked(args.trials, rng, worker, args.threads)
    committed = np.concatenate(chunks)
    _, _, schedule = online.run_odrs_batch(stream, 1, RngState(args.seed), params)
    rows = []
    ok = True
    e = 0
    for v, edges in schedule:
        for (u, g, r, y, rho, x, _) in edges:
            emp = float(committed[:, e].mean())
            target = 0.68 * g
            hw = 4.0 * float(np.sqrt(max(emp * (1 - emp), 0.0) / args.trials))
            passed = bool(emp >= target - hw)
            ok = ok and passed
            rows.append({"arrival": v, "offline": u, "g": g, "x": x,
                         "empirical": emp, "floor": target,
                         "half_width": hw, "passed": passed})
            e += 1
    _emit(args, _header(args, input=args.input, all_passed=ok),
          rows, ["arrival", "offline", "g", "x", "empirical", "floor",
                 "half_width", "passed"])
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_schedule(args):
    try:
        inst = SchedulingInstance.from_json(_read_input(args.input))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        return EXIT_INVALID
    violations = scheduling.validate_scheduling_instance(inst)
    if violations:
        for v in violations:
            print(f"invalid instance: {v}", file=sys.stderr)
        return EXIT_INVALID
    rng = RngState(args.seed)
    assign, orders, objective = scheduling.schedule(inst, rng)
    rows = [{"job": j, "machine": int(assign[j])} for j in range(inst.jobs)]
    extra = {"objective": objective}
    if args.trials > 0:
        i_star = args.i_star
        j_star = args.j_star if args.j_star >= 0 else inst.jobs - 1
        n_off = max(1, args.trials // 20)
        rep = scheduling.z_and_lb(inst, i_star, j_star, rng,
                                  n_offsets=n_off, rounds_per_offset=20)
        extra.update({"i_star": i_star, "j_star": j_star, **rep,
                      "z_over_lb": rep["z_mean"] / rep["lb"] if rep["lb"] > 0 else ""})
    _emit(args, _header(args, input=args.input, **extra),
          rows, ["job", "machine"])
    return EXIT_OK


def _parse_range(text):
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def _cmd_certify(args):
    try:
        r1 = _parse_range(args.r1)
        r2 = _parse_range(args.r2)
        g1 = _parse_range(args.g1)
        g2 = _parse_range(args.g2)
    except ValueError:
        print("ranges must be lo,hi", file=sys.stderr)
        return EXIT_INVALID
    try:
        report = certify_region(r1, r2, g1, g2, args.epsilon, args.c,
                                max_depth=args.depth)
    except ValueError as exc:
        print(f"invalid region: {exc}", file=sys.stderr)
        return EXIT_INVALID
    ceiling, binom_factor = small_g_factors(0.003)
    rows = [{
        "boxes_checked": report.boxes_checked,
        "boxes_passed": report.boxes_passed,
        "worst_bound": report.worst_bound,
        "worst_box": repr(report.worst_box),
        "passed": report.passed,
        "runtime": report.runtime,
        "small_g_ceiling": ceiling,
        "small_g_binom": binom_factor,
        "small_g_product": ceiling * binom_factor,
    }]
    _emit(args, _header(args, region=report.region, epsilon=args.epsilon,
                        c=args.c, depth=args.depth),
          rows, list(rows[0].keys()))
    return EXIT_OK if report.passed else EXIT_FAILED


def _cmd_constants(args):
    rep = analysis_constants()
    checks = ["c1_ok", "c2_ok", "c3_ok", "c6_ok", "ratio_ok"]
    rows = [{k: v for k, v in rep.items() if k != "constants"}]
    ok = all(rep[c] for c in checks)
    rows[0]["all_passed"] = "PASS" if ok else "FAIL"
    _emit(args, _header(args), rows, list(rows[0].keys()))
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_gen(args):
    rng = RngState(args.seed)
    if args.kind == "bipartite":
        inst = _gen_bipartite(args.n_left, args.n_right, rng)
        text = inst.to_json()
    elif args.kind == "stream":
        stream = online.gen_uniform_stream(args.n_left, args.n_right, rng)
        text = stream.to_json()
    elif args.kind == "scheduling":
        inst = scheduling.gen_random_scheduling_instance(
            args.n_left, args.n_right, rng
        )
        text = inst.to_json()
    else:
        print(f"unknown kind {args.kind}", file=sys.stderr)
        return EXIT_INVALID
    if args.out == "-":
        print(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def _gen_bipartite(n_left, n_right, rng):
    """Random feasible instance: per-right x masses on a sub-simplex and
    per-left rho masses scaled under 1."""
    gen = rng.generator
    left = [f"u{i}" for i in range(n_left)]
    right = [f"v{j}" for j in range(n_right)]
    edges = []
    x_by_right = {v: 0.0 for v in right}
    rho_by_left = {u: 0.0 for u in left}
    raw = []
    for u in left:
        for v in right:
            if gen.random() < 0.6:
                raw.append((u, v, gen.random(), gen.random()))
    for u, v, x, rho in raw:
        x_by_right[v] += x
        rho_by_left[u] += rho
    for u, v, x, rho in raw:
        xs = x / max(x_by_right[v], 1.0)
        rs = rho / max(rho_by_left[u], 1.0) * 0.95
        edges.append((u, v, xs, rs))
    return rounding.BipartiteInstance(left=left, right=right, edges=edges)


def _add_common(p, trials_default=None):
    p.add_argument("--seed", type=int,
                   default=int(os.environ.get("DIRMECH_SEED", "0")))
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.add_argument("--out", default="-")
    p.add_argument("--threads", type=int, default=1)
    if trials_default is not None:
        p.add_argument("--trials", type=int, default=trials_default)


def build_parser():
    parser = _Parser(prog="dirmech")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("copula-test", help="uniformity/correlation self-test")
    p.add_argument("--rho", required=True, help="comma-separated rho vector")
    _add_common(p, trials_default=100_000)

    p = sub.add_parser("round", help="dependent rounding + statistics report")
    p.add_argument("--in", dest="input", required=True)
    _add_common(p, trials_default=100_000)

    p = sub.add_parser("psi", help="correlation function bounds")
    p.add_argument("--x1", type=float, required=True)
    p.add_argument("--x2", type=float, required=True)
    p.add_argument("--rho1", type=float, required=True)
    p.add_argument("--rho2", type=float, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--jmax", type=int, default=20)
    _add_common(p, trials_default=0)

    p = sub.add_parser("odrs", help="online matching run")
    p.add_argument("--in", dest="input", required=True)
    _add_common(p, trials_default=100_000)

    p = sub.add_parser("schedule", help="clustered scheduling pipeline")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--i-star", type=int, default=0)
    p.add_argument("--j-star", type=int, default=-1)
    _add_common(p, trials_default=0)

    p = sub.add_parser("certify", help="box certification run")
    p.add_argument("--r1", default="0,1")
    p.add_argument("--r2", default="0,1")
    p.add_argument("--g1", default="0.3,1")
    p.add_argument("--g2", default="0.3,1")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--c", type=float, default=0.3947)
    p.add_argument("--depth", type=int, default=20)
    _add_common(p)

    p = sub.add_parser("constants", help="analysis constants report")
    _add_common(p)

    p = sub.add_parser("gen", help="instance generators")
    p.add_argument("--kind", choices=["bipartite", "stream", "scheduling"],
                   required=True)
    p.add_argument("--n-left", type=int, default=5,
                   help="left nodes / offline nodes / machines")
    p.add_argument("--n-right", type=int, default=5,
                   help="right nodes / arrivals / jobs")
    _add_common(p)
    return parser


_DISPATCH = {
    "copula-test": _cmd_copula_test,
    "round": _cmd_round,
    "psi": _cmd_psi,
    "odrs": _cmd_odrs,
    "schedule": _cmd_schedule,
    "certify": _cmd_certify,
    "constants": _cmd_constants,
    "gen": _cmd_gen,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    return _DISPATCH[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
