"""Command-line front end.

Subcommands: basis, state, simulate, optimize-nmr, optimize-cw, simplify,
robustness, stats, verify. Exit codes: 0 on success, 2 on configuration or
usage errors, 3 on numerical failures. ``RINGCTL_THREADS`` sets the default
worker count; every subcommand accepts ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cw import CwOptConfig, informed_multistart, simplify_pulse
from .errors import DomainError, IntegrationError, KrylovError, RingctlError
from .model import RingModel, dicke_state, fidelity, w_state
from .nmr import (
    NmrOptConfig,
    bisect_min_M,
    multistart_search,
    simulate_sequence,
    total_interaction_time,
)
from .propagate import dense_oracle, evolve_cw
from .records import (
    load_json,
    load_protocol,
    make_run_record,
    protocol_to_dict,
    save_json,
)
from .robustness import eps_grid, parameter_ids, pearson_matrix, sweep_1d, sweep_2d
from .verify import run_verification

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("RINGCTL_THREADS", "1")))
    except ValueError:
        return 1


def _target_from_args(args, basis=None):
    if args.target == "w":
        return w_state(args.n, basis)
    k = getattr(args, "k", None)
    if k is None:
        raise DomainError("--k is required for Dicke targets")
    return dicke_state(args.n, k, basis)


def _parse_grid(spec: str) -> np.ndarray:
    """Parse '±0.05:101' or '0.05:101' into a symmetric error grid."""
    spec = spec.lstrip("±+")
    try:
        width_s, _, points_s = spec.partition(":")
        width = float(width_s)
        points = int(points_s) if points_s else 101
    except ValueError:
        raise DomainError(f"malformed grid spec {spec!r}; expected WIDTH:POINTS") from None
    return eps_grid(width, points)


def _report_times(T: float, m: int, n: int, args) -> dict:
    out = {"total_interaction_time": T}
    if getattr(args, "units", None) == "rad-per-us":
        j = args.J
        if j is None or j <= 0:
            raise DomainError("--units rad-per-us needs a positive --J")
        out["J_rad_per_us"] = j
        out["T_exp_us"] = T / j
        bound = m * np.pi / (2 * j) if n >= 3 else m * np.pi / j
        out["T_exp_bound_us"] = bound
    return out


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_basis(args) -> int:
    model = RingModel(args.n)
    rows = [
        {
            "orbit": i,
            "representative": o.representative,
            "size": o.size,
            "hamming_weight": o.weight,
            "hzz_diagonal": o.hzz_value(model.j),
        }
        for i, o in enumerate(model.basis.orbits)
    ]
    payload = {"n": args.n, "dim": model.dim, "orbits": rows}
    if args.json:
        save_json(payload, args.json)
    if args.as_json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"n={args.n}: {model.dim} orbits")
        print(f"{'orbit':>5} {'rep':>{args.n + 2}} {'size':>5} {'weight':>7} {'hzz':>8}")
        for r in rows:
            print(
                f"{r['orbit']:>5} {r['representative']:>{args.n + 2}} "
                f"{r['size']:>5} {r['hamming_weight']:>7} {r['hzz_diagonal']:>8.1f}"
            )
    return EXIT_OK


def cmd_state(args) -> int:
    target = _target_from_args(args)
    payload = {"n": args.n, "kind": target.kind, "k": target.k, "label": target.label}
    if args.representation in ("reduced", "both"):
        payload["reduced"] = [float(x.real) for x in target.reduced]
    if args.representation in ("full", "both"):
        payload["full"] = [float(x.real) for x in target.full()]
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    protocol, n, j = load_protocol(args.protocol)
    if args.n is not None and args.n != n:
        raise DomainError(f"--n {args.n} conflicts with protocol file (n={n})")
    model = RingModel(n, j)
    if args.dense:
        psi_full = dense_oracle(protocol, model)
        psi = model.basis.project(psi_full)
    elif hasattr(protocol, "xis"):
        psi = simulate_sequence(protocol, model)
    else:
        psi = evolve_cw(model.initial_state_reduced(), protocol, model)
    payload = {
        "n": n,
        "representation": "reduced",
        "amplitudes_re": psi.real.tolist(),
        "amplitudes_im": psi.imag.tolist(),
    }
    if args.target is not None:
        target = _target_from_args(args if args.n else argparse.Namespace(
            target=args.target, k=args.k, n=n))
        payload["target"] = target.label
        payload["fidelity"] = fidelity(psi, target.reduced)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_optimize_nmr(args) -> int:
    model = RingModel(args.n)
    target = _target_from_args(args, model.basis)
    cfg = NmrOptConfig(
        n_random_guesses=args.guesses,
        n_local_searches=args.searches,
        fidelity_threshold=args.threshold,
        max_iters=args.max_iters,
        rng_seed=args.seed,
        threads=args.threads,
    )
    t0 = time.perf_counter()
    results_block: dict = {}
    if args.bisect:
        out = bisect_min_M(target, args.threshold, model, cfg, m_lo=0, m_hi=args.m)
        results_block["bisect"] = {
            "minimal_m": out.minimal_m,
            "best_loss_per_m": {str(k): v for k, v in sorted(out.best_loss_per_m.items())},
        }
        if not out.found:
            results_block["bisect"]["note"] = "threshold unmet at m_hi"
            best_m = min(out.best_loss_per_m, key=out.best_loss_per_m.get)
        else:
            best_m = out.minimal_m
        best_seq = out.best_sequence_per_m[best_m]
        best_loss = out.best_loss_per_m[best_m]
        locals_list = out.results_per_m[best_m]
    else:
        locals_list = multistart_search(target, args.m, model, cfg)
        best_seq = locals_list[0].sequence
        best_loss = locals_list[0].loss
        best_m = args.m
    wall = time.perf_counter() - t0

    T = total_interaction_time(best_seq)
    results_block.update(
        {
            "target": target.label,
            "best_protocol": protocol_to_dict(best_seq, args.n, model.j, best_loss),
            "best_loss": best_loss,
            "m": best_m,
            "wall_time_s": wall,
            "local_searches": [
                {
                    "loss": r.loss,
                    "iterations": r.n_iterations,
                    "converged": r.converged,
                    "parameters": r.sequence.to_vector().tolist(),
                }
                for r in locals_list
            ],
            **_report_times(T, best_m, args.n, args),
        }
    )
    record = make_run_record(
        {
            "scheme": "nmr",
            "n": args.n,
            "j": model.j,
            "target": args.target,
            "k": target.k,
            "m": args.m,
            "bisect": args.bisect,
            "rng_seed": args.seed,
            "threads": args.threads,
            **{k: getattr(cfg, k) for k in (
                "n_random_guesses", "n_local_searches", "fidelity_threshold", "max_iters")},
        },
        results_block,
    )
    save_json(record, args.out)
    print(f"best loss {best_loss:.3e} at M={best_m} (T={T:.4f}/J, {wall:.1f}s) -> {args.out}")
    return EXIT_OK


def cmd_optimize_cw(args) -> int:
    model = RingModel(args.n)
    target = _target_from_args(args, model.basis)
    cfg = CwOptConfig(
        n_seed_samples=args.samples,
        seed_noise_sigma=args.sigma,
        n_local_searches=args.searches,
        max_iters=args.max_iters,
        fidelity_threshold=args.threshold,
        rng_seed=args.seed,
        threads=args.threads,
    )
    t0 = time.perf_counter()
    results = informed_multistart(target, args.m, model, cfg, duration=args.horizon)
    wall = time.perf_counter() - t0
    best = results[0]
    record = make_run_record(
        {
            "scheme": "cw",
            "n": args.n,
            "j": model.j,
            "target": args.target,
            "k": target.k,
            "m": args.m,
            "horizon": args.horizon,
            "rng_seed": args.seed,
            "threads": args.threads,
            **{k: getattr(cfg, k) for k in (
                "n_seed_samples", "seed_noise_sigma", "n_local_searches",
                "max_iters", "fidelity_threshold", "removal_attempts")},
        },
        {
            "target": target.label,
            "best_protocol": protocol_to_dict(best.pulse, args.n, model.j, best.loss),
            "best_loss": best.loss,
            "wall_time_s": wall,
            "local_searches": [
                {
                    "loss": r.loss,
                    "iterations": r.n_iterations,
                    "converged": r.converged,
                    "coeffs_x": r.pulse.coeffs_x.tolist(),
                    "coeffs_y": r.pulse.coeffs_y.tolist(),
                }
                for r in results
            ],
        },
    )
    save_json(record, args.out)
    print(f"best loss {best.loss:.3e} with M={args.m}, T={args.horizon} -> {args.out}")
    return EXIT_OK


def cmd_simplify(args) -> int:
    protocol, n, j = load_protocol(args.infile)
    if not hasattr(protocol, "coeffs_x"):
        raise DomainError("simplify operates on continuous (cw) pulses")
    data = load_json(args.infile)
    target_kind = data.get("config", {}).get("target") or args.target
    k = data.get("config", {}).get("k", getattr(args, "k", None))
    if target_kind is None:
        raise DomainError("target unknown: pass --target (and --k for dicke)")
    model = RingModel(n, j)
    target = w_state(n, model.basis) if target_kind == "w" else dicke_state(n, k, model.basis)
    cfg = CwOptConfig(
        fidelity_threshold=args.threshold,
        removal_attempts=args.attempts,
        max_iters=args.max_iters,
        rng_seed=args.seed,
    )
    out = simplify_pulse(protocol, target, model, cfg)
    record = make_run_record(
        {
            "scheme": "cw-simplify",
            "n": n,
            "j": j,
            "target": target_kind,
            "k": target.k,
            "fidelity_threshold": args.threshold,
            "removal_attempts": args.attempts,
            "rng_seed": args.seed,
            "source": str(args.infile),
        },
        {
            "best_protocol": protocol_to_dict(out.pulse, n, j, out.loss),
            "best_loss": out.loss,
            "m_tilde": out.m_tilde,
            "history": [
                {
                    "removed": s.removed,
                    "loss": s.loss,
                    "accepted": s.accepted,
                    "active_after": s.active_after,
                }
                for s in out.history
            ],
        },
    )
    save_json(record, args.out)
    print(f"simplified to {out.m_tilde} active components, loss {out.loss:.3e} -> {args.out}")
    return EXIT_OK


def cmd_robustness(args) -> int:
    protocol, n, j = load_protocol(args.infile)
    data = load_json(args.infile)
    target_kind = data.get("config", {}).get("target") or args.target
    k = data.get("config", {}).get("k", getattr(args, "k", None))
    if target_kind is None:
        raise DomainError("target unknown: pass --target (and --k for dicke)")
    model = RingModel(n, j)
    target = w_state(n, model.basis) if target_kind == "w" else dicke_state(n, k, model.basis)
    grid = _parse_grid(args.grid)

    rows = []
    if args.mode == "1d":
        params = args.params.split(",") if args.params else parameter_ids(protocol)
        for pid in params:
            sweep = sweep_1d(protocol, target, model, pid, grid)
            for eps, inf in zip(grid, sweep.infidelity):
                rows.append({"parameter": pid, "eps": eps, "infidelity": inf})
        header = ["parameter", "eps", "infidelity"]
    else:
        if not args.params or len(args.params.split(",")) != 2:
            raise DomainError("--mode 2d needs --params a,b")
        pa, pb = args.params.split(",")
        sweep = sweep_2d(protocol, target, model, pa, pb, grid)
        for ia, ea in enumerate(grid):
            for ib, eb in enumerate(grid):
                rows.append(
                    {"eps_a": ea, "eps_b": eb, "infidelity": sweep.infidelity[ia, ib]}
                )
        header = ["eps_a", "eps_b", "infidelity"]

    with open(args.csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows -> {args.csv}")
    return EXIT_OK


def cmd_stats(args) -> int:
    run_files = sorted(Path(args.runs).glob("*.json"))
    if not run_files:
        raise DomainError(f"no run records found under {args.runs}")
    vectors = []
    m_seen = None
    for path in run_files:
        data = load_json(path)
        for entry in data.get("results", {}).get("local_searches", []):
            if "parameters" not in entry:
                continue
            if entry["loss"] > args.loss_cut:
                continue
            vec = entry["parameters"]
            if m_seen is None:
                m_seen = len(vec)
            if len(vec) == m_seen:
                vectors.append(vec)
    if len(vectors) < 3:
        raise DomainError(
            f"need at least 3 exact realizations below loss {args.loss_cut:g}; "
            f"found {len(vectors)}"
        )
    rho = pearson_matrix(np.array(vectors))
    with open(args.pearson, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "rho"])
        for i in range(rho.shape[0]):
            for jj in range(rho.shape[1]):
                val = rho[i, jj]
                writer.writerow([i, jj, "" if np.isnan(val) else f"{val:.6f}"])
    print(f"{len(vectors)} realizations, {rho.shape[0]} parameters -> {args.pearson}")
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = run_verification(args.n, seed=args.seed)
    width = max(len(c.name) for c in checks)
    failed = 0
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark}  {c.name:<{width}}  {c.detail}")
        failed += 0 if c.passed else 1
    if failed:
        print(f"{failed} of {len(checks)} checks failed")
        return EXIT_NUMERICAL
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringctl",
        description="W and Dicke state preparation on Ising-coupled qubit rings",
    )
    parser.add_argument("--version", action="version", version=f"ringctl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument(
        "--threads", type=int, default=_default_threads(),
        help="parallel local searches (default from RINGCTL_THREADS)",
    )

    p = sub.add_parser("basis", parents=[common], help="orbit table of the symmetrized basis")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--json", metavar="PATH", help="also write the table to a JSON file")
    p.add_argument("--as-json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("state", parents=[common], help="target-state amplitudes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--target", choices=["w", "dicke"], default="dicke")
    p.add_argument("--k", type=int, default=None)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--full", dest="representation", action="store_const", const="full")
    group.add_argument("--reduced", dest="representation", action="store_const", const="reduced")
    p.set_defaults(representation="both", func=cmd_state)

    p = sub.add_parser("simulate", parents=[common], help="run a protocol file")
    p.add_argument("--protocol", required=True)
    p.add_argument("--n", type=int, default=None, help="cross-check against the file")
    p.add_argument("--dense", action="store_true", help="use the full-space oracle")
    p.add_argument("--target", choices=["w", "dicke"], default=None)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize-nmr", parents=[common], help="pulse-sequence optimization")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--target", choices=["w", "dicke"], required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=int, required=True,
                   help="interaction pulses (with --bisect: the upper bound)")
    p.add_argument("--bisect", action="store_true", help="search the minimal feasible M")
    p.add_argument("--guesses", type=int, default=20_000)
    p.add_argument("--searches", type=int, default=500)
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--threshold", type=float, default=1.0 - 1e-10)
    p.add_argument("--units", choices=["rad-per-us"], default=None)
    p.add_argument("--J", type=float, default=None, help="coupling in rad/us for reporting")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize_nmr)

    p = sub.add_parser("optimize-cw", parents=[common], help="continuous-pulse optimization")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--target", choices=["w", "dicke"], required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=int, default=9, help="harmonic cutoff")
    p.add_argument("--horizon", type=float, default=4.0, help="pulse duration T in 1/J")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--searches", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--threshold", type=float, default=0.99)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize_cw)

    p = sub.add_parser("simplify", parents=[common], help="iterative component removal")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--threshold", type=float, default=0.99)
    p.add_argument("--attempts", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--target", choices=["w", "dicke"], default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("robustness", parents=[common], help="error sweeps to CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mode", choices=["1d", "2d"], default="1d")
    p.add_argument("--params", default=None, help="comma-separated parameter ids")
    p.add_argument("--grid", default="0.05:101", help="half-width:points, e.g. 0.05:101")
    p.add_argument("--target", choices=["w", "dicke"], default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("stats", parents=[common], help="parameter statistics over runs")
    p.add_argument("--runs", required=True, help="directory of run records")
    p.add_argument("--pearson", required=True, help="output CSV for the correlation matrix")
    p.add_argument("--loss-cut", type=float, default=1e-10,
                   help="keep only realizations at or below this loss")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (KrylovError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RingctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
