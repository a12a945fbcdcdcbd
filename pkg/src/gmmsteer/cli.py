"""Command-line entry point: ``gmmsteer {solve,simulate,fit,density}``.

Exit codes: 0 success, 1 solver failure, 2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .errors import SteeringError
from .gmm import Gmm, em_fit
from .io import ConfigError, fmt, load_problem, read_json, read_samples_csv, write_csv, write_json
from .policy import GmmPolicy, same_mixture, synthesize
from .sim import monte_carlo
from .system import lift

MAX_EXPORT_ROWS = 100_000


def _out_dir(args, cfg=None) -> Path:
    out = Path(args.out_dir or (cfg.out_dir if cfg is not None and cfg.out_dir else "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    start = time.perf_counter()
    cfg = load_problem(args.config)
    result = synthesize(cfg.system, cfg.cost, cfg.initial, cfg.desired)
    out = _out_dir(args, cfg)
    plan = {
        "cost_matrix": result.cost_matrix.tolist(),
        "tilde_lambda": result.plan.tilde_lambda.tolist(),
        "objective": result.plan.objective,
    }
    write_json(out / "policy.json", result.policy.to_dict())
    write_json(out / "plan.json", plan)
    if args.dump_plan:
        write_json(args.dump_plan, plan)
    lam = result.policy.lam
    transfers = [
        {"from": i, "to": j, "fraction": float(lam[i, j])}
        for i in range(lam.shape[0]) for j in range(lam.shape[1]) if lam[i, j] > 0
    ]
    summary = {
        "expected_cost": result.expected_cost,
        "tilde_lambda": result.plan.tilde_lambda.tolist(),
        "lambda": lam.tolist(),
        "transfers": transfers,
        "synthesis_seconds": result.wall_time,
        "wall_seconds": time.perf_counter() - start,
    }
    write_json(out / "summary.json", summary)
    print(f"expected cost: {fmt(result.expected_cost)}")
    for tr in transfers:
        print(f"  initial {tr['from']} -> desired {tr['to']}: {tr['fraction']:.6g}")
    print(f"wall time: {summary['wall_seconds']:.3f} s")
    return 0


def _parse_snapshots(text, N):
    if text is None:
        return sorted({round(N * q / 5) for q in range(6)})
    try:
        ks = sorted({int(v) for v in text.split(",") if v.strip()})
    except ValueError:
        raise ConfigError(f"--snapshots must be comma-separated integers, got {text!r}") from None
    if any(k < 0 or k > N for k in ks):
        raise ConfigError(f"snapshot steps must lie in 0..{N}")
    return ks


def cmd_simulate(args) -> int:
    cfg = load_problem(args.config)
    try:
        policy = GmmPolicy.from_dict(read_json(args.policy))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{args.policy}: malformed policy ({exc})") from None
    sys_ = cfg.system
    if (policy.N, policy.n, policy.m) != (sys_.N, sys_.n, sys_.m):
        raise ConfigError("policy dimensions do not match the problem configuration")
    if not same_mixture(policy.base, cfg.initial):
        raise ConfigError("policy was synthesized for a different initial mixture")
    if args.samples < 0:
        raise ConfigError("--samples must be nonnegative")
    snapshots = _parse_snapshots(args.snapshots, sys_.N)
    seed = cfg.seed if args.seed is None else args.seed

    report = monte_carlo(sys_, cfg.cost, cfg.initial, policy, args.samples, seed=seed)
    out = _out_dir(args, cfg)
    data = report.to_dict()
    data["seed"] = seed
    data["snapshots"] = snapshots
    write_json(out / "report.json", data)

    rows = min(report.sample_count, MAX_EXPORT_ROWS)
    state_cols = [f"x{d}" for d in range(sys_.n)]
    ids = range(rows)
    write_csv(out / "terminal.csv", ["sample_id", "i", "j"] + state_cols,
              ([s, int(report.pairs[s, 0]), int(report.pairs[s, 1]), *report.states[s, -1]] for s in ids))
    for k in snapshots:
        write_csv(out / f"snapshot_k{k}.csv", ["sample_id", "i", "j"] + state_cols,
                  ([s, int(report.pairs[s, 0]), int(report.pairs[s, 1]), *report.states[s, k]] for s in ids))
    if args.trajectories:
        input_cols = [f"u{d}" for d in range(sys_.m)]

        def traj_rows():
            for s in ids:
                for k in range(sys_.N + 1):
                    u = report.inputs[s, k] if k < sys_.N else np.full(sys_.m, np.nan)
                    yield [s, k, *report.states[s, k], *u]

        write_csv(out / "trajectories.csv", ["sample_id", "k"] + state_cols + input_cols, traj_rows())
    print(f"simulated {report.sample_count} samples; mean cost {fmt(report.empirical_mean_cost)}")
    return 0


def cmd_fit(args) -> int:
    X = read_samples_csv(args.samples)
    if X.shape[0] < args.components:
        raise ConfigError(f"need at least {args.components} samples, found {X.shape[0]}")
    start = time.perf_counter()
    fit = em_fit(X, args.components, seed=args.seed, max_iters=args.max_iters, tol=args.tol)
    elapsed = time.perf_counter() - start
    out = Path(args.out) if args.out else _out_dir(args) / "gmm.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    data = fit.gmm.to_dict()
    data.update(log_likelihood=fit.log_likelihood, n_iter=fit.n_iter, converged=fit.converged, seconds=elapsed)
    write_json(out, data)
    print(f"fitted {args.components} components in {fit.n_iter} iterations; log-likelihood {fmt(fit.log_likelihood)}")
    return 0


def parse_grid(text: str, n: int):
    """``"lo:hi:num,lo:hi:num"`` -> list of axis node arrays."""
    axes = []
    for part in text.split(","):
        try:
            lo, hi, num = part.split(":")
            lo, hi, num = float(lo), float(hi), int(num)
        except ValueError:
            raise ConfigError(f"grid axis must look like lo:hi:num, got {part!r}") from None
        if num < 1 or hi < lo or (num > 1 and hi == lo):
            raise ConfigError(f"empty grid range {part!r}")
        axes.append(np.linspace(lo, hi, num))
    if len(axes) != n:
        raise ConfigError(f"grid has {len(axes)} axes but the mixture is {n}-dimensional")
    return axes


def density_grid(gmm: Gmm, axes):
    """Evaluate the mixture pdf on the tensor grid; returns ``(nodes, values)`` in row-major order."""
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=1)
    return nodes, gmm.pdf(nodes)


def cmd_density(args) -> int:
    try:
        gmm = Gmm.from_dict(read_json(args.gmm))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{args.gmm}: malformed mixture ({exc})") from None
    axes = parse_grid(args.grid, gmm.n)
    nodes, values = density_grid(gmm, axes)
    out = _out_dir(args) / "density.csv"
    write_csv(out, [f"x{d}" for d in range(gmm.n)] + ["pdf"], (list(p) + [v] for p, v in zip(nodes, values)))
    print(f"wrote {len(values)} grid values to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmmsteer", description="Steer Gaussian-mixture state densities of linear systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="synthesize the optimal mixture-steering policy")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--dump-plan", help="also write the cost matrix and plan to this path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte-Carlo rollouts of a saved policy")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--snapshots", help="comma-separated time steps to export")
    p.add_argument("--trajectories", action="store_true", help="also export every state and input")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a mixture to a CSV sample set with EM")
    p.add_argument("--samples", required=True)
    p.add_argument("-k", "--components", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("density", help="evaluate a mixture pdf on a grid")
    p.add_argument("--gmm", required=True)
    p.add_argument("--grid", required=True, help="lo:hi:num per axis, comma-separated")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_density)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"gmmsteer {args.command}: {exc}", file=sys.stderr)
        return 2
    except SteeringError as exc:
        print(f"gmmsteer {args.command}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"gmmsteer {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
