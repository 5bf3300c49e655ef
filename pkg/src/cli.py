"""
Command-line front end: equilibrium, verify, oracle, simulate and sweep
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from src.config import RunConfig, config, load_run_config
from src.distributions import ReserveDist, WorstCaseDist
from src.equilibrium import AuctionInstance, compute_equilibrium
from src.errors import ConfigError, DomainError, LPSolverError
from src.game_oracle import (
    build_game,
    complementary_slackness_gap,
    discretize_reserve_law,
    duality_sandwich,
    pure_reserve_guarantees,
    solve_minimax,
)
from src.logging_config import setup_logging
from src.simulate import (
    SimConfig,
    asymptotic_sweep,
    cdf_frame,
    floor_frame,
    floor_test,
    fosd_chain,
    sweep_frame,
)
from src.svg_plot import write_line_plot
from src.verify import run_full_verification

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _parse_means(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--means must be a comma-separated list of numbers: {text}") from e


def _parse_n_range(text: Optional[str]) -> Tuple[Optional[int], Optional[int]]:
    if text is None:
        return None, None
    low, sep, high = text.partition("..")
    try:
        if not sep:
            raise ValueError(text)
        return int(low), int(high)
    except ValueError as e:
        raise ConfigError(f"--n-range must look like 2..10, got {text}") from e


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--means", type=str, help="Comma-separated bidder means in (0, 1)")
    common.add_argument("--m", type=float, help="Common mean (symmetric shorthand)")
    common.add_argument("--n", type=int, help="Number of bidders (symmetric shorthand)")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--grid", type=int, help="Reserve grid size of the indifference check")
    common.add_argument("--workers", type=int, help="Threads for checks and simulation")
    common.add_argument("--out", type=str, help="Output directory")
    common.add_argument(
        "--json", dest="json_stdout", action="store_const", const=True, default=None,
        help="Also print the main result as JSON on stdout"
    )
    common.add_argument("--config", type=str, help="YAML file with run settings")
    common.add_argument("--log-level", type=str, help="DEBUG / INFO / WARNING / ERROR")

    parser = argparse.ArgumentParser(
        prog="robust-reserve",
        description="Robust reserve-price equilibrium of second-price auctions"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("equilibrium", parents=[common], help="Compute k, alpha and thetas")

    verify = commands.add_parser("verify", parents=[common], help="Certify the saddle point")
    verify.add_argument("--samples", type=int, help="Stratified profiles for the certificate")
    verify.add_argument(
        "--perturb-alpha", type=float, help="Shift alpha before checking (must then fail)"
    )
    verify.add_argument(
        "--with-oracle", action="store_const", const=True, default=None,
        help="Also solve the discretized game"
    )
    verify.add_argument("--value-grid", dest="value_grid_size", type=int)
    verify.add_argument("--reserve-grid", dest="reserve_grid_size", type=int)

    oracle = commands.add_parser("oracle", parents=[common], help="Solve the discretized game")
    oracle.add_argument("--value-grid", dest="value_grid_size", type=int)
    oracle.add_argument("--reserve-grid", dest="reserve_grid_size", type=int)

    commands.add_parser("simulate", parents=[common], help="Monte Carlo revenue floor test")

    sweep = commands.add_parser("sweep", parents=[common], help="alpha(n) and reserve mass over n")
    sweep.add_argument("--n-range", type=str, help="Inclusive range such as 2..10")
    sweep.add_argument(
        "--monte-carlo", action="store_const", const=True, default=None,
        help="Estimate revenue by simulation instead of reporting alpha(n)"
    )
    return parser


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge parsed flags over config.yaml and the optional run file"""
    n_min, n_max = _parse_n_range(getattr(args, "n_range", None))
    overrides: Dict[str, Any] = {
        "means": _parse_means(args.means),
        "m": args.m,
        "n": args.n,
        "seed": args.seed,
        "trials": args.trials,
        "grid_size": args.grid,
        "workers": args.workers,
        "out": args.out,
        "json_stdout": args.json_stdout,
        "samples": getattr(args, "samples", None),
        "perturb_alpha": getattr(args, "perturb_alpha", None),
        "with_oracle": getattr(args, "with_oracle", None),
        "value_grid_size": getattr(args, "value_grid_size", None),
        "reserve_grid_size": getattr(args, "reserve_grid_size", None),
        "monte_carlo": getattr(args, "monte_carlo", None),
        "n_min": n_min,
        "n_max": n_max,
    }
    return load_run_config(args.command, overrides, config_file=args.config)


def _instance(run_config: RunConfig) -> AuctionInstance:
    return AuctionInstance.from_means(run_config.bidder_means())


def _output_dir(run_config: RunConfig) -> Path:
    out = Path(run_config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: Dict[str, Any]):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, frame: pd.DataFrame, config_hash: str):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash: {config_hash}\n")
        frame.to_csv(f, index=False)


def _emit(run_config: RunConfig, payload: Dict[str, Any]):
    if run_config.json_stdout:
        print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_equilibrium(run_config: RunConfig) -> int:
    eq = compute_equilibrium(_instance(run_config))
    payload = {
        "k": eq.k,
        "alpha": eq.alpha,
        "revenue": eq.revenue,
        "thetas": [eq.theta_for(i) for i in range(eq.instance.n)],
        "active_bidders": list(eq.active_bidders),
        "boundary_bidders": list(eq.active.boundary_bidders),
        "reserve_atom": eq.reserve_atom,
        "reserve_mass_above_zero": ReserveDist(eq.alpha, eq.k).mass_above_zero,
        "config_hash": run_config.config_hash(),
    }
    out = _output_dir(run_config)
    _write_json(out / "equilibrium.json", payload)
    (out / "laws.txt").write_text(
        f"# config_hash: {payload['config_hash']}\n" + WorstCaseDist(eq).format_record(),
        encoding="utf-8",
    )
    print(f"k={eq.k} alpha={eq.alpha:.6f} revenue={eq.revenue:.6f}", file=sys.stderr)
    _emit(run_config, payload)
    return EXIT_OK


def cmd_verify(run_config: RunConfig) -> int:
    report = run_full_verification(_instance(run_config), run_config)
    payload = report.to_dict()
    payload["config_hash"] = run_config.config_hash()
    _write_json(_output_dir(run_config) / "verification.json", payload)

    status = "✅ passed" if report.passed else "❌ failed"
    print(
        f"verification {status}: k={report.k} alpha={report.alpha:.6f} "
        f"indifference={report.max_indifference_residual:.3e} "
        f"min_slack={report.min_certificate_slack:.3e}",
        file=sys.stderr,
    )
    _emit(run_config, payload)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_oracle(run_config: RunConfig) -> int:
    instance = _instance(run_config)
    eq = compute_equilibrium(instance)
    game = build_game(
        instance, run_config.value_grid_size, run_config.reserve_grid_size,
        workers=run_config.workers,
        solver_options=run_config.solver_options(),
        **run_config.oracle_limits(),
    )
    try:
        solution = solve_minimax(game)
        guarantees = pure_reserve_guarantees(game)
        discrete_reserve = discretize_reserve_law(game, ReserveDist(eq.alpha, eq.k))
        sandwich = duality_sandwich(game, solution, discrete_reserve)
    except LPSolverError as e:
        print(f"❌ LP solver failed: {e}", file=sys.stderr)
        logger.error("oracle_failed", **e.diagnostics())
        return EXIT_FAILED

    payload = solution.to_dict(game)
    payload.update({
        "alpha": eq.alpha,
        "game_value_gap": abs(solution.game_value - eq.alpha),
        "pure_reserve_guarantees": guarantees.tolist(),
        "best_pure_reserve": float(game.reserve_grid[int(np.argmax(guarantees))]),
        "best_pure_guarantee": float(guarantees.max()),
        "duality_sandwich": list(sandwich),
        "complementary_slackness_gap": complementary_slackness_gap(game, solution),
        "config_hash": run_config.config_hash(),
    })
    _write_json(_output_dir(run_config) / "oracle.json", payload)
    print(
        f"game value={solution.game_value:.6f} alpha={eq.alpha:.6f} "
        f"best pure reserve guarantee={guarantees.max():.6f}",
        file=sys.stderr,
    )
    _emit(run_config, payload)
    return EXIT_OK


def cmd_simulate(run_config: RunConfig) -> int:
    sim_config = SimConfig(
        trials=run_config.trials,
        seed=run_config.seed,
        parallel_streams=run_config.parallel_streams,
        chunk_size=run_config.chunk_size,
    )
    results = floor_test(_instance(run_config), sim_config, run_config.perturbation)
    frame = floor_frame(results)
    _write_csv(_output_dir(run_config) / "simulate.csv", frame, run_config.config_hash())

    print("=== Revenue floor ===", file=sys.stderr)
    for r in results:
        mark = "✅" if r.passed else "❌"
        print(
            f"  {mark} {r.candidate}: {r.revenue:.6f} ± {r.stderr:.2e} (floor {r.floor:.6f})",
            file=sys.stderr,
        )
    _emit(
        run_config,
        {"results": frame.to_dict(orient="records"), "config_hash": run_config.config_hash()},
    )
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_sweep(run_config: RunConfig) -> int:
    n_list = list(range(run_config.n_min, run_config.n_max + 1))
    sim_config = None
    if run_config.monte_carlo:
        sim_config = SimConfig(
            trials=run_config.trials,
            seed=run_config.seed,
            parallel_streams=run_config.parallel_streams,
            chunk_size=run_config.chunk_size,
        )
    rows = asymptotic_sweep(run_config.m, n_list, sim_config)
    frame = sweep_frame(rows)
    out = _output_dir(run_config)
    digest = run_config.config_hash()

    _write_csv(out / "sweep.csv", frame, digest)
    write_line_plot(
        out / "sweep.svg",
        {
            "alpha(n)": (frame["n"], frame["alpha"]),
            "reserve mass above 0": (frame["n"], frame["mass_above_zero"]),
        },
        title=f"m = {run_config.m}",
        x_label="n",
        y_label="value",
        config_hash=digest,
    )

    for n in sorted({n_list[0], n_list[-1]}):
        cdfs = cdf_frame(run_config.m, n, run_config.cdf_points)
        _write_csv(out / f"cdf_n{n}.csv", cdfs, digest)
        write_line_plot(
            out / f"cdf_n{n}.svg",
            {
                "marginal of F*": (cdfs["v"], cdfs["marginal_cdf"]),
                "G*": (cdfs["v"], cdfs["reserve_cdf"]),
            },
            title=f"n = {n}, m = {run_config.m}",
            x_label="v",
            y_label="CDF",
            config_hash=digest,
        )

    dominance = fosd_chain(rows)
    if not all(dominance):
        logger.warning("fosd_chain_broken", n=n_list, dominance=dominance)
    print(
        f"sweep n={n_list[0]}..{n_list[-1]}: alpha {rows[0].alpha_n:.4f} -> {rows[-1].alpha_n:.4f}",
        file=sys.stderr,
    )
    _emit(run_config, {"rows": frame.to_dict(orient="records"), "config_hash": digest})
    return EXIT_OK


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns 0 on success, 1 on a failed check, 2 on usage errors"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(log_level=args.log_level, log_config=config.logging_config)

    try:
        run_config = resolve_run_config(args)
        logger.info("run_started", command=run_config.command, config_hash=run_config.config_hash())
        return COMMANDS[run_config.command](run_config)
    except (ConfigError, DomainError) as e:
        print(f"❌ {e}", file=sys.stderr)
        logger.error("run_rejected", command=args.command, error=str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
