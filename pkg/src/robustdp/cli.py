"""Command-line entry points.

Subcommands:

* ``solve``        - run one solver on a game file, write result JSON and an
                     optional per-iteration trace CSV.
* ``rssd-gen``     - write a social-dilemma benchmark instance as game JSON.
* ``bench-table1`` - run the benchmark grid (algorithms x discount factors)
                     on the default social-dilemma instance; CSV + text table.
* ``trace-fig1``   - export per-iteration value traces and the terminal
                     backup lattice for the two Gauss-Seidel solvers.
* ``oracle``       - exhaustive maximin value of a game file.

Exit codes: 0 on normal termination, 2 when a solver hits its iteration cap,
1 on input errors.  Set ROBUSTDP_LOG to a logging level name for diagnostics.
Result and trace files contain no timestamps, so identical invocations
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .model import (
    BudgetExceededError,
    GameValidationError,
    TeamMarkovGame,
    save_game,
    sup_norm,
    validate_game,
)
from .oracle import brute_force_maximin
from .perturb import PerturbationOracle
from .rssd import RssdParams, build_rssd
from .solvers import SOLVERS, SolverParams, SolverResult, max_delta
from .sweeps import backup_lattice

log = logging.getLogger("robustdp.cli")

DEFAULT_LAMBDAS = (0.95, 0.96, 0.97, 0.98, 0.99)
#: Evaluation-sweep counts benchmarked per discount factor; the last entry
#: is the documented default for headline comparisons.
DEFAULT_BENCH_MT = (1, 3, 5, 10, 50)


class CliInputError(Exception):
    pass


def _load_game_file(path: str) -> TeamMarkovGame:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CliInputError(f"{path}: {e.strerror or e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise CliInputError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    try:
        return validate_game(raw)
    except GameValidationError as e:
        raise CliInputError(f"{path}: {e}") from e


def _parse_mt(text: str):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise CliInputError(f"--mt {text!r}: expected an integer or comma list")
    try:
        values = [int(p) for p in parts]
    except ValueError as e:
        raise CliInputError(f"--mt {text!r}: {e}") from e
    if any(v < 0 for v in values):
        raise CliInputError(f"--mt {text!r}: entries must be nonnegative")
    return values[0] if len(values) == 1 else tuple(values)


def _parse_floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as e:
        raise CliInputError(f"{flag} {text!r}: {e}") from e


def _parse_v0(text: str):
    if text in ("remark1", "zeros"):
        return text
    if text.startswith("file:"):
        path = text[len("file:"):]
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise CliInputError(f"--v0 {path}: {e}") from e
        return tuple(float(x) for x in data)
    raise CliInputError(f"--v0 {text!r}: expected remark1, zeros, or file:PATH")


def _resolve_delta(args) -> float:
    if args.delta is not None:
        return args.delta
    if args.lam == 0.0:
        return 0.0
    return 0.99 * max_delta(args.lam, args.epsilon)


def _build_approx(args, lam: float, delta: float) -> PerturbationOracle | None:
    if args.approx_mode == "identity":
        return None
    return PerturbationOracle(
        mode=args.approx_mode,
        bound=lam * delta,
        seed=args.approx_seed,
        argmax_lock=args.approx_lock,
    )


def _run_solver(game, algo, params, approx) -> SolverResult:
    solver = SOLVERS[algo]
    if algo in ("ratpi", "ratvi"):
        return solver(game, params, approx)
    return solver(game, params)


def _result_payload(game: TeamMarkovGame, result: SolverResult, config: dict) -> dict:
    policy = {
        game.states[k]: list(game.action_names(a))
        for k, a in enumerate(result.policy.joint_actions)
    }
    worst = []
    for k, j in enumerate(result.worst_model):
        a = result.policy.joint_actions[k]
        row = game.uncertainty[k][a].candidates[j]
        worst.append(
            {
                "state": game.states[k],
                "row_index": int(j),
                "row": [float(x) for x in row],
            }
        )
    return {
        "config": config,
        "terminated": result.terminated,
        "iterations": result.iterations,
        "policy": policy,
        "value": {game.states[k]: float(x) for k, x in enumerate(result.value)},
        "worst_model": worst,
        "residuals": [float(r) for r in result.trace.residuals],
        "final_residual": float(result.trace.residuals[-1]),
    }


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_trace_csv(path, game: TeamMarkovGame, results: list[SolverResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "algo", "state", "value"])
        for result in results:
            for t, v in enumerate(result.trace.values):
                for k, state in enumerate(game.states):
                    writer.writerow([t, result.algo, state, repr(float(v[k]))])


def cmd_solve(args) -> int:
    game = _load_game_file(args.game)
    delta = _resolve_delta(args)
    mt = _parse_mt(args.mt)
    v0 = _parse_v0(args.v0)
    params = SolverParams(
        lam=args.lam,
        epsilon=args.epsilon,
        delta=delta,
        mt_schedule=mt,
        v0_mode=v0,
        max_iterations=args.max_iterations,
        approx_seed=args.approx_seed,
    )
    approx = _build_approx(args, args.lam, delta)
    result = _run_solver(game, args.algo, params, approx)
    config = {
        "command": "solve",
        "game": args.game,
        "algo": args.algo,
        "lambda": args.lam,
        "epsilon": args.epsilon,
        "delta": delta,
        "mt": list(mt) if isinstance(mt, tuple) else mt,
        "v0": args.v0,
        "approx_mode": args.approx_mode,
        "approx_seed": args.approx_seed,
        "approx_lock": args.approx_lock,
        "max_iterations": args.max_iterations,
    }
    _write_json(args.out, _result_payload(game, result, config))
    if args.trace:
        _write_trace_csv(args.trace, game, [result])
    return 0 if result.terminated else 2


def cmd_rssd_gen(args) -> int:
    params = RssdParams(
        n_players=args.n,
        cost=args.cost,
        synergy=_parse_floats(args.synergy, "--synergy"),
        snowdrift_benefit=(
            _parse_floats(args.theta, "--theta") if args.theta else None
        ),
        stag_threshold=args.z,
        mu_set=_parse_floats(args.mu, "--mu"),
    )
    game = build_rssd(params)
    save_game(game, args.out)
    log.info("wrote %s", args.out)
    return 0


def _bench_cell(task):
    game, algo, lam, epsilon, mt, v0_mode = task
    delta = 0.99 * max_delta(lam, epsilon)
    params = SolverParams(
        lam=lam, epsilon=epsilon, delta=delta, mt_schedule=mt, v0_mode=v0_mode
    )
    tick = time.perf_counter()
    try:
        result = SOLVERS[algo](game, params)
    except Exception as e:  # pragma: no cover - recorded, not fatal
        return {
            "algo": algo, "lambda": lam, "mt": mt, "error": str(e),
        }
    wall = time.perf_counter() - tick
    return {
        "algo": algo,
        "lambda": lam,
        "mt": mt if algo in ("ratpi", "rmpi") else 0,
        "v0_mode": v0_mode,
        "epsilon": epsilon,
        "delta": delta,
        "iterations": result.iterations,
        "terminated": result.terminated,
        "final_residual": result.trace.residuals[-1],
        "value": result.value,
        "wall_time_s": wall,
    }


def cmd_bench_table1(args) -> int:
    params = RssdParams(stag_threshold=args.z)
    game = build_rssd(params)
    lambdas = _parse_floats(args.lambdas, "--lambdas")
    mt_values = _parse_mt(args.mt)
    if isinstance(mt_values, int):
        mt_values = (mt_values,)
    tasks = []
    for lam in lambdas:
        tasks.append((game, "rvi", lam, args.epsilon, 0, args.v0))
        tasks.append((game, "ratvi", lam, args.epsilon, 0, args.v0))
        for mt in mt_values:
            tasks.append((game, "rmpi", lam, args.epsilon, mt, args.v0))
            tasks.append((game, "ratpi", lam, args.epsilon, mt, args.v0))
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_cell, tasks))
    else:
        rows = [_bench_cell(task) for task in tasks]

    oracles = {lam: brute_force_maximin(game, lam) for lam in lambdas}
    for row in rows:
        if "error" in row:
            row["oracle_gap"] = ""
            continue
        row["oracle_gap"] = sup_norm(row.pop("value") - oracles[row["lambda"]].v_star)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    order = {"rvi": 0, "ratvi": 1, "rmpi": 2, "ratpi": 3}
    rows.sort(key=lambda r: (order[r["algo"]], r.get("mt", 0), r["lambda"]))
    columns = [
        "algo", "lambda", "mt", "v0_mode", "stag_threshold", "epsilon", "delta",
        "iterations", "terminated", "final_residual", "oracle_gap", "wall_time_s",
    ]
    csv_path = out_dir / "bench_table1.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({**{c: "" for c in columns}, **{
                "algo": row["algo"],
                "lambda": row["lambda"],
                "mt": row.get("mt", ""),
                "v0_mode": args.v0,
                "stag_threshold": args.z,
                "epsilon": args.epsilon,
                "delta": row.get("delta", ""),
                "iterations": row.get("iterations", ""),
                "terminated": row.get("terminated", ""),
                "final_residual": row.get("final_residual", ""),
                "oracle_gap": row.get("oracle_gap", ""),
                "wall_time_s": row.get("wall_time_s", ""),
            }})

    lines = ["Iterations to termination on the default benchmark instance", ""]
    header = f"{'algorithm':<16}" + "".join(f"{lam:>9}" for lam in lambdas)
    lines.append(header)
    by_key: dict[tuple, dict] = {}
    for row in rows:
        if "iterations" in row:
            by_key[(row["algo"], row.get("mt", 0), row["lambda"])] = row
    def table_line(label, algo, mt):
        cells = []
        for lam in lambdas:
            row = by_key.get((algo, mt, lam))
            cells.append(f"{row['iterations'] if row else '-':>9}")
        return f"{label:<16}" + "".join(cells)
    lines.append(table_line("rvi", "rvi", 0))
    lines.append(table_line("ratvi", "ratvi", 0))
    for mt in mt_values:
        lines.append(table_line(f"rmpi[mt={mt}]", "rmpi", mt))
        lines.append(table_line(f"ratpi[mt={mt}]", "ratpi", mt))
    lines.append("")
    lines.append(f"config: epsilon={args.epsilon} delta=0.99*bound v0={args.v0} Z={args.z}")
    (out_dir / "bench_table1.txt").write_text("\n".join(lines) + "\n")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_trace_fig1(args) -> int:
    game = build_rssd(RssdParams(stag_threshold=args.z))
    delta = 0.99 * max_delta(args.lam, args.epsilon)
    mt = _parse_mt(args.mt)
    results = []
    for algo in ("ratvi", "ratpi"):
        params = SolverParams(
            lam=args.lam, epsilon=args.epsilon, delta=delta,
            mt_schedule=mt, v0_mode=args.v0,
        )
        results.append(SOLVERS[algo](game, params))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_trace_csv(out_dir / "trace_fig1.csv", game, results)
    with open(out_dir / "trace_fig1_rho.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algo", "state", "joint_action", "rho_final"])
        for result in results:
            lattice = backup_lattice(game, result.trace.values[-1], args.lam)
            for k, state in enumerate(game.states):
                for a in range(game.n_joint_actions):
                    writer.writerow(
                        [
                            result.algo,
                            state,
                            "|".join(game.action_names(a)),
                            repr(float(lattice[k, a])),
                        ]
                    )
    return 0


def cmd_oracle(args) -> int:
    game = _load_game_file(args.game)
    try:
        orc = brute_force_maximin(game, args.lam, budget=args.budget)
    except BudgetExceededError as e:
        raise CliInputError(str(e)) from e
    payload = {
        "config": {
            "command": "oracle",
            "game": args.game,
            "lambda": args.lam,
            "budget": args.budget,
        },
        "v_star": {game.states[k]: float(x) for k, x in enumerate(orc.v_star)},
        "d_star": {
            game.states[k]: list(game.action_names(a))
            for k, a in enumerate(orc.d_star.joint_actions)
        },
        "dominance_ok": orc.dominance_ok,
        "max_dominance_gap": orc.max_dominance_gap,
    }
    _write_json(args.out, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustdp",
        description="Solvers for team Markov games with rectangular transition uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_flags(p, mt_default="5"):
        p.add_argument("--lambda", dest="lam", type=float, default=0.97,
                       help="discount factor in [0, 1)")
        p.add_argument("--epsilon", type=float, default=1e-5,
                       help="target optimality gap")
        p.add_argument("--delta", type=float, default=None,
                       help="approximation tolerance parameter "
                            "(default 0.99 of its upper bound)")
        p.add_argument("--mt", default=mt_default,
                       help="evaluation sweeps per step: integer or comma list")
        p.add_argument("--v0", default="remark1",
                       help="initial value: remark1 | zeros | file:PATH")

    p = sub.add_parser("solve", help="solve a game file")
    p.add_argument("--game", required=True, help="game JSON file")
    p.add_argument("--algo", choices=sorted(SOLVERS), default="ratpi")
    add_solver_flags(p)
    p.add_argument("--seed", type=int, default=0,
                   help="base seed; feeds --approx-seed when that is omitted")
    p.add_argument("--approx-mode", default="identity",
                   choices=("identity", "uniform_noise", "adversarial_extremes"))
    p.add_argument("--approx-seed", type=int, default=None)
    p.add_argument("--approx-lock", action="store_true",
                   help="perturb only after action selection")
    p.add_argument("--max-iterations", type=int, default=1_000_000)
    p.add_argument("--trace", default=None, help="per-iteration trace CSV path")
    p.add_argument("--out", default=None, help="result JSON path (default stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("rssd-gen", help="write a social-dilemma benchmark instance")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=3, help="number of players")
    p.add_argument("--cost", type=float, default=1.0)
    p.add_argument("--synergy", default="1.5,1.8,2.2")
    p.add_argument("--theta", default=None,
                   help="snowdrift benefits (default: synergy factors)")
    p.add_argument("--z", type=int, default=2, help="stag-hunt threshold")
    p.add_argument("--mu", default="0.1,0.2,0.3")
    p.set_defaults(func=cmd_rssd_gen)

    p = sub.add_parser("bench-table1", help="benchmark grid on the default instance")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--lambdas", default=",".join(str(x) for x in DEFAULT_LAMBDAS))
    p.add_argument("--mt", default=",".join(str(x) for x in DEFAULT_BENCH_MT))
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--z", type=int, default=2)
    p.add_argument("--v0", default="remark1")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench_table1)

    p = sub.add_parser("trace-fig1", help="export iteration traces and the "
                                          "terminal backup lattice")
    p.add_argument("--out", required=True, help="output directory")
    add_solver_flags(p, mt_default="50")
    p.add_argument("--z", type=int, default=2)
    p.set_defaults(func=cmd_trace_fig1)

    p = sub.add_parser("oracle", help="exhaustive maximin value of a game file")
    p.add_argument("--game", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.97)
    p.add_argument("--budget", type=int, default=10_000_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("ROBUSTDP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (GameValidationError, ValueError) as e:
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
