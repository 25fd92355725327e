"""Outer solver loops for robust team Markov games.

Four solvers share one skeleton: run an improvement sweep, test the
termination residual, then run a configurable number of cheaper evaluation
sweeps under the rule and worst-case rows the improvement recorded.

* ``ratpi`` - Gauss-Seidel improvement + Gauss-Seidel partial evaluation.
* ``ratvi`` - ratpi with zero evaluation sweeps per step.
* ``rmpi``  - Jacobi improvement + Jacobi partial evaluation (baseline).
* ``rvi``   - rmpi with zero evaluation sweeps per step (baseline).

The Gauss-Seidel pair accepts an injectable bounded-error oracle; its
termination threshold is (1-lam)*epsilon/(2*lam) - delta, where delta bounds
the per-query error through the oracle (|error| <= lam*delta).  The Jacobi
baselines always run exact and use the delta = 0 threshold, so iteration
counts are comparable across all four solvers.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .model import TeamDecisionRule, TeamMarkovGame, sup_norm
from .perturb import PerturbationOracle
from .sweeps import (
    evaluation_sweep,
    fixed_model_arrays,
    improvement_sweep,
    jacobi_improvement_sweep,
)

log = logging.getLogger("robustdp.solvers")

MtSchedule = int | Sequence[int] | Callable[[int], int]


def max_delta(lam: float, epsilon: float) -> float:
    """Strict upper bound on the approximation parameter delta."""
    if lam == 0.0:
        return math.inf
    return (1.0 - lam) ** 2 * epsilon / (2.0 * lam * (1.0 + lam))


def termination_threshold(lam: float, epsilon: float, delta: float) -> float:
    """Residual below which the improvement step stops the solver."""
    if lam == 0.0:
        return math.inf
    return (1.0 - lam) * epsilon / (2.0 * lam) - delta


@dataclass(frozen=True)
class SolverParams:
    """Shared solver configuration.

    ``mt_schedule`` gives the number of partial-evaluation sweeps per step:
    a constant, a list (last entry repeated), or a callable of the step
    index.  ``v0_mode`` selects the initial value function: ``"remark1"``
    fills every state with min payoff / (1 - lam), which keeps the maximin
    update residual nonnegative and hence the iterates monotone; ``"zeros"``
    starts at 0; an explicit array is used as given.
    """

    lam: float
    epsilon: float
    delta: float = 0.0
    mt_schedule: MtSchedule = 5
    v0_mode: str | Sequence[float] | np.ndarray = "remark1"
    max_iterations: int = 1_000_000
    approx_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lam must be in [0, 1), got {self.lam}")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        bound = max_delta(self.lam, self.epsilon)
        if not 0.0 <= self.delta < bound:
            raise ValueError(
                f"delta must satisfy 0 <= delta < {bound!r}, got {self.delta!r}"
            )
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if isinstance(self.mt_schedule, (list, tuple)):
            sched = tuple(int(x) for x in self.mt_schedule)
            if not sched or any(x < 0 for x in sched):
                raise ValueError("mt_schedule list must be nonempty and nonnegative")
            object.__setattr__(self, "mt_schedule", sched)
        elif isinstance(self.mt_schedule, int):
            if self.mt_schedule < 0:
                raise ValueError("mt_schedule must be nonnegative")


def _mt_at(schedule: MtSchedule, t: int) -> int:
    if callable(schedule):
        value = int(schedule(t))
    elif isinstance(schedule, int):
        value = schedule
    else:
        value = schedule[t] if t < len(schedule) else schedule[-1]
    if value < 0:
        raise ValueError(f"mt_schedule produced {value} at step {t}")
    return value


def initial_value(game: TeamMarkovGame, params: SolverParams) -> np.ndarray:
    """Initial value function selected by ``params.v0_mode``."""
    mode = params.v0_mode
    if isinstance(mode, str):
        if mode == "remark1":
            floor = float(game.payoff.min()) / (1.0 - params.lam)
            return np.full(game.m, floor)
        if mode == "zeros":
            return np.zeros(game.m)
        raise ValueError(f"unknown v0_mode {mode!r}")
    v0 = np.asarray(mode, dtype=float)
    if v0.shape != (game.m,):
        raise ValueError(f"explicit v0 must have shape ({game.m},)")
    if not np.all(np.isfinite(v0)):
        raise ValueError("explicit v0 must be finite")
    return v0.copy()


@dataclass
class SolverTrace:
    """Per-step record: residual, incoming value, greedy rule, sweep count,
    wall time.  For a terminated run the length is iterations + 1."""

    residuals: list[float] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)
    rules: list[TeamDecisionRule] = field(default_factory=list)
    eval_sweeps: list[int] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)

    def append(self, residual, value, rule, sweeps, wall) -> None:
        self.residuals.append(float(residual))
        self.values.append(np.asarray(value, dtype=float))
        self.rules.append(rule)
        self.eval_sweeps.append(int(sweeps))
        self.wall_times.append(float(wall))

    def __len__(self) -> int:
        return len(self.residuals)


@dataclass(frozen=True)
class SolverResult:
    """Returned policy with its robust evaluation and run metadata.

    ``worst_model`` holds the per-state minimising row indices certifying
    ``value`` (the robust evaluation of ``policy``).  ``terminated`` is set
    only when the residual fell below the termination threshold.
    """

    algo: str
    policy: TeamDecisionRule
    worst_model: tuple[int, ...]
    value: np.ndarray
    iterations: int
    terminated: bool
    trace: SolverTrace


def _run(
    game: TeamMarkovGame,
    params: SolverParams,
    approx: PerturbationOracle | None,
    gauss_seidel: bool,
    algo: str,
) -> SolverResult:
    lam = params.lam
    delta = params.delta if gauss_seidel else 0.0
    threshold = termination_threshold(lam, params.epsilon, delta)
    v = initial_value(game, params)
    trace = SolverTrace()
    last_rule: TeamDecisionRule | None = None
    for t in range(params.max_iterations):
        tick = time.perf_counter()
        if gauss_seidel:
            sweep = improvement_sweep(game, v, lam, approx, t)
        else:
            sweep = jacobi_improvement_sweep(game, v, lam)
        residual = sup_norm(sweep.u0 - v)
        mt = _mt_at(params.mt_schedule, t)
        trace.append(residual, v.copy(), sweep.rule, mt, time.perf_counter() - tick)
        last_rule = sweep.rule
        if residual < threshold:
            value, worst = evaluate_policy_robust(game, sweep.rule, lam)
            log.debug("%s terminated at t=%d residual=%.3e", algo, t, residual)
            return SolverResult(algo, sweep.rule, worst, value, t, True, trace)
        u = sweep.u0
        if gauss_seidel:
            for s in range(mt):
                u = evaluation_sweep(
                    game, u, sweep.rule, sweep.worst_model, lam, approx, t, s + 1
                )
        elif mt:
            P, r = fixed_model_arrays(game, sweep.rule, sweep.worst_model)
            for _ in range(mt):
                u = r + lam * (P @ u)
        v = u
    assert last_rule is not None
    value, worst = evaluate_policy_robust(game, last_rule, lam)
    log.warning("%s hit max_iterations=%d without terminating", algo, params.max_iterations)
    return SolverResult(
        algo, last_rule, worst, value, params.max_iterations, False, trace
    )


def solve_ratpi(
    game: TeamMarkovGame,
    params: SolverParams,
    approx: PerturbationOracle | None = None,
) -> SolverResult:
    """Gauss-Seidel robust team policy iteration with partial evaluation."""
    return _run(game, params, approx, gauss_seidel=True, algo="ratpi")


def solve_ratvi(
    game: TeamMarkovGame,
    params: SolverParams,
    approx: PerturbationOracle | None = None,
) -> SolverResult:
    """Gauss-Seidel robust team value iteration (no evaluation sweeps)."""
    result = _run(
        game, replace(params, mt_schedule=0), approx, gauss_seidel=True, algo="ratvi"
    )
    return result


def solve_rmpi(game: TeamMarkovGame, params: SolverParams) -> SolverResult:
    """Jacobi robust modified policy iteration baseline (exact backups)."""
    return _run(game, params, None, gauss_seidel=False, algo="rmpi")


def solve_rvi(game: TeamMarkovGame, params: SolverParams) -> SolverResult:
    """Jacobi robust value iteration baseline (exact backups)."""
    return _run(
        game, replace(params, mt_schedule=0), None, gauss_seidel=False, algo="rvi"
    )


SOLVERS = {
    "ratpi": solve_ratpi,
    "ratvi": solve_ratvi,
    "rmpi": solve_rmpi,
    "rvi": solve_rvi,
}


def evaluate_policy_robust(
    game: TeamMarkovGame,
    rule: TeamDecisionRule,
    lam: float,
    tol: float = 1e-12,
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Worst-case value of a fixed rule over its admissible models.

    Iterates the per-state fixed point v <- min over candidate rows of
    row @ (payoff + lam * v), which by row rectangularity equals the minimum
    over whole transition matrices.  Successive one-step backups alternate
    with exact evaluation of the current minimising rows, and the iteration
    stops once a backup step moves the value by less than
    tol*(1-lam)/(2*lam) in sup norm (or the minimising rows repeat, i.e. the
    fixed point is reached to linear-solve precision).  Returns the value
    and the final per-state minimising row indices.
    """
    game.validate_rule(rule)
    m = game.m
    acts = rule.joint_actions
    cand = [game.uncertainty[k][acts[k]].candidates for k in range(m)]
    pe = [game.payoff_exp[k][acts[k]] for k in range(m)]
    threshold = math.inf if lam == 0.0 else tol * (1.0 - lam) / (2.0 * lam)
    eye = np.eye(m)
    v = np.zeros(m)
    prev_rows: tuple[int, ...] | None = None
    q = v
    rows: tuple[int, ...] = (0,) * m
    for _ in range(10_000):
        q = np.empty(m)
        picked = [0] * m
        for k in range(m):
            scores = pe[k] + lam * (cand[k] @ v)
            j = int(np.argmin(scores))
            picked[k] = j
            q[k] = scores[j]
        rows = tuple(picked)
        if sup_norm(q - v) < threshold or rows == prev_rows:
            return q, rows
        P = np.stack([cand[k][rows[k]] for k in range(m)])
        r = np.array([pe[k][rows[k]] for k in range(m)])
        v = np.linalg.solve(eye - lam * P, r)
        prev_rows = rows
    log.warning("robust evaluation did not settle; returning last iterate")
    return q, rows


def evaluate_policy_exact(
    game: TeamMarkovGame,
    rule: TeamDecisionRule,
    model_rows: tuple[int, ...],
    lam: float,
) -> np.ndarray:
    """Value of a fixed rule under one fixed admissible model (dense solve)."""
    game.validate_rule(rule)
    P, r = fixed_model_arrays(game, rule, model_rows)
    return np.linalg.solve(np.eye(game.m) - lam * P, r)
