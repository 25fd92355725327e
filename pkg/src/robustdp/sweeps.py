"""Backup operators and Gauss-Seidel sweeps.

The primitive is a worst-case one-state backup: every candidate transition
row scores the expected immediate team payoff plus the discounted
continuation, and the adversary takes the minimum.  A Gauss-Seidel sweep
walks the states in order and feeds freshly updated values into the backups
of later states; states at or beyond the current one still see the incoming
value function.  Writing P = P_lower + P_upper with P_lower strictly lower
triangular and P_upper upper triangular including the diagonal, one sweep
under a fixed rule and fixed rows solves

    (I - lam * P_lower) x = r + lam * P_upper v

by forward substitution, i.e. it applies the iteration matrix
Q^{-1} R of the regular splitting Q = I - lam*P_lower, R = lam*P_upper.
Jacobi variants (Q = I, R = lam*P) keep the incoming value fixed for the
whole sweep and back the baseline solvers.

All functions are pure in (game, vector, parameters).  Ties in action or row
selection break to the lowest index so traces replay exactly; action
comparison is exact floating comparison with no epsilon fuzz.
"""

from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass

import numpy as np

from .model import (
    DEFAULT_ENUMERATION_BUDGET,
    BudgetExceededError,
    TeamDecisionRule,
    TeamMarkovGame,
)
from .perturb import PerturbationOracle


@dataclass(frozen=True)
class BackupResult:
    """One worst-case backup: value, minimising row, optional chosen action."""

    value: float
    argmin_row_index: int
    argmax_action: int | None = None


@dataclass(frozen=True)
class SweepResult:
    """One improvement sweep: updated values, greedy rule, worst-case rows.

    ``worst_model[k]`` indexes the minimising candidate row recorded at the
    chosen action of state k; partial evaluation reuses exactly these rows.
    """

    u0: np.ndarray
    rule: TeamDecisionRule
    worst_model: tuple[int, ...]


def gs_backup(
    game: TeamMarkovGame,
    v: np.ndarray,
    u_partial: np.ndarray,
    k: int,
    a: int,
    lam: float,
) -> BackupResult:
    """Gauss-Seidel worst-case backup of state k under joint action a.

    The continuation uses ``u_partial`` for states before k (already updated
    this sweep) and ``v`` from k onward.  Returns the minimum over candidate
    rows of row @ (payoff[k, a] + lam * continuation) and the first
    minimising row index.
    """
    v = np.asarray(v, dtype=float)
    u_partial = np.asarray(u_partial, dtype=float)
    w = np.concatenate([u_partial[:k], v[k:]])
    q = game.payoff_exp[k][a] + lam * (game.uncertainty[k][a].candidates @ w)
    j = int(np.argmin(q))
    return BackupResult(value=float(q[j]), argmin_row_index=j)


def jacobi_backup(
    game: TeamMarkovGame, v: np.ndarray, k: int, a: int, lam: float
) -> BackupResult:
    """Worst-case backup with the continuation fixed at ``v`` everywhere."""
    q = game.payoff_exp[k][a] + lam * (
        game.uncertainty[k][a].candidates @ np.asarray(v, dtype=float)
    )
    j = int(np.argmin(q))
    return BackupResult(value=float(q[j]), argmin_row_index=j)


def _improvement(
    game: TeamMarkovGame,
    v: np.ndarray,
    lam: float,
    approx: PerturbationOracle | None,
    step: int,
    gauss_seidel: bool,
) -> SweepResult:
    v = np.asarray(v, dtype=float)
    m = game.m
    n_actions = game.n_joint_actions
    exact_only = approx is None or approx.is_identity
    w = v.copy() if gauss_seidel else v
    u0 = np.empty(m)
    rule = [0] * m
    worst = [0] * m
    for k in range(m):
        pe_k = game.payoff_exp[k]
        unc_k = game.uncertainty[k]
        if exact_only:
            best_val = -np.inf
            best_a = 0
            best_row = 0
            for a in range(n_actions):
                q = pe_k[a] + lam * (unc_k[a].candidates @ w)
                j = int(np.argmin(q))
                val = float(q[j])
                if val > best_val:
                    best_val, best_a, best_row = val, a, j
            chosen = best_val
        else:
            exact_vals = np.empty(n_actions)
            argmins = [0] * n_actions
            for a in range(n_actions):
                q = pe_k[a] + lam * (unc_k[a].candidates @ w)
                j = int(np.argmin(q))
                argmins[a] = j
                exact_vals[a] = q[j]
            if approx.argmax_lock:
                best_a = int(np.argmax(exact_vals))
                chosen = approx.perturb(float(exact_vals[best_a]), (step, 0, k, best_a))
            else:
                perturbed = np.array(
                    [
                        approx.perturb(float(exact_vals[a]), (step, 0, k, a))
                        for a in range(n_actions)
                    ]
                )
                best_a = int(np.argmax(perturbed))
                chosen = float(perturbed[best_a])
            best_row = argmins[best_a]
        u0[k] = chosen
        if gauss_seidel:
            w[k] = chosen
        rule[k] = best_a
        worst[k] = best_row
    return SweepResult(u0=u0, rule=TeamDecisionRule(tuple(rule)), worst_model=tuple(worst))


def improvement_sweep(
    game: TeamMarkovGame,
    v: np.ndarray,
    lam: float,
    approx: PerturbationOracle | None = None,
    step: int = 0,
) -> SweepResult:
    """One Gauss-Seidel improvement sweep.

    For each state in order: back up every joint action (possibly through the
    perturbation oracle), keep the maximum as the updated value, record the
    first maximising action and the exact minimising row at that action.
    """
    return _improvement(game, v, lam, approx, step, gauss_seidel=True)


def jacobi_improvement_sweep(
    game: TeamMarkovGame, v: np.ndarray, lam: float
) -> SweepResult:
    """Exact improvement sweep with no within-sweep updates (baselines)."""
    return _improvement(game, v, lam, None, 0, gauss_seidel=False)


def evaluation_sweep(
    game: TeamMarkovGame,
    u: np.ndarray,
    rule: TeamDecisionRule,
    model_rows: tuple[int, ...],
    lam: float,
    approx: PerturbationOracle | None = None,
    step: int = 0,
    sweep_index: int = 1,
) -> np.ndarray:
    """One Gauss-Seidel sweep under a fixed rule and fixed worst-case rows.

    Freshly written values feed the remaining states of the same sweep, so
    with an identity oracle this is exactly the forward substitution solve of
    (I - lam*P_lower) x = r + lam*P_upper u.
    """
    w = np.asarray(u, dtype=float).copy()
    use_noise = approx is not None and not approx.is_identity
    for k in range(game.m):
        a = rule.joint_actions[k]
        j = model_rows[k]
        val = float(
            game.payoff_exp[k][a][j]
            + lam * (game.uncertainty[k][a].candidates[j] @ w)
        )
        if use_noise:
            val = approx.perturb(val, (step, sweep_index, k, a))
        w[k] = val
    return w


def gs_policy_update(
    game: TeamMarkovGame,
    v: np.ndarray,
    rule: TeamDecisionRule,
    model_rows: tuple[int, ...],
    lam: float,
) -> np.ndarray:
    """Exact single application of the splitting iteration for (rule, rows)."""
    return evaluation_sweep(game, v, rule, model_rows, lam)


def gs_optimality_update(
    game: TeamMarkovGame, v: np.ndarray, lam: float
) -> tuple[np.ndarray, TeamDecisionRule]:
    """Exact Gauss-Seidel maximin update; returns (new value, greedy rule).

    Realised sweep-wise, never by explicit enumeration of decision rules:
    the state-by-state max over actions of the row-wise min is the same
    maximin by row rectangularity.
    """
    sweep = improvement_sweep(game, v, lam)
    return sweep.u0, sweep.rule


def gs_bellman_residual(game: TeamMarkovGame, v: np.ndarray, lam: float) -> np.ndarray:
    """Componentwise residual of the Gauss-Seidel maximin update at v.

    Nonnegative residual marks the initialisation region from which the
    multistep solvers converge monotonically.
    """
    u0, _ = gs_optimality_update(game, v, lam)
    return u0 - np.asarray(v, dtype=float)


def greedy_multistep(
    game: TeamMarkovGame, v: np.ndarray, extra_sweeps: int, lam: float
) -> np.ndarray:
    """One exact improvement sweep, then ``extra_sweeps`` evaluation sweeps
    under the rule and rows the improvement recorded.

    With ``extra_sweeps`` 0 this is exactly the Gauss-Seidel maximin update;
    iterated to convergence it approaches the fixed policy's value under its
    recorded worst-case rows.
    """
    sweep = improvement_sweep(game, v, lam)
    u = sweep.u0
    for _ in range(int(extra_sweeps)):
        u = evaluation_sweep(game, u, sweep.rule, sweep.worst_model, lam)
    return u


_stack_cache: "weakref.WeakKeyDictionary[TeamMarkovGame, tuple]" = (
    weakref.WeakKeyDictionary()
)


def _rule_model_stacks(game: TeamMarkovGame) -> tuple[np.ndarray, np.ndarray, int]:
    """Stack every (rule, model) combination: transition matrices (N, m, m),
    expected one-step payoffs (N, m), and the combination count N."""
    cached = _stack_cache.get(game)
    if cached is not None:
        return cached
    m = game.m
    mats = []
    pays = []
    for combo in itertools.product(range(game.n_joint_actions), repeat=m):
        counts = [len(game.uncertainty[k][combo[k]]) for k in range(m)]
        grid = np.indices(counts).reshape(m, -1)
        n_mod = grid.shape[1]
        P = np.empty((n_mod, m, m))
        pe = np.empty((n_mod, m))
        for k in range(m):
            P[:, k, :] = game.uncertainty[k][combo[k]].candidates[grid[k]]
            pe[:, k] = game.payoff_exp[k][combo[k]][grid[k]]
        mats.append(P)
        pays.append(pe)
    P_all = np.concatenate(mats)
    pe_all = np.concatenate(pays)
    result = (P_all, pe_all, P_all.shape[0])
    _stack_cache[game] = result
    return result


def best_case_multistep(
    game: TeamMarkovGame,
    v: np.ndarray,
    extra_sweeps: int,
    lam: float,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> np.ndarray:
    """Componentwise best (extra_sweeps + 1)-sweep update over every decision
    rule and every admissible model.

    Test-oracle operator: cost grows with the rule count times the per-rule
    model count, so it is gated behind ``budget`` and meant for small
    instances only.
    """
    total_rules = game.n_joint_actions ** game.m
    if total_rules > budget:
        raise BudgetExceededError(total_rules, budget)
    P, pe, n_combo = _rule_model_stacks(game)
    if n_combo > budget:
        raise BudgetExceededError(n_combo, budget)
    v = np.asarray(v, dtype=float)
    m = game.m
    X = np.tile(v, (n_combo, 1))
    for _ in range(int(extra_sweeps) + 1):
        prev = X.copy()
        for k in range(m):
            lower = (
                np.einsum("nl,nl->n", P[:, k, :k], X[:, :k]) if k > 0 else 0.0
            )
            upper = np.einsum("nl,nl->n", P[:, k, k:], prev[:, k:])
            X[:, k] = pe[:, k] + lam * (lower + upper)
    return X.max(axis=0)


def fixed_model_arrays(
    game: TeamMarkovGame, rule: TeamDecisionRule, model_rows: tuple[int, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Dense transition matrix and expected one-step payoff vector for a
    fixed rule and per-state candidate-row choice."""
    m = game.m
    P = np.stack(
        [
            game.uncertainty[k][rule.joint_actions[k]].candidates[model_rows[k]]
            for k in range(m)
        ]
    )
    r = np.array(
        [game.payoff_exp[k][rule.joint_actions[k]][model_rows[k]] for k in range(m)]
    )
    return P, r


def gs_splitting(P: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Seidel regular splitting (Q, R) of I - lam*P:
    Q = I - lam * strict lower part of P, R = lam * upper part incl. diagonal."""
    P = np.asarray(P, dtype=float)
    Q = np.eye(P.shape[0]) - lam * np.tril(P, -1)
    R = lam * np.triu(P, 0)
    return Q, R


def backup_lattice(game: TeamMarkovGame, v: np.ndarray, lam: float) -> np.ndarray:
    """Exact Gauss-Seidel backup value of every (state, joint action) at v,
    as an (m, n_joint_actions) array; partial values build up via the
    per-state maxima exactly as in an improvement sweep."""
    v = np.asarray(v, dtype=float)
    w = v.copy()
    out = np.empty((game.m, game.n_joint_actions))
    for k in range(game.m):
        for a in range(game.n_joint_actions):
            q = game.payoff_exp[k][a] + lam * (game.uncertainty[k][a].candidates @ w)
            out[k, a] = q.min()
        w[k] = out[k].max()
    return out
