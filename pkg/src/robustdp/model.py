"""Finite team Markov games with rectangular transition uncertainty.

A game couples a finite state set, per-player finite action sets, a
team-average payoff tensor r(s, a, s'), and, for every (state, joint action)
pair, a finite set of candidate transition rows.  Under a fixed decision rule
the admissible transition matrices are the Cartesian product of the per-state
row sets (row-rectangular uncertainty), so the adversary may pick each row
independently.

Joint actions are indexed lexicographically over per-player action indices
with player 0 most significant; state order is the order given at
construction and fixes the Gauss-Seidel sweep order used by the solvers.

Instances are immutable after validation and safe to share across concurrent
solver runs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

#: Absolute tolerance on |row sum - 1| for candidate transition rows.
STOCHASTIC_ATOL = 1e-12
#: Entries in [NEGATIVE_CLAMP, 0) are treated as rounding noise and clamped.
NEGATIVE_CLAMP = -1e-15
#: Default guard for exhaustive enumerations.
DEFAULT_ENUMERATION_BUDGET = 10_000_000


class GameValidationError(ValueError):
    """A game description violates one or more structural invariants."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__(
            "invalid game description:\n" + "\n".join(f"  - {e}" for e in self.errors)
        )


class BudgetExceededError(RuntimeError):
    """An enumeration would exceed the caller-supplied budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(f"enumeration needs {required} items, budget is {budget}")


def sup_norm(v) -> float:
    """Sup norm max_s |v(s)| of a value function."""
    return float(np.max(np.abs(np.asarray(v, dtype=float))))


@dataclass(frozen=True)
class RowDistributionSet:
    """Nonempty finite set of candidate probability rows over the states.

    ``candidates`` has shape (n_candidates, m); every row is nonnegative and
    sums to 1 within ``STOCHASTIC_ATOL``.  Construct from raw data with
    :meth:`from_rows`, which clamps tiny negative noise and renormalises.
    """

    candidates: np.ndarray

    def __post_init__(self):
        arr = np.array(self.candidates, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("candidates must be a nonempty 2-D array of rows")
        if not np.all(np.isfinite(arr)):
            raise ValueError("candidate rows must be finite")
        if np.any(arr < 0.0):
            j = int(np.nonzero((arr < 0.0).any(axis=1))[0][0])
            raise ValueError(f"row {j} has a negative entry")
        sums = arr.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > STOCHASTIC_ATOL)[0]
        if bad.size:
            j = int(bad[0])
            raise ValueError(f"row {j} sum {sums[j]!r} != 1")
        arr.setflags(write=False)
        object.__setattr__(self, "candidates", arr)

    @classmethod
    def from_rows(cls, rows) -> "RowDistributionSet":
        """Build a row set from raw data, cleaning rounding noise.

        Entries in [-1e-15, 0) are clamped to 0; rows are renormalised only
        when their sum is already within the stochasticity tolerance, and
        rejected otherwise (silent renormalisation would mask data errors).
        """
        arr = np.array(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("expected a nonempty list of rows")
        if not np.all(np.isfinite(arr)):
            raise ValueError("rows must be finite")
        if np.any(arr < NEGATIVE_CLAMP):
            j = int(np.nonzero((arr < NEGATIVE_CLAMP).any(axis=1))[0][0])
            raise ValueError(f"row {j} entry {arr[j].min()!r} is negative")
        arr[(arr < 0.0)] = 0.0
        sums = arr.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > STOCHASTIC_ATOL)[0]
        if bad.size:
            j = int(bad[0])
            raise ValueError(f"row {j} sum {sums[j]!r} != 1")
        arr /= sums[:, None]
        return cls(arr)

    def __len__(self) -> int:
        return self.candidates.shape[0]


@dataclass(frozen=True)
class TeamDecisionRule:
    """Deterministic map from state index to joint-action index."""

    joint_actions: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "joint_actions", tuple(int(a) for a in self.joint_actions)
        )


@dataclass(frozen=True, eq=False)
class TeamMarkovGame:
    """Validated, immutable robust team Markov game.

    ``payoff`` holds the team-average payoff r(s, a, s') as an
    (m, n_joint_actions, m) array.  ``uncertainty[k][a]`` is the
    :class:`RowDistributionSet` of candidate transition rows out of state k
    under joint action a.  ``payoff_exp[k][a]`` caches the expected immediate
    payoff of every candidate row, ``candidates @ payoff[k, a]``.
    """

    n_players: int
    states: tuple[str, ...]
    player_actions: tuple[tuple[str, ...], ...]
    payoff: np.ndarray = field(repr=False)
    uncertainty: tuple[tuple[RowDistributionSet, ...], ...] = field(repr=False)
    r_max: float
    payoff_exp: tuple = field(init=False, repr=False)
    joint_action_tuples: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        payoff = np.array(self.payoff, dtype=float)
        payoff.setflags(write=False)
        object.__setattr__(self, "payoff", payoff)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(
            self, "player_actions", tuple(tuple(a) for a in self.player_actions)
        )
        pe = []
        for k, per_state in enumerate(self.uncertainty):
            row = []
            for a, rs in enumerate(per_state):
                vals = rs.candidates @ payoff[k, a]
                vals.setflags(write=False)
                row.append(vals)
            pe.append(tuple(row))
        object.__setattr__(self, "payoff_exp", tuple(pe))
        object.__setattr__(
            self,
            "joint_action_tuples",
            tuple(
                itertools.product(*[range(len(a)) for a in self.player_actions])
            ),
        )

    @property
    def m(self) -> int:
        return len(self.states)

    @property
    def n_joint_actions(self) -> int:
        return len(self.joint_action_tuples)

    def joint_index(self, per_player: Sequence[int]) -> int:
        """Joint-action index of a per-player action index tuple."""
        idx = 0
        for i, ai in enumerate(per_player):
            idx = idx * len(self.player_actions[i]) + int(ai)
        return idx

    def action_names(self, joint_action: int) -> tuple[str, ...]:
        """Per-player action names of a joint-action index."""
        per = self.joint_action_tuples[joint_action]
        return tuple(self.player_actions[i][ai] for i, ai in enumerate(per))

    def state_index(self, name: str) -> int:
        return self.states.index(name)

    def validate_rule(self, rule: TeamDecisionRule) -> None:
        if len(rule.joint_actions) != self.m:
            raise ValueError(
                f"rule covers {len(rule.joint_actions)} states, game has {self.m}"
            )
        for k, a in enumerate(rule.joint_actions):
            if not 0 <= a < self.n_joint_actions:
                raise ValueError(f"rule maps state {k} to invalid joint action {a}")


def build_game(
    n_players: int,
    states: Sequence[str],
    player_actions: Sequence[Sequence[str]],
    payoff,
    uncertainty_rows,
    r_max: float | None = None,
) -> TeamMarkovGame:
    """Construct and validate a game from in-memory parts.

    ``uncertainty_rows[k][a]`` is an array-like of raw candidate rows; each
    set is cleaned through :meth:`RowDistributionSet.from_rows`.  When
    ``r_max`` is omitted it is computed as max |payoff|.  Raises
    :class:`GameValidationError` listing every problem found.
    """
    errors: list[str] = []
    if not isinstance(n_players, int) or n_players < 1:
        errors.append("n_players must be a positive integer")
    states = list(states)
    if not states:
        errors.append("states must be nonempty")
    if len(set(states)) != len(states):
        errors.append("states contains duplicate names")
    player_actions = [list(a) for a in player_actions]
    if isinstance(n_players, int) and len(player_actions) != max(n_players, 1):
        errors.append(
            f"player_actions lists {len(player_actions)} action sets "
            f"for {n_players} players"
        )
    for i, acts in enumerate(player_actions):
        if not acts:
            errors.append(f"player {i}: empty action set")
        elif len(set(acts)) != len(acts):
            errors.append(f"player {i}: duplicate action names")
    if errors:
        raise GameValidationError(errors)

    m = len(states)
    n_joint = math.prod(len(a) for a in player_actions)
    joint_tuples = list(itertools.product(*[range(len(a)) for a in player_actions]))
    payoff = np.asarray(payoff, dtype=float)
    if payoff.shape != (m, n_joint, m):
        raise GameValidationError(
            [f"payoff shape {payoff.shape} != {(m, n_joint, m)}"]
        )
    if not np.all(np.isfinite(payoff)):
        errors.append("payoff contains non-finite entries")

    row_sets: list[list[RowDistributionSet | None]] = []
    if len(uncertainty_rows) != m or any(len(per) != n_joint for per in uncertainty_rows):
        errors.append("uncertainty must provide one row set per (state, joint action)")
        row_sets = []
    else:
        for k in range(m):
            per_state: list[RowDistributionSet | None] = []
            for a in range(n_joint):
                ctx = f"uncertainty[state={states[k]!r}, action={joint_tuples[a]}]"
                raw = uncertainty_rows[k][a]
                if raw is None:
                    errors.append(f"{ctx}: missing entry")
                    per_state.append(None)
                    continue
                try:
                    rs = RowDistributionSet.from_rows(raw)
                except ValueError as e:
                    errors.append(f"{ctx}: {e}")
                    per_state.append(None)
                    continue
                if rs.candidates.shape[1] != m:
                    errors.append(
                        f"{ctx}: rows have length {rs.candidates.shape[1]}, "
                        f"expected {m}"
                    )
                    per_state.append(None)
                else:
                    per_state.append(rs)
            row_sets.append(per_state)

    computed_r_max = float(np.max(np.abs(payoff))) if payoff.size else 0.0
    if r_max is None:
        r_max = computed_r_max
    elif float(r_max) + 1e-12 < computed_r_max:
        errors.append(f"r_max {r_max} < max |payoff| {computed_r_max}")
    if errors:
        raise GameValidationError(errors)
    return TeamMarkovGame(
        n_players=n_players,
        states=tuple(states),
        player_actions=tuple(tuple(a) for a in player_actions),
        payoff=payoff,
        uncertainty=tuple(tuple(per) for per in row_sets),  # type: ignore[arg-type]
        r_max=float(r_max),
    )


def validate_game(raw: Mapping) -> TeamMarkovGame:
    """Validate a parsed game description (the JSON document shape).

    Collects every problem found and raises :class:`GameValidationError`
    listing all of them.  Payoff entries may give ``r`` either as the team
    payoff (scalar) or as one payoff per player (averaged once at load).
    Unlisted payoff triples default to ``default_payoff`` only when that
    field is present.
    """
    errors: list[str] = []
    if not isinstance(raw, Mapping):
        raise GameValidationError(["top level must be a JSON object"])
    n_players = raw.get("n_players")
    if not isinstance(n_players, int) or n_players < 1:
        errors.append("n_players must be a positive integer")
        n_players = 1
    states = raw.get("states")
    if (
        not isinstance(states, list)
        or not states
        or not all(isinstance(s, str) for s in states)
    ):
        errors.append("states must be a nonempty array of state names")
        states = []
    elif len(set(states)) != len(states):
        errors.append("states contains duplicate names")
    player_actions = raw.get("player_actions")
    if not isinstance(player_actions, list) or len(player_actions) != n_players:
        errors.append("player_actions must list one action set per player")
        player_actions = []
    else:
        for i, acts in enumerate(player_actions):
            if not isinstance(acts, list) or not acts:
                errors.append(f"player {i}: empty action set")
    if errors:
        raise GameValidationError(errors)

    m = len(states)
    sizes = [len(a) for a in player_actions]
    n_joint = math.prod(sizes)
    state_idx = {s: i for i, s in enumerate(states)}

    def parse_state(name, where):
        if name not in state_idx:
            errors.append(f"{where}: unknown state {name!r}")
            return None
        return state_idx[name]

    def parse_action(a, where):
        if not isinstance(a, list) or len(a) != n_players:
            errors.append(f"{where}: 'a' must list one action index per player")
            return None
        idx = 0
        for i, ai in enumerate(a):
            if not isinstance(ai, int) or not 0 <= ai < sizes[i]:
                errors.append(f"{where}: action index {ai!r} out of range for player {i}")
                return None
            idx = idx * sizes[i] + ai
        return idx

    default = raw.get("default_payoff")
    if default is not None and not isinstance(default, (int, float)):
        errors.append("default_payoff must be a number")
        default = 0.0
    pay = np.full((m, n_joint, m), np.nan if default is None else float(default))
    seen: set[tuple[int, int, int]] = set()
    payoffs = raw.get("payoffs", [])
    if not isinstance(payoffs, list):
        errors.append("payoffs must be an array of entries")
        payoffs = []
    for i, ent in enumerate(payoffs):
        where = f"payoffs[{i}]"
        if not isinstance(ent, Mapping):
            errors.append(f"{where}: entry must be an object")
            continue
        si = parse_state(ent.get("s"), where)
        ai = parse_action(ent.get("a"), where)
        sj = parse_state(ent.get("s_next"), where)
        r = ent.get("r")
        if isinstance(r, list):
            if len(r) != n_players or not all(isinstance(x, (int, float)) for x in r):
                errors.append(f"{where}: 'r' list must give one payoff per player")
                r = None
            else:
                r = sum(float(x) for x in r) / n_players
        elif not isinstance(r, (int, float)):
            errors.append(f"{where}: 'r' must be a number or per-player list")
            r = None
        if si is None or ai is None or sj is None or r is None:
            continue
        if (si, ai, sj) in seen:
            errors.append(f"{where}: duplicate entry for this (s, a, s_next)")
            continue
        seen.add((si, ai, sj))
        pay[si, ai, sj] = float(r)
    if default is None:
        missing = np.argwhere(np.isnan(pay))
        if missing.size:
            k, a, l = (int(x) for x in missing[0])
            errors.append(
                f"payoffs: {len(missing)} triples unlisted and no default_payoff set "
                f"(first missing: s={states[k]!r}, a={list(_unflatten(a, sizes))}, "
                f"s_next={states[l]!r})"
            )

    grid: list[list[object | None]] = [[None] * n_joint for _ in range(m)]
    unc = raw.get("uncertainty")
    if not isinstance(unc, list):
        errors.append("uncertainty must be an array of entries")
        unc = []
    for i, ent in enumerate(unc):
        where = f"uncertainty[{i}]"
        if not isinstance(ent, Mapping):
            errors.append(f"{where}: entry must be an object")
            continue
        si = parse_state(ent.get("s"), where)
        ai = parse_action(ent.get("a"), where)
        rows = ent.get("rows")
        if si is None or ai is None:
            continue
        if grid[si][ai] is not None:
            errors.append(f"{where}: duplicate entry for this (s, a)")
            continue
        grid[si][ai] = rows
    for k in range(m):
        for a in range(n_joint):
            if grid[k][a] is None:
                errors.append(
                    f"uncertainty: missing entry for state {states[k]!r}, "
                    f"action {tuple(_unflatten(a, sizes))}"
                )
    if errors:
        raise GameValidationError(errors)
    r_max = raw.get("r_max")
    if r_max is not None and not isinstance(r_max, (int, float)):
        raise GameValidationError(["r_max must be a number"])
    return build_game(n_players, states, player_actions, pay, grid, r_max)


def _unflatten(joint: int, sizes: Sequence[int]) -> tuple[int, ...]:
    out = []
    for size in reversed(sizes):
        out.append(joint % size)
        joint //= size
    return tuple(reversed(out))


def game_to_dict(game: TeamMarkovGame) -> dict:
    """Canonical JSON-shaped dict: fixed key order, entries sorted by index.

    Only nonzero payoffs are listed (with ``default_payoff`` 0.0), so the
    writer output round-trips bit-identically through :func:`validate_game`.
    """
    payoffs = []
    for k in range(game.m):
        for a in range(game.n_joint_actions):
            for l in range(game.m):
                r = float(game.payoff[k, a, l])
                if r != 0.0:
                    payoffs.append(
                        {
                            "s": game.states[k],
                            "a": list(game.joint_action_tuples[a]),
                            "s_next": game.states[l],
                            "r": r,
                        }
                    )
    uncertainty = []
    for k in range(game.m):
        for a in range(game.n_joint_actions):
            uncertainty.append(
                {
                    "s": game.states[k],
                    "a": list(game.joint_action_tuples[a]),
                    "rows": [[float(x) for x in row] for row in
                             game.uncertainty[k][a].candidates],
                }
            )
    return {
        "n_players": game.n_players,
        "states": list(game.states),
        "player_actions": [list(a) for a in game.player_actions],
        "default_payoff": 0.0,
        "payoffs": payoffs,
        "uncertainty": uncertainty,
        "r_max": float(game.r_max),
    }


def load_game(path) -> TeamMarkovGame:
    """Load and validate a game JSON file."""
    raw = json.loads(Path(path).read_text())
    return validate_game(raw)


def save_game(game: TeamMarkovGame, path) -> None:
    """Write a game as canonical JSON (stable key order, sorted entries)."""
    Path(path).write_text(json.dumps(game_to_dict(game), indent=2) + "\n")


def count_decision_rules(game: TeamMarkovGame) -> int:
    return game.n_joint_actions ** game.m


def enumerate_decision_rules(
    game: TeamMarkovGame, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> Iterator[TeamDecisionRule]:
    """All decision rules, lexicographic over (state index, joint-action index).

    Raises :class:`BudgetExceededError` up front when the count
    ``n_joint_actions ** m`` exceeds ``budget``.
    """
    total = count_decision_rules(game)
    if total > budget:
        raise BudgetExceededError(total, budget)

    def gen():
        for combo in itertools.product(range(game.n_joint_actions), repeat=game.m):
            yield TeamDecisionRule(combo)

    return gen()


def count_policy_models(game: TeamMarkovGame, rule: TeamDecisionRule) -> int:
    return math.prod(
        len(game.uncertainty[k][rule.joint_actions[k]]) for k in range(game.m)
    )


def enumerate_policy_models(
    game: TeamMarkovGame,
    rule: TeamDecisionRule,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
    dedupe: bool = False,
) -> Iterator[np.ndarray]:
    """Every admissible transition matrix for a rule, row k drawn from
    the candidate set at (state k, rule(k)).

    With ``dedupe`` each distinct matrix is yielded once; without it the
    yield count equals the product of per-row candidate counts.
    """
    game.validate_rule(rule)
    total = count_policy_models(game, rule)
    if total > budget:
        raise BudgetExceededError(total, budget)
    cand = [game.uncertainty[k][rule.joint_actions[k]].candidates for k in range(game.m)]

    def gen():
        seen: set[bytes] = set()
        for combo in itertools.product(*[range(c.shape[0]) for c in cand]):
            P = np.stack([cand[k][j] for k, j in enumerate(combo)])
            if dedupe:
                key = P.tobytes()
                if key in seen:
                    continue
                seen.add(key)
            yield P

    return gen()
