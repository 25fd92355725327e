"""Sequential social dilemma benchmark with uncertain state transitions.

Three states chain three stage games: a public goods game, a threshold stag
hunt, and a snowdrift game.  Every player picks C (cooperate) or D (defect);
payoffs depend on the cooperator count h and on the destination state
through that state's synergy factor.  With h cooperators the transition row
out of a state keeps mass 1 - mu*h on the current state and spreads mu*h
evenly over the other states; one candidate row per magnitude mu in a finite
set, which makes the transition model uncertain whenever h > 0.

Stage payoffs (a for a cooperator, b for a defector, cost c, n players,
synergy factor r and snowdrift benefit theta of the destination state):

* public goods:  a = h*r*c/n - c,  b = h*r*c/n
* stag hunt:     public-goods payoffs if h >= threshold, else a = -c, b = 0
* snowdrift:     a = theta - c/h, b = theta if h > 0, else a = b = 0

The team payoff stored in the game is the per-capita average
(h*a + (n-h)*b) / n.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .model import TeamMarkovGame, build_game

N_STATES = 3
STATE_NAMES = ("s1", "s2", "s3")
PUBLIC_GOODS, STAG_HUNT, SNOWDRIFT = range(N_STATES)


@dataclass(frozen=True)
class RssdParams:
    """Benchmark parameters.

    ``synergy[j]`` is the synergy factor of destination state j and must lie
    strictly between the cooperation cost and the player count for the
    public goods stage to be a dilemma.  ``snowdrift_benefit`` defaults to
    the synergy factors.  ``mu_set`` magnitudes must keep every row
    stochastic: mu * n_players <= 1.
    """

    n_players: int = 3
    cost: float = 1.0
    synergy: tuple[float, float, float] = (1.5, 1.8, 2.2)
    snowdrift_benefit: tuple[float, float, float] | None = None
    stag_threshold: int = 2
    mu_set: tuple[float, ...] = (0.1, 0.2, 0.3)

    def __post_init__(self):
        if self.n_players < 1:
            raise ValueError("n_players must be positive")
        if len(self.synergy) != N_STATES:
            raise ValueError(f"synergy must give one factor per state ({N_STATES})")
        for r in self.synergy:
            if not self.cost < r < self.n_players:
                raise ValueError(
                    f"synergy factor {r} must lie in (cost, n_players) = "
                    f"({self.cost}, {self.n_players})"
                )
        if self.snowdrift_benefit is None:
            object.__setattr__(self, "snowdrift_benefit", tuple(self.synergy))
        elif len(self.snowdrift_benefit) != N_STATES:
            raise ValueError("snowdrift_benefit must give one value per state")
        if not 1 <= self.stag_threshold <= self.n_players:
            raise ValueError("stag_threshold must be in [1, n_players]")
        if not self.mu_set:
            raise ValueError("mu_set must be nonempty")
        for mu in self.mu_set:
            if mu < 0.0 or mu * self.n_players > 1.0:
                raise ValueError(
                    f"mu {mu} must satisfy 0 <= mu and mu * n_players <= 1"
                )


def stage_payoffs(
    params: RssdParams, state: int, n_cooperators: int, next_state: int
) -> tuple[float, float]:
    """Cooperator and defector payoffs in ``state`` with ``n_cooperators``
    of the n players choosing C, as a function of the destination state."""
    if not 0 <= n_cooperators <= params.n_players:
        raise ValueError("n_cooperators out of range")
    c = params.cost
    n = params.n_players
    h = n_cooperators
    if state == SNOWDRIFT:
        theta = params.snowdrift_benefit[next_state]
        if h > 0:
            return theta - c / h, theta
        return 0.0, 0.0
    r = params.synergy[next_state]
    if state == STAG_HUNT and h < params.stag_threshold:
        return -c, 0.0
    return h * r * c / n - c, h * r * c / n


def team_payoff(
    params: RssdParams, state: int, n_cooperators: int, next_state: int
) -> float:
    """Per-capita team-average payoff for a cooperator count."""
    a, b = stage_payoffs(params, state, n_cooperators, next_state)
    h = n_cooperators
    n = params.n_players
    return (h * a + (n - h) * b) / n


def transition_row_candidates(params: RssdParams, state: int, n_cooperators: int) -> np.ndarray:
    """Candidate transition rows out of ``state`` for a cooperator count.

    One row per magnitude mu: 1 - mu*h stays, mu*h/(N_STATES-1) goes to each
    other state.  Rows are built with exact rational arithmetic so the float
    entries are the nearest representations of the intended values, and
    duplicate rows (all of them, when h = 0) collapse to one candidate.
    """
    h = n_cooperators
    rows: list[tuple[float, ...]] = []
    for mu in params.mu_set:
        leave = Fraction(str(mu)) * h
        off = leave / (N_STATES - 1)
        row = tuple(
            float(1 - leave) if l == state else float(off) for l in range(N_STATES)
        )
        if row not in rows:
            rows.append(row)
    return np.array(rows)


def build_rssd(params: RssdParams | None = None) -> TeamMarkovGame:
    """Assemble the benchmark game: 3 states, {C, D}^n joint actions,
    per-capita team payoffs, and one candidate transition row per mu."""
    params = params or RssdParams()
    n = params.n_players
    actions = [["C", "D"]] * n
    joint = list(itertools.product((0, 1), repeat=n))
    n_joint = len(joint)
    payoff = np.empty((N_STATES, n_joint, N_STATES))
    rows: list[list[np.ndarray]] = []
    for k in range(N_STATES):
        per_state = []
        for a, combo in enumerate(joint):
            h = combo.count(0)
            for l in range(N_STATES):
                payoff[k, a, l] = team_payoff(params, k, h, l)
            per_state.append(transition_row_candidates(params, k, h))
        rows.append(per_state)
    return build_game(n, list(STATE_NAMES), actions, payoff, rows)


class DilemmaViolation(NamedTuple):
    condition: str
    state: int
    n_cooperators: int
    next_state: int
    detail: str


@dataclass(frozen=True)
class DilemmaReport:
    ok: bool
    violations: tuple[DilemmaViolation, ...]


def check_dilemma_conditions(params: RssdParams) -> DilemmaReport:
    """Verify the social-dilemma payoff ordering in every state, for every
    cooperator count and destination state:

    (i)   a and b are nondecreasing in the cooperator count;
    (ii)  defectors strictly out-earn cooperators in every mixed group;
    (iii) full cooperation beats full defection (a_n > b_0).
    """
    n = params.n_players
    violations: list[DilemmaViolation] = []
    for k in range(N_STATES):
        for l in range(N_STATES):
            pay = [stage_payoffs(params, k, h, l) for h in range(n + 1)]
            for h in range(n):
                if pay[h + 1][0] < pay[h][0]:
                    violations.append(
                        DilemmaViolation(
                            "monotone_a", k, h, l,
                            f"a_{h + 1}={pay[h + 1][0]} < a_{h}={pay[h][0]}",
                        )
                    )
                if pay[h + 1][1] < pay[h][1]:
                    violations.append(
                        DilemmaViolation(
                            "monotone_b", k, h, l,
                            f"b_{h + 1}={pay[h + 1][1]} < b_{h}={pay[h][1]}",
                        )
                    )
            for h in range(1, n):
                if not pay[h][1] > pay[h][0]:
                    violations.append(
                        DilemmaViolation(
                            "mixed_defector_advantage", k, h, l,
                            f"b_{h}={pay[h][1]} <= a_{h}={pay[h][0]}",
                        )
                    )
            if not pay[n][0] > pay[0][1]:
                violations.append(
                    DilemmaViolation(
                        "cooperation_beats_defection", k, n, l,
                        f"a_{n}={pay[n][0]} <= b_0={pay[0][1]}",
                    )
                )
    return DilemmaReport(ok=not violations, violations=tuple(violations))
