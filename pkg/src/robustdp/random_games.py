"""Seeded random instance generator for small solver studies and tests."""

from __future__ import annotations

import math

import numpy as np

from .model import TeamMarkovGame, build_game


def random_game(
    seed: int,
    *,
    max_states: int = 4,
    n_players: int = 2,
    max_actions: int = 2,
    max_rows: int = 3,
    payoff_scale: float = 1.0,
) -> TeamMarkovGame:
    """Random small game, deterministic in ``seed``.

    States are drawn in [2, max_states], per-player action counts in
    [1, max_actions], candidate rows per (state, action) in [1, max_rows]
    from a flat Dirichlet, and payoffs uniformly from
    [-payoff_scale, payoff_scale].
    """
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, max_states + 1))
    sizes = [int(rng.integers(1, max_actions + 1)) for _ in range(n_players)]
    states = [f"s{i + 1}" for i in range(m)]
    actions = [[f"a{j}" for j in range(size)] for size in sizes]
    n_joint = math.prod(sizes)
    payoff = rng.uniform(-payoff_scale, payoff_scale, size=(m, n_joint, m))
    rows = [
        [
            rng.dirichlet(np.ones(m), size=int(rng.integers(1, max_rows + 1)))
            for _ in range(n_joint)
        ]
        for _ in range(m)
    ]
    return build_game(n_players, states, actions, payoff, rows)
