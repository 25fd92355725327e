import numpy as np
import pytest

import robustdp as r


def singleton_game(payoff: float = 1.0) -> r.TeamMarkovGame:
    """1 state, 1 player, 1 action, constant payoff."""
    return r.build_game(
        1, ["s1"], [["a0"]], np.full((1, 1, 1), payoff), [[[[1.0]]]]
    )


def two_state_chain() -> r.TeamMarkovGame:
    """2 states, single action; s1 rows {(1,0),(0,1)}, s2 stays put.

    Payoffs: r(s1,a,s2)=1, everything else 0.  The adversary in s1 chooses
    between staying (payoff 0) and moving to s2 (payoff 1 once).
    """
    pay = np.zeros((2, 1, 2))
    pay[0, 0, 1] = 1.0
    rows = [[[[1.0, 0.0], [0.0, 1.0]]], [[[0.0, 1.0]]]]
    return r.build_game(1, ["s1", "s2"], [["a0"]], pay, rows)


def mdp_game(seed: int = 5, m: int = 3, n_actions: int = 2) -> r.TeamMarkovGame:
    """Singleton-uncertainty game: a plain MDP wrapped in the robust model."""
    rng = np.random.default_rng(seed)
    pay = rng.uniform(-1, 1, (m, n_actions, m))
    rows = [
        [rng.dirichlet(np.ones(m), 1) for _ in range(n_actions)] for _ in range(m)
    ]
    states = [f"s{i + 1}" for i in range(m)]
    return r.build_game(1, states, [[f"a{j}" for j in range(n_actions)]], pay, rows)


@pytest.fixture(scope="session")
def rssd_game():
    return r.build_rssd()


@pytest.fixture(scope="session")
def rssd_oracle(rssd_game):
    return r.brute_force_maximin(rssd_game, 0.97)
