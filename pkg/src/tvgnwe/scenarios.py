"""Builders for the shipped scenarios and random test instances.

Named scenarios (see ``SCENARIOS``):

``example1``
    Two scalar agents sharing the equality ``x1 + x2 = 0``; the myopic
    best response oscillates.
``example2:A1``, ``example2:A2``, ``example2:alt``
    Two unconstrained scalar agents with quadratic costs and a static or
    alternating network; the alternating case has no persistent
    equilibrium.
``example3``
    Two agents on ``[-1, 1]`` with the shrinking coupling row
    ``x1 + x2 >= m(k)`` and doubly stochastic random networks.
``consensus15``
    Box-constrained consensus of 15 agents in ``R^5`` with pairwise rows
    ``|x_i - x_j| <= s(k)`` and a fresh small-world network at every k.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .exceptions import UnsupportedScenarioError, ValidationError
from .game import (BoxSet, CyclicNetwork, GameSpec, LocalCost, ScheduledConstraints, Schedule,
                   SmallWorldNetwork, StaticConstraints, StaticNetwork)
from .graph import generate_small_world
from .solver import ClosedFormBR

__all__ = ["Schedule", "A1", "A2", "build_example1", "build_example2", "build_example3",
           "build_constrained_consensus", "pairwise_rows", "random_game", "Scenario",
           "SCENARIOS", "resolve_scenario"]

A1 = np.array([[0.5, 0.5], [0.5, 0.5]])
A2 = np.array([[1.0, 2.0], [1.0, 2.0]]) / 3.0


def build_example1():
    """Equality-coupled pair; returns ``(game, best_response)``.

    The equality is stored as the two rows ``x1 + x2 <= 0`` and
    ``-x1 - x2 <= 0``.  Costs are zero, so the best response is
    ``x_i+ = -x_j``.
    """
    C = np.array([[1.0, 1.0], [-1.0, -1.0]])
    game = GameSpec(2, 1, 2, [BoxSet.unbounded(1)] * 2, [LocalCost.zero()] * 2,
                    StaticConstraints(C, np.zeros(2)), StaticNetwork(A1))
    return game, ClosedFormBR(game)


def build_example2(network="A1"):
    """Unconstrained pair with ``f_i(y) = (y - i)^2 / 2``.

    Parameters
    ----------
    network : {"A1", "A2", "alt"}
        Static ``A1``, static ``A2``, or alternation ``A1, A2, A1, ...``.

    Notes
    -----
    With best response ``x+ = (r + A x) / 2`` the equilibria solve
    ``(2I - A) x = r``: ``(5/4, 7/4)`` under ``A1``, ``(4/3, 11/6)`` under ``A2``.
    """
    key = str(network).lower()
    if key == "a1":
        net = StaticNetwork(A1)
    elif key == "a2":
        net = StaticNetwork(A2)
    elif key in ("alt", "alternate"):
        net = CyclicNetwork([A1, A2], period=1)
    else:
        raise ValueError(f"unknown example-2 network {network!r}")
    costs = [LocalCost.quadratic([1.0], 1.0), LocalCost.quadratic([2.0], 1.0)]
    return GameSpec(2, 1, 0, [BoxSet.unbounded(1)] * 2, costs,
                    StaticConstraints(np.zeros((0, 2)), np.zeros(0)), net)


EXAMPLE3_SCHEDULE = ((0, -1.0), (10, -0.8), (25, -0.6), (40, -0.4), (50, -0.25))


def build_example3(m_schedule=None, net_seed=3):
    """Pair on ``[-1, 1]^2`` with the row ``-x1 - x2 <= -m(k)``.

    ``m_schedule`` defaults to a staircase from -1 that settles at -0.25
    from ``k = 50``; its values must stay in ``[-1, -0.25]``.
    """
    if m_schedule is None:
        m_schedule = Schedule.piecewise(EXAMPLE3_SCHEDULE)
    _check_m_schedule(m_schedule)
    box = BoxSet([-1.0], [1.0])
    cons = ScheduledConstraints([[-1.0, -1.0]], [0.0], [-1.0], m_schedule)
    net = SmallWorldNetwork(2, net_seed, doubly_stochastic=True)
    return GameSpec(2, 1, 1, [box, box], [LocalCost.zero()] * 2, cons, net)


def _check_m_schedule(s):
    if s.kind == "const":
        vals = [s.value]
    elif s.kind == "piecewise":
        vals = [v for _, v in s.points]
    else:
        raise ValidationError("the example-3 schedule must be constant or piecewise")
    if any(v < -1.0 or v > -0.25 for v in vals) or vals[-1] != -0.25:
        raise ValidationError("m(k) must stay in [-1, -0.25] and settle at -0.25")


def pairwise_rows(N, n):
    """``C`` for ``x_i - x_j <= s`` and ``x_j - x_i <= s`` over all pairs.

    Rows are ordered by ``(i, j)`` with ``i < j``, then by coordinate, each
    row followed by its mirror, giving ``2 n N (N-1) / 2`` rows.
    """
    pairs = list(combinations(range(N), 2))
    C = np.zeros((2 * len(pairs) * n, N * n))
    r = 0
    for i, j in pairs:
        for t in range(n):
            C[r, i * n + t], C[r, j * n + t] = 1.0, -1.0
            C[r + 1, i * n + t], C[r + 1, j * n + t] = -1.0, 1.0
            r += 2
    return C


CONSENSUS_SCHEDULE = (50.0, 0.995, 0.5)


def build_constrained_consensus(Nagents=15, n=5, seed=7, s_schedule=None, box_seed=None,
                                m=4, p=0.2, a_min=0.1):
    """Box-constrained consensus with shrinking pairwise disagreement bounds.

    Agent ``i`` lives in the box ``[lo_i, hi_i]`` with every ``lo`` uniform
    in ``[-100, -5]`` and every ``hi`` uniform in ``[5, 100]``; the costs
    are zero.  The coupling rows are ``|x_i - x_j| <= s(k)`` componentwise
    (``pairwise_rows``), with ``s`` geometric from 50 with ratio 0.995 and
    floor 0.5 by default.  ``A(k)`` is a fresh small-world draw per ``k``
    seeded by ``(seed, k)``; ``box_seed`` defaults to ``seed``.
    """
    if s_schedule is None:
        s_schedule = Schedule.geometric(*CONSENSUS_SCHEDULE)
    rng = np.random.default_rng([seed if box_seed is None else box_seed, 1])
    lo = rng.uniform(-100.0, -5.0, size=(Nagents, n))
    hi = rng.uniform(5.0, 100.0, size=(Nagents, n))
    C = pairwise_rows(Nagents, n)
    M = C.shape[0]
    cons = ScheduledConstraints(C, np.zeros(M), np.ones(M), s_schedule)
    net = SmallWorldNetwork(Nagents, seed, m=m, p=p, a_min=a_min)
    return GameSpec(Nagents, n, M, [BoxSet(lo[i], hi[i]) for i in range(Nagents)],
                    [LocalCost.zero()] * Nagents, cons, net)


def random_game(seed, N=None, n=None, M=None):
    """Random static instance for property tests.

    ``N`` in [3, 12], ``n`` in [1, 4] and ``M`` in [0, 30] are drawn when
    not given.  Boxes contain the origin, costs are a random mix of zero
    and quadratic, and ``c >= 0`` so the origin is feasible.
    """
    rng = np.random.default_rng(seed)
    N = int(rng.integers(3, 13)) if N is None else N
    n = int(rng.integers(1, 5)) if n is None else n
    M = int(rng.integers(0, 31)) if M is None else M
    mh = int(rng.integers(1, (N - 1) // 2 + 1)) if N >= 3 else 1
    A = generate_small_world(N, mh, float(rng.uniform(0, 0.5)), float(rng.uniform(0.05, 0.5)),
                             rng)
    boxes, costs = [], []
    for _ in range(N):
        boxes.append(BoxSet(-rng.uniform(0.5, 5.0, n), rng.uniform(0.5, 5.0, n)))
        if rng.random() < 0.5:
            costs.append(LocalCost.zero())
        else:
            costs.append(LocalCost.quadratic(rng.uniform(-2, 2, n), rng.uniform(0.1, 3.0)))
    C = rng.standard_normal((M, N * n)) * (rng.random((M, N * n)) < 0.4)
    c = rng.uniform(0.0, 2.0, M)
    return GameSpec(N, n, M, boxes, costs, StaticConstraints(C, c), StaticNetwork(A))


# ---------------------------------------------------------------------------
# registry

@dataclass
class Scenario:
    name: str
    game: GameSpec
    x0: np.ndarray
    br: ClosedFormBR = None


def _with_br(name, game, x0):
    try:
        br = ClosedFormBR(game)
    except UnsupportedScenarioError:
        br = None
    return Scenario(name, game, np.asarray(x0, dtype=float), br)


def _example1(seed):
    game, br = build_example1()
    return Scenario("example1", game, np.array([1.0, 1.0]), br)


def _example2(key):
    def make(seed):
        return _with_br(f"example2:{key}", build_example2(key), [0.0, 0.0])
    return make


def _example3(seed):
    game = build_example3(net_seed=3 if seed is None else seed)
    return _with_br("example3", game, [-1.0, 0.5])


def _consensus15(seed):
    seed = 7 if seed is None else seed
    game = build_constrained_consensus(seed=seed)
    rng = np.random.default_rng([seed, 2])
    x0 = rng.uniform(game.lower, game.upper)
    return _with_br("consensus15", game, x0)


SCENARIOS = {
    "example1": _example1,
    "example2:A1": _example2("A1"),
    "example2:A2": _example2("A2"),
    "example2:alt": _example2("alt"),
    "example3": _example3,
    "consensus15": _consensus15,
}


def resolve_scenario(name, seed=None):
    """Build a named scenario with its default initial point.

    ``seed`` replaces the network seed of ``example3`` and the network, box
    and initial-point seed of ``consensus15``; other scenarios ignore it.

    Raises
    ------
    KeyError
        For unknown names.
    """
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    return SCENARIOS[name](seed)
