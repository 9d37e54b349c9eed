"""Static description of a time-varying network game.

A game is ``N`` agents with strategies in ``R^n``, local box sets, a local
cost per agent, ``M`` affine coupling rows ``C(k) x <= c(k)`` and a
row-stochastic communication matrix ``A(k)``.  The coupling and network
data are queried through small provider objects so that every query at a
time index ``k`` is a pure function of ``k``.

The module also owns the scenario JSON schema (``game_to_dict`` /
``game_from_dict``).
"""

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import graph
from .exceptions import ShapeError, ValidationError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# local data

@dataclass(frozen=True, eq=False)
class BoxSet:
    """Axis-aligned box ``{y : lo <= y <= hi}``; bounds may be infinite."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lo))
        hi = _frozen(np.atleast_1d(self.hi))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("box bounds must be vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValidationError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise ValidationError("box requires lo <= hi elementwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unbounded(cls, n):
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def dim(self):
        return self.lo.size

    @property
    def is_compact(self):
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def contains(self, y, tol=0.0):
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lo - tol) and np.all(y <= self.hi + tol))


@dataclass(frozen=True, eq=False)
class LocalCost:
    """Local objective ``f(y) = (w/2)||y - r||^2``; ``w = 0`` is the zero cost.

    The box indicator is added separately by the prox routines, so the
    full local term is ``f + indicator(box)``.
    """

    weight: float = 0.0
    target: np.ndarray = None

    def __post_init__(self):
        w = float(self.weight)
        if not w >= 0.0 or not math.isfinite(w):
            raise ValidationError(f"cost weight must be finite and >= 0, got {w}")
        object.__setattr__(self, "weight", w)
        if self.target is not None:
            object.__setattr__(self, "target", _frozen(np.atleast_1d(self.target)))
        elif w > 0:
            raise ValidationError("a quadratic cost needs a target vector")

    @classmethod
    def zero(cls):
        return cls(0.0, None)

    @classmethod
    def quadratic(cls, target, weight=1.0):
        return cls(weight, target)

    @property
    def family(self):
        return "zero" if self.weight == 0.0 else "quadratic"

    def target_vector(self, n):
        if self.target is None:
            return np.zeros(n)
        return self.target

    def __call__(self, y):
        if self.weight == 0.0:
            return 0.0
        d = np.asarray(y, dtype=float) - self.target
        return 0.5 * self.weight * float(d @ d)


# ---------------------------------------------------------------------------
# scalar schedules

@dataclass(frozen=True, eq=False)
class Schedule:
    """Scalar sequence ``s(k)``.

    kinds
        ``"const"``: ``value``.
        ``"geometric"``: ``max(floor, value * ratio**k)``.
        ``"piecewise"``: piecewise constant; ``points`` is a list of
        ``(k_start, value)`` pairs sorted by ``k_start``, the first one at 0.
    """

    kind: str
    value: float = 0.0
    ratio: float = 1.0
    floor: float = 0.0
    points: tuple = ()

    def __post_init__(self):
        if self.kind not in ("const", "geometric", "piecewise"):
            raise ValidationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "geometric":
            if not (0.0 < self.ratio < 1.0) or self.value <= 0 or self.floor <= 0:
                raise ValidationError("geometric schedule needs v0 > 0, ratio in (0,1), floor > 0")
        if self.kind == "piecewise":
            pts = tuple((int(k), float(v)) for k, v in self.points)
            if not pts or pts[0][0] != 0:
                raise ValidationError("piecewise schedule must start at k = 0")
            if any(a[0] >= b[0] for a, b in zip(pts, pts[1:])):
                raise ValidationError("piecewise breakpoints must be strictly increasing")
            object.__setattr__(self, "points", pts)

    @classmethod
    def const(cls, value):
        return cls("const", value=float(value))

    @classmethod
    def geometric(cls, v0, ratio, floor):
        return cls("geometric", value=float(v0), ratio=float(ratio), floor=float(floor))

    @classmethod
    def piecewise(cls, points):
        return cls("piecewise", points=tuple(points))

    def __call__(self, k):
        if self.kind == "const":
            return self.value
        if self.kind == "geometric":
            return max(self.floor, self.value * self.ratio ** k)
        v = self.points[0][1]
        for start, val in self.points:
            if k >= start:
                v = val
            else:
                break
        return v

    def to_dict(self):
        if self.kind == "const":
            return {"kind": "const", "value": self.value}
        if self.kind == "geometric":
            return {"kind": "geometric", "v0": self.value, "ratio": self.ratio, "floor": self.floor}
        return {"kind": "piecewise", "points": [[k, v] for k, v in self.points]}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "const":
            return cls.const(d["value"])
        if kind == "geometric":
            return cls.geometric(d["v0"], d["ratio"], d["floor"])
        if kind == "piecewise":
            return cls.piecewise([tuple(p) for p in d["points"]])
        raise ValidationError(f"unknown schedule kind {kind!r}")


# ---------------------------------------------------------------------------
# coupling constraint providers

class StaticConstraints:
    """Time-invariant coupling rows ``C x <= c``."""

    mode = "static"

    def __init__(self, C, c):
        self.C = _frozen(np.atleast_2d(C) if np.size(C) else np.zeros((0, 0)))
        self.c = _frozen(np.atleast_1d(c) if np.size(c) else np.zeros(0))
        if self.C.shape[0] != self.c.size:
            raise ShapeError("C and c disagree on the number of rows")

    @property
    def rows(self):
        return self.c.size

    def __call__(self, k):
        return self.C, self.c

    def to_dict(self):
        return {"mode": "static", "C": self.C.tolist(), "c": self.c.tolist()}


class ScheduledConstraints:
    """Fixed ``C`` with right-hand side ``c(k) = offset + s(k) * direction``."""

    mode = "schedule"

    def __init__(self, C, offset, direction, schedule):
        self.C = _frozen(np.atleast_2d(C))
        self.offset = _frozen(np.atleast_1d(offset))
        self.direction = _frozen(np.atleast_1d(direction))
        self.schedule = schedule
        if not (self.C.shape[0] == self.offset.size == self.direction.size):
            raise ShapeError("C, offset and direction disagree on the number of rows")

    @property
    def rows(self):
        return self.offset.size

    def __call__(self, k):
        c = self.offset + self.schedule(k) * self.direction
        c.setflags(write=False)
        return self.C, c

    def to_dict(self):
        return {"mode": "schedule", "C": self.C.tolist(), "offset": self.offset.tolist(),
                "direction": self.direction.tolist(), "schedule": self.schedule.to_dict()}


class CallableConstraints:
    """Arbitrary ``k -> (C(k), c(k))``; not serialisable."""

    mode = "callable"

    def __init__(self, fn, rows):
        self.fn = fn
        self._rows = int(rows)

    @property
    def rows(self):
        return self._rows

    def __call__(self, k):
        C, c = self.fn(k)
        return np.asarray(C, dtype=float), np.asarray(c, dtype=float)

    def to_dict(self):
        raise ValidationError("callable constraint schedules cannot be serialised")


# ---------------------------------------------------------------------------
# network providers

class StaticNetwork:
    mode = "static"

    def __init__(self, A):
        self.A = _frozen(np.atleast_2d(A))

    @property
    def size(self):
        return self.A.shape[0]

    def __call__(self, k):
        return self.A

    def to_dict(self):
        return {"mode": "static", "A": self.A.tolist()}


class CyclicNetwork:
    """Cycles through ``matrices``, holding each one for ``period`` steps."""

    mode = "cycle"

    def __init__(self, matrices, period=1):
        self.matrices = tuple(_frozen(np.atleast_2d(m)) for m in matrices)
        self.period = int(period)
        if not self.matrices or self.period < 1:
            raise ValidationError("cycle needs at least one matrix and period >= 1")
        if len({m.shape for m in self.matrices}) != 1:
            raise ShapeError("all matrices in a cycle must share a shape")

    @property
    def size(self):
        return self.matrices[0].shape[0]

    def __call__(self, k):
        return self.matrices[(k // self.period) % len(self.matrices)]

    def to_dict(self):
        return {"mode": "cycle", "matrices": [m.tolist() for m in self.matrices],
                "period": self.period}


class SmallWorldNetwork:
    """Fresh random small-world digraph at every ``k``.

    The draw at time ``k`` is seeded by ``(seed, k)``, so ``A(k)`` is a pure
    function of ``k`` and queries in any order agree.  With
    ``doubly_stochastic`` the draw is symmetrised and Sinkhorn balanced.
    """

    mode = "small_world"

    def __init__(self, N, seed, m=2, p=0.2, a_min=0.1, doubly_stochastic=False):
        self.N = int(N)
        self.seed = int(seed)
        self.m = int(m)
        self.p = float(p)
        self.a_min = float(a_min)
        self.doubly_stochastic = bool(doubly_stochastic)
        self._at = lru_cache(maxsize=None)(self._draw)

    @property
    def size(self):
        return self.N

    def _draw(self, k):
        rng = np.random.default_rng([self.seed, int(k)])
        if self.doubly_stochastic:
            A = graph.random_doubly_stochastic(self.N, self.m, self.p, self.a_min, rng)
        else:
            A = graph.generate_small_world(self.N, self.m, self.p, self.a_min, rng)
        A.setflags(write=False)
        return A

    def __call__(self, k):
        return self._at(int(k))

    def to_dict(self):
        return {"mode": "small_world", "N": self.N, "seed": self.seed, "m": self.m,
                "p": self.p, "a_min": self.a_min,
                "doubly_stochastic": self.doubly_stochastic}


# ---------------------------------------------------------------------------
# the game

@dataclass(eq=False)
class GameSpec:
    """Full time-varying game.

    Parameters
    ----------
    N, n, M : int
        Agents, strategy dimension per agent, coupling rows.
    boxes : sequence of BoxSet
        Local feasible sets, one per agent.
    costs : sequence of LocalCost
        Local objectives, one per agent.
    constraints : constraint provider
        Callable ``k -> (C(k), c(k))`` with ``C(k)`` of shape ``(M, N n)``.
    network : network provider
        Callable ``k -> A(k)``.
    alpha_rule : {"pf", "uniform"} or sequence of float
        How the dual burden is split between agents.  ``"pf"`` uses the
        left Perron-Frobenius vector of ``A(k)``.
    """

    N: int
    n: int
    M: int
    boxes: tuple
    costs: tuple
    constraints: object
    network: object
    alpha_rule: object = "pf"
    _pf_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.boxes = tuple(self.boxes)
        self.costs = tuple(self.costs)
        if self.N < 1 or self.n < 1 or self.M < 0:
            raise ValidationError("need N >= 1, n >= 1, M >= 0")
        if len(self.boxes) != self.N or len(self.costs) != self.N:
            raise ValidationError("boxes and costs need exactly N entries")
        for b in self.boxes:
            if b.dim != self.n:
                raise ShapeError("every box must have dimension n")
        for f in self.costs:
            if f.target is not None and f.target.size != self.n:
                raise ShapeError("every cost target must have dimension n")
        if self.constraints.rows != self.M:
            raise ShapeError(f"constraint provider has {self.constraints.rows} rows, M = {self.M}")
        if self.network.size != self.N:
            raise ShapeError("network size differs from N")
        if not isinstance(self.alpha_rule, str):
            a = np.asarray(self.alpha_rule, dtype=float)
            if a.shape != (self.N,) or np.any(a <= 0) or abs(a.sum() - 1.0) > 1e-12:
                raise ValidationError("explicit alpha must be N positive weights summing to 1")
            self.alpha_rule = tuple(float(v) for v in a)
        elif self.alpha_rule not in ("pf", "uniform"):
            raise ValidationError(f"unknown alpha rule {self.alpha_rule!r}")
        self.lower = _frozen(np.concatenate([b.lo for b in self.boxes]))
        self.upper = _frozen(np.concatenate([b.hi for b in self.boxes]))
        self._static_pair = None
        if isinstance(self.constraints, StaticConstraints):
            # shape-checked once; coupling() then skips the per-call check
            self._static_pair = self.coupling(0)

    @property
    def dim(self):
        return self.N * self.n

    def adjacency(self, k):
        return self.network(k)

    def coupling(self, k):
        if self._static_pair is not None:
            return self._static_pair
        C, c = self.constraints(k)
        if C.shape != (self.M, self.dim) or c.shape != (self.M,):
            if self.M == 0:
                return np.zeros((0, self.dim)), np.zeros(0)
            raise ShapeError(f"C(k) must be {self.M}x{self.dim}, got {C.shape}")
        return C, c

    def pf_vector(self, k):
        k = int(k)
        q = self._pf_cache.get(k)
        if q is None:
            q = graph.left_pf_eigenvector(self.adjacency(k))
            q.setflags(write=False)
            self._pf_cache[k] = q
        return q

    def alpha(self, k):
        if self.alpha_rule == "pf":
            return self.pf_vector(k)
        if self.alpha_rule == "uniform":
            return np.full(self.N, 1.0 / self.N)
        return np.asarray(self.alpha_rule)

    def blocks(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ShapeError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x.reshape(self.N, self.n)

    def validate(self, horizon=1, require_compact=False, tol=1e-12):
        """Check local sets and every ``A(k)`` for ``k < horizon``.

        Raises ValidationError on the first failure.
        """
        if require_compact and not all(b.is_compact for b in self.boxes):
            raise ValidationError("local sets must be compact (finite boxes)")
        for k in range(horizon):
            rep = graph.validate_adjacency(self.adjacency(k), tol=tol)
            if not rep.ok:
                raise ValidationError(f"A({k}) fails: {', '.join(rep.failures)}")
            self.coupling(k)
        return True


# ---------------------------------------------------------------------------
# feasibility

@dataclass(frozen=True)
class FeasibilityReport:
    in_box: bool
    max_violation: float


def constraint_residual(game, x, k):
    C, c = game.coupling(k)
    return C @ np.asarray(x, dtype=float) - c


def collective_feasible_check(game, x, k, tol=0.0):
    """Box membership and worst coupling-row violation of profile ``x`` at ``k``."""
    x = game.blocks(x).ravel()
    in_box = bool(np.all(x >= game.lower - tol) and np.all(x <= game.upper + tol))
    if game.M == 0:
        return FeasibilityReport(in_box, 0.0)
    viol = max(0.0, float(np.max(constraint_residual(game, x, k))))
    return FeasibilityReport(in_box, viol)


def local_feasible_set_value(game, i, x_others, k):
    """Halfspace data ``(G, h)`` of agent ``i``'s coupling set, ``G y <= h``.

    ``x_others`` is the stacked profile of the other agents (length
    ``(N-1) n``, agent order preserved).
    """
    if not 0 <= i < game.N:
        raise ShapeError(f"agent index {i} out of range")
    x_others = np.asarray(x_others, dtype=float)
    if x_others.shape != ((game.N - 1) * game.n,):
        raise ShapeError("x_others must have length (N-1)*n")
    C, c = game.coupling(k)
    n = game.n
    G = C[:, i * n:(i + 1) * n]
    mask = np.ones(game.dim, dtype=bool)
    mask[i * n:(i + 1) * n] = False
    h = c - C[:, mask] @ x_others
    return G.copy(), h


# ---------------------------------------------------------------------------
# JSON schema

def _bound_list(v):
    return [None if not math.isfinite(t) else float(t) for t in v]


def _bound_array(v, sign):
    return np.array([sign * np.inf if t is None else float(t) for t in v])


def game_to_dict(game):
    if isinstance(game.alpha_rule, str):
        alpha = game.alpha_rule
    else:
        alpha = list(game.alpha_rule)
    return {
        "N": game.N,
        "n": game.n,
        "M": game.M,
        "boxes": [{"lo": _bound_list(b.lo), "hi": _bound_list(b.hi)} for b in game.boxes],
        "costs": [{"family": f.family,
                   "target": None if f.target is None else f.target.tolist(),
                   "weight": f.weight} for f in game.costs],
        "constraints": game.constraints.to_dict(),
        "network": game.network.to_dict(),
        "alpha_rule": alpha,
    }


def _constraints_from_dict(d, M, dim):
    mode = d["mode"]
    if mode == "static":
        C = np.array(d["C"], dtype=float).reshape(M, dim)
        return StaticConstraints(C, np.array(d["c"], dtype=float))
    if mode == "schedule":
        C = np.array(d["C"], dtype=float).reshape(M, dim)
        return ScheduledConstraints(C, d["offset"], d["direction"],
                                    Schedule.from_dict(d["schedule"]))
    raise ValidationError(f"unknown constraint mode {mode!r}")


def _network_from_dict(d):
    mode = d["mode"]
    if mode == "static":
        return StaticNetwork(d["A"])
    if mode == "cycle":
        return CyclicNetwork(d["matrices"], d.get("period", 1))
    if mode == "small_world":
        return SmallWorldNetwork(d["N"], d["seed"], d.get("m", 2), d.get("p", 0.2),
                                 d.get("a_min", 0.1), d.get("doubly_stochastic", False))
    raise ValidationError(f"unknown network mode {mode!r}")


def game_from_dict(d, validate=True):
    """Inverse of ``game_to_dict``; validates ``A(0)`` unless told not to."""
    N, n, M = int(d["N"]), int(d["n"]), int(d["M"])
    boxes = [BoxSet(_bound_array(b["lo"], -1), _bound_array(b["hi"], 1)) for b in d["boxes"]]
    costs = []
    for f in d["costs"]:
        if f["family"] == "zero":
            costs.append(LocalCost.zero())
        elif f["family"] == "quadratic":
            costs.append(LocalCost.quadratic(f["target"], f["weight"]))
        else:
            raise ValidationError(f"unknown cost family {f['family']!r}")
    game = GameSpec(N, n, M, boxes, costs,
                    _constraints_from_dict(d["constraints"], M, N * n),
                    _network_from_dict(d["network"]),
                    d.get("alpha_rule", "pf"))
    if validate:
        # cyclic networks are checked over a whole cycle
        horizon = 1
        if isinstance(game.network, CyclicNetwork):
            horizon = len(game.network.matrices) * game.network.period
        game.validate(horizon=horizon)
    return game


def dump_game(game, path, x0=None):
    d = game_to_dict(game)
    if x0 is not None:
        d["x0"] = [float(v) for v in x0]
    with open(path, "w") as fh:
        json.dump(d, fh, indent=1)
        fh.write("\n")


def load_game(path):
    """Load a scenario JSON file; returns ``(game, x0 or None)``."""
    with open(path) as fh:
        d = json.load(fh)
    game = game_from_dict(d)
    x0 = d.get("x0")
    return game, (None if x0 is None else np.array(x0, dtype=float))
