"""The TV-Prox-GNWE iteration and myopic best-response dynamics.

One step of the equilibrium-seeking iteration at time ``k`` reads, per
agent ``i`` (``lam_i = delta_i / (delta_i + 1)``):

    x~_i  = prox_{lam_i f_i}( lam_i (x_i / delta_i + sum_j a_ij x_j - alpha_i C_i^T sigma) )
    s~    = proj_{>=0}( sigma + (C x - c) / beta )
    x_i+  = x_i + gamma q_i [ (x~_i - x_i) / delta_i + sum_j a_ij (x~_j - x_j)
                              - alpha_i C_i^T (s~ - sigma) ]
    sigma+ = sigma + gamma [ beta (s~ - sigma) + C (x~ - x) ]

i.e. a resolvent step followed by ``w+ = w + gamma Qbar Phi (w~ - w)``.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from .exceptions import (BoundsViolationError, DivergenceError, ParameterInfeasibleError,
                         ShapeError, UnsupportedScenarioError, ValidationError)
from .game import local_feasible_set_value
from .metrics import (RunTrace, TraceRow, consensus_residual, constraint_violation,
                      multiplier_laplacian)
from .precondition import SolverParams, _suggest, check_bounds, norm_K
from .prox import cost_gradient, group_prox, normal_cone_residual, prox_local

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class IterateState:
    """Primal profile ``x`` (length ``N n``), coordinator variable ``sigma``
    (length ``M``) and time index ``k``.

    After a step, ``last_tilde`` holds the resolvent point ``(x~, s~)`` of
    time ``k - 1`` and ``origin`` the ``(x, sigma)`` it was computed from.
    """

    x: np.ndarray
    sigma: np.ndarray
    k: int = 0
    last_tilde: tuple = None
    origin: tuple = None

    @property
    def stacked(self):
        return np.concatenate([self.x, self.sigma])


@dataclass(frozen=True)
class StepReport:
    fixed_point_residual: float
    primal_residual: float
    dual_residual: float
    wall_time: float


def initial_state(game, x0=None, sigma0=None):
    x = np.zeros(game.dim) if x0 is None else np.array(x0, dtype=float)
    s = np.zeros(game.M) if sigma0 is None else np.array(sigma0, dtype=float)
    if x.shape != (game.dim,) or s.shape != (game.M,):
        raise ShapeError("initial point has the wrong dimensions")
    return IterateState(x, s, 0)


def resolvent(state, game, params, order=None):
    """The resolvent point ``(x~, s~)``; depends on the old ``(x, sigma)`` only."""
    k = state.k
    X = game.blocks(state.x)
    A = game.adjacency(k)
    C, c = game.coupling(k)
    inv_d = params.inv_delta
    lam = 1.0 / (1.0 + inv_d)
    CtS = (C.T @ state.sigma).reshape(game.N, game.n)
    V = lam[:, None] * (inv_d[:, None] * X + A @ X - params.alpha[:, None] * CtS)
    xt = group_prox(V.ravel(), lam, game, order=order)
    if game.M:
        st = np.maximum(state.sigma + (C @ state.x - c) / params.beta, 0.0)
    else:
        st = np.zeros(0)
    return xt, st


def _correct(state, game, params, xt, st):
    X = game.blocks(state.x)
    A = game.adjacency(state.k)
    C, _ = game.coupling(state.k)
    DX = xt.reshape(game.N, game.n) - X
    ds = st - state.sigma
    CtdS = (C.T @ ds).reshape(game.N, game.n)
    # overflow surfaces as inf/nan and is reported by the callers
    with np.errstate(over="ignore", invalid="ignore"):
        inner = params.inv_delta[:, None] * DX + A @ DX - params.alpha[:, None] * CtdS
        x_new = (X + params.gamma * params.q[:, None] * inner).ravel()
        s_new = state.sigma + params.gamma * (params.beta * ds + C @ DX.ravel())
    return x_new, s_new


def tv_prox_gnwe_step(state, game, params, precond=None, order=None, strict=False):
    """One TV-Prox-GNWE iteration at time ``state.k``.

    Parameters
    ----------
    state : IterateState
    game : GameSpec
    params : SolverParams
        Parameters for time ``state.k``.
    precond : Preconditioner, optional
        Not needed by the update itself; accepted so callers can pass the
        matrices they already built.
    order : sequence of int, optional
        Evaluation order of the agent proxes (results are order free).
    strict : bool
        Raise BoundsViolationError if the bound checks fail at ``k``.

    Returns
    -------
    (IterateState, StepReport)
    """
    t0 = time.perf_counter()
    if strict:
        rep = check_bounds(game, state.k, params)
        if not rep.ok:
            raise BoundsViolationError(f"parameter bounds fail at k={state.k}", state.k, rep)
    xt, st = resolvent(state, game, params, order=order)
    x_new, s_new = _correct(state, game, params, xt, st)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(s_new))):
        raise DivergenceError(f"non-finite iterate at k={state.k}", k=state.k)
    rp = float(np.linalg.norm(state.x - xt))
    rd = float(np.linalg.norm(state.sigma - st))
    rep = StepReport(float(np.hypot(rp, rd)), rp, rd, time.perf_counter() - t0)
    new = IterateState(x_new, s_new, state.k + 1, (xt, st), (state.x, state.sigma))
    return new, rep


@dataclass(frozen=True)
class InclusionResult:
    ok: bool
    primal_violation: float
    dual_violation: float

    def __bool__(self):
        return self.ok


def inclusion_check(state, game, params, tol=1e-8):
    """Verify that ``state.last_tilde`` solves the resolvent inclusion.

    With ``(x, sigma) = state.origin`` and ``k = state.k - 1``:

    * primal block: ``x/delta + A x - Lambda C^T sigma - (1/delta + 1) x~
      - grad f(x~)`` lies in the normal cone of the boxes at ``x~``;
    * dual block: ``s~ >= 0`` and ``C x - c - beta (s~ - sigma)`` lies in
      the normal cone of the orthant at ``s~``.

    Returns
    -------
    InclusionResult
        Truthy iff both blocks hold within ``tol``; carries the largest
        violation of each block.
    """
    if state.last_tilde is None or state.origin is None:
        raise ValueError("state carries no resolvent point")
    xt, st = state.last_tilde
    x, sigma = state.origin
    k = state.k - 1
    X = game.blocks(x)
    A = game.adjacency(k)
    C, c = game.coupling(k)
    inv_d = np.repeat(params.inv_delta, game.n)
    lam = np.repeat(params.alpha, game.n)
    g = inv_d * x + (A @ X).ravel() - lam * (C.T @ sigma) - (inv_d + 1.0) * xt
    g = g - cost_gradient(xt, game)
    pv = normal_cone_residual(xt, g, game.lower, game.upper)
    primal = float(np.max(pv)) if pv.size else 0.0
    dual = 0.0
    if game.M:
        u = C @ x - c - params.beta * (st - sigma)
        dv = normal_cone_residual(st, u, 0.0, np.inf)
        dual = max(float(np.max(dv)), float(np.max(-st)))
    return InclusionResult(primal <= tol and dual <= tol, primal, dual)


# ---------------------------------------------------------------------------
# best response

class ClosedFormBR:
    """Closed-form myopic best response.

    Supported games: no coupling rows (any ``n``), or scalar strategies
    (``n = 1``) with any number of rows, where each agent's feasible set
    is an interval.  Agents update simultaneously from the old profile.
    """

    def __init__(self, game, tol=1e-12):
        if game.M > 0 and game.n != 1:
            raise UnsupportedScenarioError(
                "closed-form best response needs n = 1 when coupling rows are present")
        self.game = game
        self.tol = tol
        self._wr = None
        self._rows = None
        self._lu = None
        self._adj = None

    def interval(self, i, x, k):
        g = self.game
        lo, hi = float(g.boxes[i].lo[0]), float(g.boxes[i].hi[0])
        others = np.delete(x, i)
        G, h = local_feasible_set_value(g, i, others, k)
        for gm, hm in zip(G[:, 0], h):
            if gm > 0:
                hi = min(hi, hm / gm)
            elif gm < 0:
                lo = max(lo, hm / gm)
            elif hm < -self.tol:
                raise ValidationError(f"agent {i} has an empty feasible set at k={k}")
        if lo > hi:
            if lo - hi > self.tol * (1.0 + abs(lo)):
                raise ValidationError(f"agent {i} has an empty feasible set at k={k}")
            lo = hi
        return lo, hi

    def _row_data(self, C):
        # reciprocals and padding depend on C only; static games reuse them
        if self._rows is None or self._rows[0] is not C:
            nz = C != 0
            safe = np.where(nz, C, 1.0)
            pad_hi = np.where(C > 0, 0.0, np.inf)
            pad_lo = np.where(C < 0, 0.0, -np.inf)
            # rows with C_mi = 0 only constrain feasibility
            self._rows = (C, safe, pad_hi, pad_lo, ~nz, 1.0 - np.eye(self.game.N))
        return self._rows[1:]

    def intervals(self, x, k):
        """All feasible intervals at once (scalar strategies with rows)."""
        g = self.game
        C, c = g.coupling(k)
        safe, pad_hi, pad_lo, zero, off = self._row_data(C)
        # h[m, i] = c_m - sum_{j != i} C_mj x_j, summed without agent i
        H = c[:, None] - (C * x) @ off
        R = H / safe
        lo = np.maximum(np.maximum.reduce(R + pad_lo, axis=0), g.lower)
        hi = np.minimum(np.minimum.reduce(R + pad_hi, axis=0), g.upper)
        gap = lo - hi
        if (gap > self.tol * (1.0 + np.abs(lo))).any() or \
                (zero & (H < -self.tol)).any():
            raise ValidationError(f"an agent has an empty feasible set at k={k}")
        return np.where(gap > 0, hi, lo), hi

    def __call__(self, x, k):
        g = self.game
        if type(x) is not np.ndarray or x.dtype != float:
            x = np.asarray(x, dtype=float)
        if g.M and g.N * g.N * g.M <= self.SMALL:
            return self._small(x, k)
        Z = (g.adjacency(k) @ g.blocks(x)).ravel()
        if not g.M:
            return group_prox(Z, 1.0, g)
        # scalar strategy: clamp the unconstrained minimiser to the interval
        w, r = self._weights()
        lo, hi = self.intervals(x, k)
        return np.minimum(np.maximum((Z + w * r) / (1.0 + w), lo), hi)

    # below this many multiply-adds per step plain floats beat numpy dispatch
    SMALL = 512

    def _plan(self, A, C):
        # per agent: neighbour terms, then (row, C_mi, terms C_mj x_j for j != i)
        if self._adj is None or self._adj[0] is not A or self._adj[1] is not C:
            Al, Cl = A.tolist(), C.tolist()
            N = len(Al)
            plan = []
            for i in range(N):
                nb = [(a, j) for j, a in enumerate(Al[i]) if a != 0]
                rows = [(m, row[i], [(row[j], j) for j in range(N) if j != i and row[j] != 0])
                        for m, row in enumerate(Cl)]
                plan.append((nb, rows))
            self._adj = (A, C, plan)
        return self._adj[2]

    def _small(self, x, k):
        # same arithmetic as the array path, on Python floats
        g = self.game
        C, c = g.coupling(k)
        plan = self._plan(g.adjacency(k), C)
        lower, upper, wl, rl = self._lu or self._scalars()
        xs, cl, tol = x.tolist(), c.tolist(), self.tol
        out = []
        for i, (nb, rows) in enumerate(plan):
            z = 0.0
            for a, j in nb:
                z += a * xs[j]
            lo, hi = lower[i], upper[i]
            for m, a, terms in rows:
                acc = 0.0
                for v, j in terms:
                    acc += v * xs[j]
                h = cl[m] - acc
                if a > 0:
                    hi = min(hi, h / a)
                elif a < 0:
                    lo = max(lo, h / a)
                elif h < -tol:
                    raise ValidationError(f"an agent has an empty feasible set at k={k}")
            if lo > hi:
                if lo - hi > tol * (1.0 + abs(lo)):
                    raise ValidationError(f"an agent has an empty feasible set at k={k}")
                lo = hi
            out.append(min(max((z + wl[i] * rl[i]) / (1.0 + wl[i]), lo), hi))
        return np.array(out)

    def _scalars(self):
        if self._lu is None:
            w, r = self._weights()
            self._lu = (self.game.lower.tolist(), self.game.upper.tolist(), w.tolist(),
                        r.tolist())
        return self._lu

    def _weights(self):
        if self._wr is None:
            g = self.game
            self._wr = (np.array([f.weight for f in g.costs], dtype=float),
                        np.array([f.target_vector(1)[0] for f in g.costs], dtype=float))
        return self._wr


def best_response_step(state, br):
    """Myopic best response of every agent to the old profile."""
    if not isinstance(br, ClosedFormBR):
        raise UnsupportedScenarioError("best response needs a ClosedFormBR scenario")
    x_new = br(state.x, state.k)
    return IterateState(x_new, state.sigma, state.k + 1)


# ---------------------------------------------------------------------------
# parameter sources

class AutoParams:
    """Suggested parameters per ``k`` with one step size for the whole run.

    The common ``gamma`` is the smallest suggestion over the first
    ``probe`` time indices.  If a later ``k`` cannot accept it, that step
    falls back to its own suggestion and a warning is logged.
    """

    def __init__(self, margin=0.1, probe=100, gamma=None):
        self.margin = margin
        self.probe = probe
        self.gamma = gamma
        self._terms = {}

    def prepare(self, game, horizon):
        self._terms = {}
        if self.gamma is None:
            gam = np.inf
            for k in range(max(1, min(self.probe, horizon))):
                p, self._terms[k] = _suggest(game, k, None, self.margin, None)
                gam = min(gam, p.gamma)
            self.gamma = gam
        return self

    def __call__(self, game, k):
        terms = self._terms.pop(k, None)
        try:
            return _suggest(game, k, None, self.margin, self.gamma, terms)
        except ParameterInfeasibleError as exc:
            log.warning("k=%d: run step size infeasible (%s); using per-step suggestion", k, exc)
            return _suggest(game, k, None, self.margin, None, terms)


class ExplicitParams:
    """Fixed parameters, or a callable ``k -> SolverParams``."""

    def __init__(self, params):
        self.params = params

    def prepare(self, game, horizon):
        return self

    def __call__(self, game, k):
        p = self.params(k) if callable(self.params) else self.params
        return p, None


def _as_source(params):
    if params is None or params == "auto":
        return AutoParams()
    if isinstance(params, (AutoParams, ExplicitParams)):
        return params
    if isinstance(params, SolverParams) or callable(params):
        return ExplicitParams(params)
    raise TypeError(f"cannot use {params!r} as a parameter source")


def run(game, params="auto", x0=None, sigma0=None, max_iters=1000, residual_tol=0.0,
        strict=False, laplacian=None, keep_iterates=False, track_w_residual=False,
        check_inclusion=None, window=10):
    """Iterate TV-Prox-GNWE and record one trace row per iterate.

    Parameters
    ----------
    game : GameSpec
    params : "auto", AutoParams, ExplicitParams, SolverParams or callable
        Parameter source; ``"auto"`` is ``AutoParams()``.
    x0, sigma0 : array_like, optional
        Initial point (zeros by default).
    max_iters : int
        Number of steps; the trace has at most ``max_iters + 1`` rows.
    residual_tol : float
        Stop once the fixed-point residual stays at or below this value
        for ``window`` consecutive iterates.
    strict : bool
        Raise on any bound failure instead of flagging it.
    laplacian : (N, N) array, optional
        For the consensus residual; defaults to the multiplier graph.
    keep_iterates : bool
        Store every ``(x, sigma)`` on the trace.
    track_w_residual : bool
        Store ``||w - W w||`` per step (needs a norm of ``Qbar U`` per k).
    check_inclusion : float, optional
        If given, assert the resolvent inclusion at this tolerance after
        every step (raises AssertionError otherwise).

    Returns
    -------
    RunTrace

    Raises
    ------
    DivergenceError
        On non-finite iterates; the partial trace is attached.
    """
    source = _as_source(params).prepare(game, max_iters + 1)
    L = multiplier_laplacian(game) if laplacian is None else laplacian
    state = initial_state(game, x0, sigma0)
    trace = RunTrace(iterates=[] if keep_iterates else None,
                     w_residual=[] if track_w_residual else None, params=[])
    below = 0
    for k in range(max_iters + 1):
        p, terms = source(game, k)
        rep = check_bounds(game, k, p, terms=terms)
        if strict and not rep.ok:
            raise BoundsViolationError(f"parameter bounds fail at k={k}", k, rep)
        xt, st = resolvent(state, game, p)
        fp = float(np.linalg.norm(np.concatenate([state.x - xt, state.sigma - st])))
        trace.rows.append(TraceRow(
            k, fp, consensus_residual(state.x, L, game.n),
            constraint_violation(state.x, k, game),
            float(np.linalg.norm(state.sigma)), p.gamma, rep.ok))
        trace.params.append(p)
        if keep_iterates:
            trace.iterates.append((state.x.copy(), state.sigma.copy()))
        below = below + 1 if fp <= residual_tol else 0
        if k == max_iters or below >= window:
            break
        x_new, s_new = _correct(state, game, p, xt, st)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(s_new))):
            trace.final = state
            raise DivergenceError(f"non-finite iterate at k={k}", k=k, trace=trace)
        if track_w_residual:
            nk = norm_K(game, k, p)
            step = np.concatenate([x_new - state.x, s_new - state.sigma])
            trace.w_residual.append(float(np.linalg.norm(step)) / (2.0 * p.gamma * nk))
        state = IterateState(x_new, s_new, k + 1, (xt, st), (state.x, state.sigma))
        if check_inclusion is not None:
            res = inclusion_check(state, game, p, tol=check_inclusion)
            if not res:
                raise AssertionError(f"resolvent inclusion fails at k={k}: {res}")
    trace.final = state
    return trace


def run_best_response(game, br, x0=None, max_iters=1000, residual_tol=0.0,
                      laplacian=None, keep_iterates=False, window=10):
    """Iterate the myopic best response; trace columns match ``run``.

    The fixed-point residual is ``||BR(x) - x||``; there is no dual
    variable, step size or bound check, so those columns hold 0, NaN and
    True respectively.
    """
    L = multiplier_laplacian(game) if laplacian is None else laplacian
    state = initial_state(game, x0)
    trace = RunTrace(iterates=[] if keep_iterates else None)
    below = 0
    for k in range(max_iters + 1):
        nxt = best_response_step(state, br)
        fp = float(np.linalg.norm(nxt.x - state.x))
        trace.rows.append(TraceRow(k, fp, consensus_residual(state.x, L, game.n),
                                   constraint_violation(state.x, k, game), 0.0,
                                   float("nan"), True))
        if keep_iterates:
            trace.iterates.append((state.x.copy(), state.sigma.copy()))
        below = below + 1 if fp <= residual_tol else 0
        if k == max_iters or below >= window:
            break
        if not np.all(np.isfinite(nxt.x)):
            trace.final = state
            raise DivergenceError(f"non-finite iterate at k={k}", k=k, trace=trace)
        state = nxt
    trace.final = state
    return trace
