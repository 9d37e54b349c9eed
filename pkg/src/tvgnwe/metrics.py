"""Convergence diagnostics and equilibrium certification."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeError
from .game import collective_feasible_check
from .prox import group_prox, project_nonneg

CSV_COLUMNS = ("k", "fp_residual", "consensus_residual", "max_violation",
               "sigma_norm", "gamma", "bounds_ok")


@dataclass(frozen=True)
class TraceRow:
    k: int
    fp_residual: float
    consensus_residual: float
    max_violation: float
    sigma_norm: float
    gamma: float
    bounds_ok: bool


@dataclass
class RunTrace:
    """Per-iteration record of a run.

    ``rows[k]`` describes the iterate at time ``k``.  ``final`` is the last
    state; ``iterates`` and ``w_residual`` are only filled when the run was
    asked to keep them.
    """

    rows: list = field(default_factory=list)
    final: object = None
    iterates: list = None
    w_residual: list = None
    params: list = None

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def iters_used(self):
        return self.rows[-1].k if self.rows else 0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([str(r.k), *(format(v, ".17g") for v in
                                    (r.fp_residual, r.consensus_residual, r.max_violation,
                                     r.sigma_norm, r.gamma)),
                        "1" if r.bounds_ok else "0"])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def read_trace_csv(path):
    """Parse a trace CSV back into a RunTrace (rows only)."""
    rows = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected trace columns {rd.fieldnames}")
        for d in rd:
            rows.append(TraceRow(int(d["k"]), float(d["fp_residual"]),
                                 float(d["consensus_residual"]), float(d["max_violation"]),
                                 float(d["sigma_norm"]), float(d["gamma"]),
                                 d["bounds_ok"] == "1"))
    return RunTrace(rows)


# ---------------------------------------------------------------------------

def laplacian_from_edges(N, edges):
    L = np.zeros((N, N))
    for i, j in edges:
        if i == j:
            continue
        L[i, j] = L[j, i] = -1.0
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def complete_laplacian(N):
    return N * np.eye(N) - np.ones((N, N))


def multiplier_laplacian(game, k=0):
    """Laplacian of the graph linking agents that share a coupling row.

    Without coupling rows the complete graph is used, so the consensus
    residual still measures disagreement.
    """
    if game.M == 0:
        return complete_laplacian(game.N)
    C, _ = game.coupling(k)
    involved = np.abs(C).reshape(game.M, game.N, game.n).sum(axis=2) > 0
    edges = set()
    for row in involved:
        idx = np.flatnonzero(row)
        for a in range(idx.size):
            for b in range(a + 1, idx.size):
                edges.add((int(idx[a]), int(idx[b])))
    return laplacian_from_edges(game.N, edges)


def consensus_residual(x, L, n=None):
    """``||(L kron I_n) x||``."""
    L = np.asarray(L, dtype=float)
    x = np.asarray(x, dtype=float)
    N = L.shape[0]
    if n is None:
        n = x.size // N
    if x.size != N * n or L.shape != (N, N):
        raise ShapeError("x length must be N*n for an N x N Laplacian")
    return float(np.linalg.norm((L @ x.reshape(N, n)).ravel()))


def constraint_violation(x, k, game):
    """Largest positive part of ``C(k) x - c(k)``; zero iff feasible."""
    return collective_feasible_check(game, x, k).max_violation


@dataclass(frozen=True)
class Certificate:
    certified: bool
    window: tuple
    primal_residual: dict
    dual_residual: dict

    @property
    def worst(self):
        vals = list(self.primal_residual.values()) + list(self.dual_residual.values())
        return max(vals) if vals else 0.0


def certify_pn_enwe(x, sigma, game, k_window, tol=1e-6):
    """Check the persistent normalised equilibrium conditions on a window.

    For every ``k`` in ``k_window`` the pair must be a fixed point of

        x     = prox_f(A(k) x - Lambda(k) C(k)^T sigma)
        sigma = proj_{>=0}(sigma + C(k) x - c(k))

    within ``tol`` (infinity norm).  A finite window is evidence, not a
    proof, of persistence.
    """
    ks = tuple(sorted(set(int(k) for k in k_window)))
    if not ks:
        raise ValueError("certification window is empty")
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    X = game.blocks(x)
    prim, dual = {}, {}
    for k in ks:
        A = game.adjacency(k)
        C, c = game.coupling(k)
        alpha = game.alpha(k)
        v = (A @ X).ravel() - np.repeat(alpha, game.n) * (C.T @ sigma)
        prim[k] = float(np.max(np.abs(group_prox(v, 1.0, game) - x)))
        if game.M:
            dual[k] = float(np.max(np.abs(project_nonneg(sigma + C @ x - c) - sigma)))
        else:
            dual[k] = 0.0
    ok = all(v <= tol for v in prim.values()) and all(v <= tol for v in dual.values())
    return Certificate(ok, ks, prim, dual)
