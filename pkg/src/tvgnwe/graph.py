"""Time-varying digraphs: validation, generation and Perron-Frobenius weights."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import GenerationError, IterationLimitError, ShapeError


@dataclass(frozen=True)
class AdjacencyReport:
    nonnegative: bool
    row_sums: bool
    self_loops: bool
    strongly_connected: bool

    @property
    def ok(self):
        return self.nonnegative and self.row_sums and self.self_loops and self.strongly_connected

    @property
    def failures(self):
        names = ("nonnegative", "row_sums", "self_loops", "strongly_connected")
        return [name for name in names if not getattr(self, name)]


def is_strongly_connected(A):
    """True if the digraph of nonzero entries of ``A`` is strongly connected."""
    A = np.asarray(A)
    if A.shape[0] <= 1:
        return True
    ncomp, _ = connected_components(A != 0, directed=True, connection="strong")
    return ncomp == 1


def validate_adjacency(A, a_min=0.0, tol=1e-12):
    """Check the row-stochastic / self-loop / connectivity requirements.

    Parameters
    ----------
    A : (N, N) array_like
        Candidate adjacency; ``A[i, j]`` is the weight agent ``i`` gives ``j``.
    a_min : float
        Required floor on the diagonal.  With the default 0 the diagonal
        only has to be strictly positive.
    tol : float
        Tolerance on the row sums.

    Returns
    -------
    AdjacencyReport
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("adjacency must be square")
    nonneg = bool(np.all(A >= 0.0) and np.all(A <= 1.0))
    rows = bool(np.all(np.abs(A.sum(axis=1) - 1.0) <= tol))
    diag = np.diag(A)
    loops = bool(np.all(diag > 0.0) and np.all(diag >= a_min))
    return AdjacencyReport(nonneg, rows, loops, is_strongly_connected(A))


def left_pf_eigenvector(A, tol=1e-12, max_iter=200000):
    """Left Perron-Frobenius vector ``q`` of a row-stochastic matrix.

    Power iteration on ``A^T`` from the uniform vector, renormalised to
    ``sum(q) = 1`` after every sweep.  Stops once
    ``||q^T A - q^T||_inf <= tol``.

    Raises
    ------
    IterationLimitError
        If ``max_iter`` sweeps do not reach ``tol``.
    """
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    q = np.full(N, 1.0 / N)
    res = np.inf
    for _ in range(max_iter):
        qa = q @ A
        qa /= qa.sum()
        res = np.max(np.abs(qa @ A - qa))
        q = qa
        if res <= tol:
            return q
    raise IterationLimitError(
        f"PF power iteration did not reach {tol:g} in {max_iter} sweeps", residual=res)


def _ring_targets(N, m):
    return [[(i + d) % N for d in range(1, m + 1)] + [(i - d) % N for d in range(1, m + 1)]
            for i in range(N)]


def _weights(adj, a_min):
    N = adj.shape[0]
    A = np.zeros((N, N))
    for i in range(N):
        out = np.flatnonzero(adj[i])
        deg = out.size
        self_w = max(a_min, 1.0 / (deg + 1))
        A[i, i] = self_w
        A[i, out] = (1.0 - self_w) / deg
    return A / A.sum(axis=1, keepdims=True)


def generate_small_world(Nagents, m, p, a_min, seed, max_attempts=100):
    """Random strongly connected small-world digraph with self-loops.

    Starts from a ring lattice in which every node points to its ``m``
    nearest nodes on each side (out-degree ``2m``).  Each lattice edge is
    rewired with probability ``p`` to a uniformly chosen node that is
    neither the source nor an existing target.  Row ``i`` gets self weight
    ``max(a_min, 1/(deg+1))`` and splits the rest uniformly over its
    out-neighbours.  Draws that are not strongly connected are discarded
    and redrawn from the same stream.

    Parameters
    ----------
    Nagents : int
        Number of nodes, at least 3.
    m : int
        Lattice half-degree, ``1 <= m < Nagents / 2``.
    p : float
        Rewiring probability in ``[0, 1]``.
    a_min : float
        Self-loop floor in ``(0, 1)``.
    seed : int, sequence of int or numpy Generator
        Randomness source.

    Returns
    -------
    A : (Nagents, Nagents) ndarray
        Row-stochastic adjacency.
    """
    N = int(Nagents)
    if N < 3 or not (1 <= m < N / 2) or not (0.0 <= p <= 1.0) or not (0.0 < a_min < 1.0):
        raise ValueError("need N >= 3, 1 <= m < N/2, p in [0,1], a_min in (0,1)")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lattice = _ring_targets(N, m)
    for _ in range(max_attempts):
        adj = np.zeros((N, N), dtype=bool)
        for i in range(N):
            adj[i, lattice[i]] = True
        for i in range(N):
            for j in lattice[i]:
                if rng.random() < p:
                    free = np.flatnonzero(~adj[i])
                    free = free[free != i]
                    if free.size == 0:
                        continue
                    adj[i, j] = False
                    adj[i, rng.choice(free)] = True
        if is_strongly_connected(adj):
            return _weights(adj, a_min)
    raise GenerationError(f"no strongly connected draw in {max_attempts} attempts")


def sinkhorn(S, tol=1e-12, max_iter=100000):
    """Alternating row/column scaling of a nonnegative matrix to double stochasticity."""
    A = np.array(S, dtype=float)
    for _ in range(max_iter):
        A /= A.sum(axis=1, keepdims=True)
        A /= A.sum(axis=0, keepdims=True)
        if np.max(np.abs(A.sum(axis=1) - 1.0)) <= tol:
            return A
    raise IterationLimitError("Sinkhorn balancing did not converge",
                              residual=float(np.max(np.abs(A.sum(axis=1) - 1.0))))


def random_doubly_stochastic(Nagents, m, p, a_min, seed):
    """Doubly stochastic adjacency with diagonal at least ``a_min``.

    For ``N >= 3`` a small-world draw is symmetrised and Sinkhorn balanced;
    for ``N = 2`` the matrix is ``[[1-a, a], [a, 1-a]]`` with ``a`` uniform
    in ``[a_min, 1 - a_min]``.  If balancing pushes a diagonal entry below
    ``a_min``, the result is mixed with the identity just enough to restore
    the floor (mixing keeps double stochasticity).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    N = int(Nagents)
    if N == 1:
        return np.ones((1, 1))
    if N == 2:
        a = rng.uniform(a_min, 1.0 - a_min)
        return np.array([[1.0 - a, a], [a, 1.0 - a]])
    W = generate_small_world(N, m, p, a_min, rng)
    A = sinkhorn(0.5 * (W + W.T))
    # one final row pass so that row sums are exact to rounding
    A /= A.sum(axis=1, keepdims=True)
    dmin = np.diag(A).min()
    if dmin < a_min:
        t = (a_min - dmin) / (1.0 - dmin)
        A = (1.0 - t) * A + t * np.eye(N)
    return A


def lift(A, n):
    """``A kron I_n``."""
    return np.kron(np.asarray(A, dtype=float), np.eye(n))


def decompose_lifted(A, n):
    """Split ``A kron I_n`` into strictly upper, diagonal and strictly lower parts.

    Returns ``(A_ut, A_d, A_lt)``; the three parts sum to the lifted matrix
    exactly because they have disjoint supports.
    """
    L = lift(A, n)
    A_ut = np.triu(L, 1)
    A_lt = np.tril(L, -1)
    A_d = np.diag(np.diag(L))
    return A_ut, A_d, A_lt
