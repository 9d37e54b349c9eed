"""Step parameters, their bound inequalities and the preconditioning matrix.

The iteration is a preconditioned proximal-point step with the
non-symmetric matrix

    Phi = [[ D^{-1} + A,   -Lambda C^T ],
           [ C,             beta I     ]]

(all agent quantities lifted with ``kron(., I_n)``).  The bound
inequalities below are sufficient conditions for ``U = sym(Phi)`` to be
positive definite and for ``gamma ||Qbar U|| < 1``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import IterationLimitError, ParameterInfeasibleError, ShapeError
from .graph import decompose_lifted

SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class SolverParams:
    """Per-step parameters.

    Attributes
    ----------
    delta : (N,) ndarray
        Proximal weights ``delta_i > 0``.
    beta : float
        Dual proximal weight.
    gamma : float
        Step size of the correction step.
    alpha : (N,) ndarray
        Dual burden split, positive, summing to one.
    q : (N,) ndarray
        Left Perron-Frobenius vector of ``A(k)`` (metric weights).
    """

    delta: np.ndarray
    beta: float
    gamma: float
    alpha: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for name in ("delta", "alpha", "q"):
            a = np.array(np.atleast_1d(getattr(self, name)), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not (self.delta.shape == self.alpha.shape == self.q.shape):
            raise ShapeError("delta, alpha and q must all have length N")
        if np.any(self.delta <= 0) or self.beta <= 0 or self.gamma <= 0:
            raise ValueError("delta, beta and gamma must be positive")

    @property
    def N(self):
        return self.delta.size

    @property
    def inv_delta(self):
        return 1.0 / self.delta

    def Lambda(self, n):
        return np.kron(np.diag(self.alpha), np.eye(n))

    def Q(self, n):
        return np.kron(np.diag(self.q), np.eye(n))

    def Qbar_diag(self, n, M):
        return np.concatenate([np.repeat(self.q, n), np.ones(M)])

    def with_gamma(self, gamma):
        return SolverParams(self.delta, self.beta, gamma, self.alpha, self.q)

    def to_dict(self):
        return {"delta": self.delta.tolist(), "beta": self.beta, "gamma": self.gamma,
                "alpha": self.alpha.tolist(), "q": self.q.tolist()}


# ---------------------------------------------------------------------------
# norms

@lru_cache(maxsize=64)
def _start_vector_cached(dim):
    v = np.random.default_rng(12345).standard_normal(dim)
    v.setflags(write=False)
    return v


def _start_vector(dim):
    # fixed pseudo-random start: structured vectors such as ones() can be
    # orthogonal to the dominant subspace
    return _start_vector_cached(dim).copy()


def spectral_norm(Mx, tol=1e-13, max_iter=200000):
    """Largest singular value by power iteration on the smaller Gram matrix.

    Parameters
    ----------
    Mx : array_like
        Finite matrix (any shape, possibly empty).
    tol : float
        Relative change of the eigenvalue estimate at which to stop.

    Returns
    -------
    float
    """
    Mx = np.asarray(Mx, dtype=float)
    if Mx.size == 0 or not np.any(Mx):
        return 0.0
    G = Mx.T @ Mx if Mx.shape[0] >= Mx.shape[1] else Mx @ Mx.T
    return float(np.sqrt(max(_top_eig_psd(G, tol, max_iter), 0.0)))


def _top_eig_psd(G, tol, max_iter, squarings=8):
    # Power iteration driven by G^(2^s) (same eigenvectors, gaps raised to
    # the power 2^s); the estimate is the Rayleigh quotient of G itself.
    H = G
    if G.shape[0] <= 600:
        for _ in range(squarings):
            H = H @ H
            H /= np.max(np.abs(H))
    v = _start_vector(G.shape[0])
    v /= np.sqrt(v @ v)
    theta = 0.0
    for _ in range(max_iter):
        w = H @ v
        nw = np.sqrt(w @ w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        theta_new = float(v @ (G @ v))
        if abs(theta_new - theta) <= tol * abs(theta_new):
            return theta_new
        theta = theta_new
    raise IterationLimitError(f"power iteration did not converge in {max_iter} steps",
                              residual=abs(theta_new - theta))


def min_eigenvalue_sym(U, shift=None, tol=1e-13, max_iter=200000):
    """Smallest eigenvalue of symmetric ``U`` by power iteration on ``shift I - U``.

    ``shift`` must dominate the spectrum; ``||U||`` always does.  The
    absolute error is of order ``tol * shift``.
    """
    U = np.asarray(U, dtype=float)
    if U.shape[0] == 0:
        return 0.0
    if shift is None:
        shift = spectral_norm(U)
    B = shift * np.eye(U.shape[0]) - U
    if not np.any(B):
        return float(shift)
    return float(shift - _top_eig_psd(B, tol, max_iter))


# ---------------------------------------------------------------------------
# bound inequalities

@dataclass(frozen=True)
class BoundRow:
    name: str
    lhs: float
    rhs: float
    relation: str
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    """Outcome of the four bound inequalities at one time index.

    ``rows`` holds, in order, ``prox_weight`` (diagonal dominance of the
    primal block), ``step_size`` (the metric bound on ``gamma``),
    ``beta_lower`` and ``beta_upper``.  ``r_on_right`` records the
    step-size inequality with ``R`` added to ``1/gamma`` instead of to the
    left side, and ``R_alt`` the value of ``R`` under the
    ``Q (A_ut + A_lt)`` reading; both are informational and do not affect
    ``ok``.
    """

    rows: tuple
    R: float
    R_alt: float
    r_on_right: bool

    @property
    def ok(self):
        return all(r.passed for r in self.rows)

    def __getitem__(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def format(self):
        lines = []
        for r in self.rows:
            status = "pass" if r.passed else "FAIL"
            lines.append(f"{r.name:<12}{r.lhs:>24.15g}  {r.relation:>2}  {r.rhs:<24.15g}{status}")
        lines.append(f"# R = {self.R:.15g}; R (alternative reading) = {self.R_alt:.15g}; "
                     f"step_size with R on the right: {'pass' if self.r_on_right else 'FAIL'}")
        return "\n".join(lines)


def _bound_terms(game, k, params):
    """Norms shared by the bound checks and the parameter suggestion."""
    n = game.n
    A = game.adjacency(k)
    C, _ = game.coupling(k)
    A_ut, A_d, A_lt = decompose_lifted(A, n)
    Ab = A_ut + A_d + A_lt
    lam = np.repeat(params.alpha, n)
    qv = np.repeat(params.q, n)
    # C^T - Lambda C^T; its transpose is C - C Lambda, same spectral norm
    CtL = C.T * (1.0 - lam)[:, None]
    nCL = spectral_norm(CtL)
    a_off = spectral_norm(Ab - A_d)
    QA_ut = qv[:, None] * A_ut
    AQ_lt = np.tril(Ab * qv[None, :], -1)
    R = 2.0 * spectral_norm(QA_ut + AQ_lt) + spectral_norm(qv[:, None] * CtL)
    R_alt = 2.0 * spectral_norm(qv[:, None] * (A_ut + A_lt)) + spectral_norm(qv[:, None] * CtL)
    return {"diag": np.diag(A), "a_off": a_off, "nCL": nCL, "R": R, "R_alt": R_alt}


def check_bounds(game, k, params, terms=None):
    """Evaluate the four parameter inequalities at time ``k``.

    prox_weight  ``min_i(1/delta_i + a_ii) >= ||A - A_d|| + ||C^T - Lambda C^T||``
    step_size    ``max_i 2 q_i (1/delta_i + a_ii) + R < 1/gamma`` with
                 ``R = 2||Q A_ut + (A Q)_lt|| + ||Q (C^T - Lambda C^T)||``
    beta_lower   ``beta >= ||C - C Lambda|| / 2``
    beta_upper   ``beta < (1/gamma - ||C - C Lambda||) / 2``

    Non-strict sides carry a ``1e-12`` slack.  All norms are spectral.
    """
    t = _bound_terms(game, k, params) if terms is None else terms
    s = params.inv_delta + t["diag"]
    ginv = 1.0 / params.gamma
    lhs_b = float(np.max(2.0 * params.q * s))
    rows = (
        BoundRow("prox_weight", float(np.min(s)), t["a_off"] + t["nCL"], ">=",
                 bool(np.min(s) >= t["a_off"] + t["nCL"] - SLACK)),
        BoundRow("step_size", lhs_b + t["R"], ginv, "<", bool(lhs_b + t["R"] < ginv)),
        BoundRow("beta_lower", params.beta, 0.5 * t["nCL"], ">=",
                 bool(params.beta >= 0.5 * t["nCL"] - SLACK)),
        BoundRow("beta_upper", params.beta, 0.5 * (ginv - t["nCL"]), "<",
                 bool(params.beta < 0.5 * (ginv - t["nCL"]))),
    )
    return BoundReport(rows, t["R"], t["R_alt"], bool(lhs_b < t["R"] + ginv))


def suggest_params(game, k, q=None, margin=0.1, gamma=None):
    """Parameters that satisfy the four bounds at ``k``.

    Uses a common ``delta`` for all agents with
    ``1/delta = (1 + margin) max(rhs_pw - min_i a_ii, min_i a_ii)``
    (``rhs_pw`` is the right side of ``prox_weight``; the floor keeps the
    proximal weight from vanishing on weakly coupled games, where it would
    slow the iteration down), the largest step
    ``gamma`` allowed by ``step_size`` and ``beta_upper`` shrunk by
    ``(1 - margin)``, and ``beta`` at the midpoint of the interval left
    for it.

    Parameters
    ----------
    game : GameSpec
    k : int
        Time index.
    q : (N,) array_like, optional
        PF vector of ``A(k)``; computed if omitted.
    margin : float in (0, 1)
    gamma : float, optional
        Impose this step size instead of the suggested one.  It must lie
        strictly inside the allowed range.

    Returns
    -------
    SolverParams

    Raises
    ------
    ParameterInfeasibleError
        If the imposed ``gamma`` violates the step-size bound or leaves
        no admissible ``beta``.
    """
    return _suggest(game, k, q, margin, gamma)[0]


def _suggest(game, k, q, margin, gamma, terms=None):
    # returns (params, norms) so callers can reuse the norms in check_bounds
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    q = game.pf_vector(k) if q is None else np.asarray(q, dtype=float)
    alpha = game.alpha(k)
    if terms is None:
        terms = _bound_terms(game, k, SolverParams(np.ones(game.N), 1.0, 1.0, alpha, q))
    t = terms
    a_min = float(np.min(t["diag"]))
    rhs_a = t["a_off"] + t["nCL"]
    inv_delta = (1.0 + margin) * max(rhs_a - a_min, a_min)
    lhs_b = float(np.max(2.0 * q * (inv_delta + t["diag"]))) + t["R"]
    cap_b = 1.0 / lhs_b
    cap_d = 0.5 / t["nCL"] if t["nCL"] > 0 else np.inf
    if gamma is None:
        gamma = (1.0 - margin) * min(cap_b, cap_d)
    elif not gamma < cap_b:
        raise ParameterInfeasibleError(
            f"gamma = {gamma:g} violates the step-size bound (needs < {cap_b:g})",
            inequality="step_size")
    lo = 0.5 * t["nCL"]
    hi = 0.5 * (1.0 / gamma - t["nCL"])
    if not hi > lo:
        raise ParameterInfeasibleError(
            f"beta interval [{lo:g}, {hi:g}) is empty for gamma = {gamma:g}",
            inequality="beta_upper")
    beta = 0.5 * (lo + hi)
    return SolverParams(np.full(game.N, 1.0 / inv_delta), beta, gamma, alpha, q), t


# ---------------------------------------------------------------------------
# preconditioner

@dataclass(frozen=True, eq=False)
class Preconditioner:
    """``Phi``, its symmetric/skew split and the diagnostics used in the analysis.

    ``m_k`` is the smallest eigenvalue of ``U``, ``M_k = ||U||``,
    ``L_k = ||S||``, ``rho = L_k / m_k``, ``q_m`` the smallest diagonal
    entry of ``Qbar``, ``K = Qbar U``.
    """

    Phi: np.ndarray
    U: np.ndarray
    S: np.ndarray
    K: np.ndarray
    Qbar: np.ndarray
    m_k: float
    M_k: float
    L_k: float
    rho: float
    q_m: float
    norm_K: float

    @property
    def skew_dominates(self):
        """True when ``L_k > m_k`` (fixed points of the step are then not guaranteed)."""
        return self.L_k > self.m_k


def assemble_phi(game, k, params):
    n, M = game.n, game.M
    A = np.kron(game.adjacency(k), np.eye(n))
    C, _ = game.coupling(k)
    lam = np.repeat(params.alpha, n)
    top = np.hstack([np.diag(np.repeat(params.inv_delta, n)) + A, -(lam[:, None] * C.T)])
    bottom = np.hstack([C, params.beta * np.eye(M)])
    return np.vstack([top, bottom])


def build_preconditioner(game, k, params, diagnostics=True):
    """Assemble ``Phi(k)`` and derived quantities.

    With ``diagnostics=False`` the eigenvalue and norm estimates are left
    as NaN (useful when only the matrices are needed).
    """
    if params.N != game.N:
        raise ShapeError("parameter vectors do not match N")
    Phi = assemble_phi(game, k, params)
    U = 0.5 * (Phi + Phi.T)
    S = 0.5 * (Phi - Phi.T)
    qbar = params.Qbar_diag(game.n, game.M)
    K = qbar[:, None] * U
    nan = float("nan")
    m_k = M_k = L_k = rho = norm_K = nan
    if diagnostics:
        M_k = spectral_norm(U)
        m_k = min_eigenvalue_sym(U, shift=M_k)
        L_k = spectral_norm(S)
        rho = L_k / m_k if m_k > 0 else float("inf")
        norm_K = spectral_norm(K)
    return Preconditioner(Phi, U, S, K, np.diag(qbar), m_k, M_k, L_k, rho,
                          float(qbar.min()), norm_K)


class PhiOperator:
    """Matrix-free products with ``Phi``, ``Phi^T``, ``U`` and ``K`` at one ``k``."""

    def __init__(self, game, k, params):
        self.n, self.M, self.Nn = game.n, game.M, game.dim
        self.A = np.asarray(game.adjacency(k))
        self.C, _ = game.coupling(k)
        self.inv_d = np.repeat(params.inv_delta, game.n)
        self.lam = np.repeat(params.alpha, game.n)
        self.beta = params.beta
        self.qbar = params.Qbar_diag(game.n, game.M)

    def _split(self, v):
        return v[:self.Nn], v[self.Nn:]

    def _lift(self, A, x):
        return (A @ x.reshape(-1, self.n)).ravel()

    def phi(self, v):
        x, s = self._split(v)
        top = self.inv_d * x + self._lift(self.A, x) - self.lam * (self.C.T @ s)
        return np.concatenate([top, self.C @ x + self.beta * s])

    def phi_t(self, v):
        x, s = self._split(v)
        top = self.inv_d * x + self._lift(self.A.T, x) + self.C.T @ s
        return np.concatenate([top, -(self.C @ (self.lam * x)) + self.beta * s])

    def u(self, v):
        return 0.5 * (self.phi(v) + self.phi_t(v))

    def k(self, v):
        return self.qbar * self.u(v)

    def k_t(self, v):
        return self.u(self.qbar * v)


_RANGE_CACHE = {}


def _range_basis(C):
    # orthonormal basis of range(C), cached per (immutable) coupling matrix
    key = id(C)
    hit = _RANGE_CACHE.get(key)
    if hit is not None and hit[0] is C:
        return hit[1]
    Qc, _ = np.linalg.qr(C, mode="reduced") if C.shape[0] > C.shape[1] else (np.eye(C.shape[0]), None)
    if not C.flags.writeable:
        if len(_RANGE_CACHE) > 32:
            _RANGE_CACHE.clear()
        _RANGE_CACHE[key] = (C, Qc)
    return Qc


def norm_K(game, k, params):
    """``||Qbar U||`` at time ``k`` without forming the full matrix.

    Dual directions orthogonal to ``range(C)`` are eigenvectors of ``U``
    with eigenvalue ``beta`` and are left alone by ``Qbar``, so the norm is
    the larger of ``beta`` and the norm of ``Qbar U`` compressed to the
    primal block plus ``range(C)``.
    """
    n, M = game.n, game.M
    A = game.adjacency(k)
    C, _ = game.coupling(k)
    P = np.diag(np.repeat(params.inv_delta, n)) + np.kron(0.5 * (A + A.T), np.eye(n))
    if M == 0:
        return spectral_norm(np.repeat(params.q, n)[:, None] * P)
    Qc = _range_basis(C)
    r = Qc.shape[1]
    B = 0.5 * (1.0 - np.repeat(params.alpha, n))[:, None] * (C.T @ Qc)
    Ur = np.block([[P, B], [B.T, params.beta * np.eye(r)]])
    qbar = np.concatenate([np.repeat(params.q, n), np.ones(r)])
    nk = spectral_norm(qbar[:, None] * Ur)
    return max(nk, params.beta) if M > r else nk
