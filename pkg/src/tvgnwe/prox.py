"""Closed-form proximal and projection operators.

Only two local cost families are supported (zero and separable quadratic),
both coordinatewise, so the prox of ``f + indicator(box)`` is the clamp of
the unconstrained prox.
"""

import numpy as np

from .exceptions import ShapeError


def project_box(v, lo, hi):
    """Euclidean projection onto ``[lo, hi]`` (componentwise clamp)."""
    v = np.asarray(v, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != v.shape or hi.shape != v.shape:
        raise ShapeError("box bounds must match the point shape")
    return np.minimum(np.maximum(v, lo), hi)


def project_nonneg(v):
    """Projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def prox_local(v, scale, cost, box):
    r"""Prox of ``scale * (f + indicator(box))`` at ``v``.

    .. math:: \arg\min_y f(y) + \iota_{box}(y) + \frac{1}{2\lambda}\|y - v\|^2

    For ``f = 0`` this is the clamp of ``v``; for
    ``f = (w/2)||y - r||^2`` it is the clamp of
    ``(v + lambda w r) / (1 + lambda w)``.
    """
    if not scale > 0:
        raise ValueError(f"prox scale must be positive, got {scale}")
    v = np.asarray(v, dtype=float)
    if v.shape != box.lo.shape:
        raise ShapeError("point and box dimensions differ")
    if cost.weight == 0.0:
        return project_box(v, box.lo, box.hi)
    lw = scale * cost.weight
    return project_box((v + lw * cost.target) / (1.0 + lw), box.lo, box.hi)


def group_prox(x_stack, scales, game, order=None):
    """Apply ``prox_local`` blockwise with one scale per agent.

    ``order`` only changes the sequence in which agent blocks are
    evaluated; results are written back to their own block, so the output
    does not depend on it.
    """
    X = game.blocks(x_stack)
    scales = np.broadcast_to(np.asarray(scales, dtype=float), (game.N,))
    out = np.empty_like(X)
    for i in (range(game.N) if order is None else order):
        out[i] = prox_local(X[i], scales[i], game.costs[i], game.boxes[i])
    return out.ravel()


def cost_gradient(y, game):
    """Gradient of the smooth part ``sum_i f_i`` at the stacked profile ``y``."""
    Y = game.blocks(y)
    G = np.empty_like(Y)
    for i, f in enumerate(game.costs):
        G[i] = f.weight * (Y[i] - f.target_vector(game.n)) if f.weight else 0.0
    return G.ravel()


def normal_cone_residual(y, g, lo, hi):
    """Distance-like violation of ``g in N_box(y)``, coordinatewise.

    Interior coordinates need ``g = 0``; at the upper bound ``g >= 0``; at
    the lower bound ``g <= 0``; where ``lo == hi`` anything goes.
    """
    y, g = np.asarray(y, dtype=float), np.asarray(g, dtype=float)
    at_lo = y <= lo
    at_hi = y >= hi
    r = np.abs(g)
    r = np.where(at_hi & ~at_lo, np.maximum(-g, 0.0), r)
    r = np.where(at_lo & ~at_hi, np.maximum(g, 0.0), r)
    r = np.where(at_lo & at_hi, 0.0, r)
    return r
