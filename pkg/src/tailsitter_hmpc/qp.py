"""Primal active-set solver for dense box-constrained convex QPs.

Solves ``min 0.5 z'Hz + g'z  s.t.  lb <= z <= ub`` with ``H`` positive
definite. The working set is a vector of flags: ``-1`` (held at the lower
bound), ``+1`` (held at the upper bound) or ``0`` (free).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


class QpError(ValueError):
    pass


@dataclass
class QpResult:
    z: NDArray[np.float64]
    active: NDArray[np.int8]
    kkt: float
    iterations: int
    status: str  # "solved" | "max_iter"


def kkt_residual(H, g, lb, ub, z, active) -> float:
    """Infinity norm of the KKT violation for a given point and working set.

    Free variables contribute their gradient component, held variables the
    wrong-signed part of their multiplier, and every variable its bound
    violation.
    """
    grad = H @ z + g
    free = active == 0
    r = 0.0
    if np.any(free):
        r = float(np.max(np.abs(grad[free])))
    lo, hi = active < 0, active > 0
    if np.any(lo):
        r = max(r, float(np.max(np.maximum(-grad[lo], 0.0))))
    if np.any(hi):
        r = max(r, float(np.max(np.maximum(grad[hi], 0.0))))
    viol = np.maximum(lb - z, 0.0) + np.maximum(z - ub, 0.0)
    return max(r, float(np.max(viol)) if z.size else 0.0)


def _subspace_step(H, grad, free) -> NDArray[np.float64]:
    p = np.zeros_like(grad)
    if np.any(free):
        idx = np.flatnonzero(free)
        Hff = H[np.ix_(idx, idx)]
        L = np.linalg.cholesky(Hff)
        p[idx] = -np.linalg.solve(L.T, np.linalg.solve(L, grad[idx]))
    return p


def qp_solve(
    H: NDArray[np.float64],
    g: NDArray[np.float64],
    lb: NDArray[np.float64],
    ub: NDArray[np.float64],
    warm_active_set: NDArray[np.int8] | None = None,
    kkt_tol: float = 1e-8,
    max_iter: int | None = None,
) -> QpResult:
    """Box QP by primal active-set iterations.

    The start point holds the warm working set at its bounds, minimises over
    the remaining variables and clips to the box; variables that clip join
    the working set. Each iteration then either moves to the subspace
    minimiser (stopping at the first blocking bound, which is added) or,
    once stationary, releases the bound with the most negative multiplier.
    """
    H = np.asarray(H, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    lb = np.asarray(lb, dtype=np.float64)
    ub = np.asarray(ub, dtype=np.float64)
    n = g.size
    if H.shape != (n, n) or lb.shape != (n,) or ub.shape != (n,):
        raise QpError("inconsistent QP dimensions")
    if np.any(lb > ub):
        raise QpError("infeasible box: lb > ub")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise QpError("non-finite QP data")
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise QpError("QP Hessian is not positive definite") from exc
    max_iter = max_iter if max_iter is not None else 10 * n + 50
    fixed = lb == ub

    active = np.zeros(n, dtype=np.int8)
    if warm_active_set is not None:
        active[:] = np.clip(np.asarray(warm_active_set, dtype=np.int8).reshape(n), -1, 1)
    active[fixed] = -1
    z = np.where(active < 0, lb, np.where(active > 0, ub, 0.0))
    z = z + _subspace_step(H, H @ z + g, active == 0)
    below, above = z < lb, z > ub
    active[below] = -1
    active[above] = 1
    z = np.clip(z, lb, ub)

    status = "max_iter"
    it = 0
    at_min = False
    while it < max_iter:
        it += 1
        grad = H @ z + g
        free = active == 0
        if not at_min:
            p = _subspace_step(H, grad, free)
            scale = max(1.0, float(np.max(np.abs(z))) if n else 1.0)
            at_min = float(np.max(np.abs(p))) <= 1e-14 * scale if n else True
        if at_min:
            # stationary on the working set: check multiplier signs
            lam = np.where(active < 0, grad, np.where(active > 0, -grad, 0.0))
            lam[fixed] = np.inf
            j = int(np.argmin(lam)) if n else 0
            if not n or lam[j] >= -kkt_tol * 1e-3:
                status = "solved"
                break
            active[j] = 0
            at_min = False
            continue
        # ratio test against the bounds of free variables
        alpha = 1.0
        block = -1
        for i in np.flatnonzero(free & (p != 0.0)):
            lim = ((ub[i] - z[i]) if p[i] > 0 else (lb[i] - z[i])) / p[i]
            if lim < alpha:
                alpha, block = lim, int(i)
        z = z + max(alpha, 0.0) * p
        if block >= 0:
            active[block] = 1 if p[block] > 0 else -1
        else:
            at_min = True
        # held variables sit exactly on their bound
        z = np.where(active < 0, lb, np.where(active > 0, ub, z))
        z = np.clip(z, lb, ub)

    # one refinement sweep on the final working set
    free = active == 0
    if status == "solved" and np.any(free):
        p = _subspace_step(H, H @ z + g, free)
        z_ref = z + p
        if np.all(z_ref[free] >= lb[free]) and np.all(z_ref[free] <= ub[free]):
            z = z_ref
    return QpResult(z, active, kkt_residual(H, g, lb, ub, z, active), it, status)
