"""Preconditioned conjugate gradients on plain numpy arrays."""

import numpy as np

from .errors import NonConvergence


def pcg(apply_a, b, apply_m=None, x0=None, rtol=1e-12, maxiter=500, project=None, what="PCG"):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    ``project`` is applied to every residual and search direction; pass a
    mean-removal to work on the orthogonal complement of a null space.
    Returns ``(x, iterations, relative_residual)``; raises ``NonConvergence``.
    """
    proj = project if project is not None else (lambda v: v)
    prec = apply_m if apply_m is not None else (lambda v: v)
    b = proj(b)
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b) if x0 is None else proj(x0.copy())
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    r = proj(b - apply_a(x)) if x0 is not None else b.copy()
    z = proj(prec(r))
    p = z.copy()
    rz = float(np.vdot(r, z))
    res = float(np.linalg.norm(r)) / bnorm
    for it in range(1, maxiter + 1):
        if res <= rtol:
            return x, it - 1, res
        ap = apply_a(p)
        pap = float(np.vdot(p, ap))
        if pap <= 0:
            raise NonConvergence(it, res, f"{what} (operator not positive definite)")
        alpha = rz / pap
        x += alpha * p
        r = proj(r - alpha * ap)
        res = float(np.linalg.norm(r)) / bnorm
        z = proj(prec(r))
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    if res <= rtol:
        return x, maxiter, res
    raise NonConvergence(maxiter, res, what)
