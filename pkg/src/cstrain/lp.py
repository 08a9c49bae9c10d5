"""Primal-dual interior-point method for standard-form linear programs.

Solves ``min c'x  s.t.  Ax = b,  0 <= x (<= upper)`` with Mehrotra's
predictor-corrector scheme and an infeasible start. When ``upper`` is given
every variable carries the same finite box, which is the form taken by the
dual of a least-absolute-deviations problem. Each iteration solves the
normal equations ``A Theta A'`` by Cholesky, so the cost is driven by the
number of equality rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

_STEP_FRACTION = 0.995


@dataclass
class LPResult:
    x: np.ndarray
    y: np.ndarray  # multipliers of Ax = b
    z: np.ndarray  # multipliers of x >= 0
    w: np.ndarray | None  # multipliers of x <= upper
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    gap: float


def _solve_normal(A: np.ndarray, theta: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    K = (A * theta) @ A.T
    K = 0.5 * (K + K.T)
    reg = 0.0
    scale = max(float(np.max(np.diag(K))), 1e-300)
    for _ in range(8):
        try:
            factor = sla.cho_factor(K + reg * np.eye(K.shape[0]), lower=True, check_finite=False)
            return sla.cho_solve(factor, rhs, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            reg = scale * 1e-14 if reg == 0.0 else reg * 100.0
    return np.linalg.lstsq(K, rhs, rcond=None)[0]


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _starting_point(A, b, c):
    # Mehrotra's heuristic for the unbounded case
    AAt = A @ A.T
    try:
        factor = sla.cho_factor(AAt, lower=True)
        x = A.T @ sla.cho_solve(factor, b)
        y = sla.cho_solve(factor, A @ c)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        x = np.linalg.lstsq(A, b, rcond=None)[0]
        y = np.linalg.lstsq(A.T, c, rcond=None)[0]
    z = c - A.T @ y
    x = x + max(-1.5 * float(x.min()), 0.0)
    z = z + max(-1.5 * float(z.min()), 0.0)
    xz = float(x @ z)
    x = x + 0.5 * xz / max(float(z.sum()), 1e-300)
    z = z + 0.5 * xz / max(float(x.sum()), 1e-300)
    x = np.maximum(x, 1e-4)
    z = np.maximum(z, 1e-4)
    return x, y, z


def solve_lp(A, b, c, upper: float | None = None, tol: float = 1e-10,
             max_iter: int = 200) -> LPResult:
    """Mehrotra predictor-corrector on ``min c'x, Ax = b, 0 <= x [<= upper]``.

    ``A`` must have full row rank. Convergence requires relative primal and
    dual residuals and the relative duality gap all below ``tol``.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, N = A.shape
    bounded = upper is not None
    b_scale = 1.0 + float(np.linalg.norm(b))
    c_scale = 1.0 + float(np.linalg.norm(c))

    if bounded:
        u = float(upper)
        x = np.full(N, 0.5 * u)
        s = u - x
        y = np.zeros(m)
        z = np.maximum(c, 0.0) + 1.0
        w = np.maximum(-c, 0.0) + 1.0
    else:
        x, y, z = _starting_point(A, b, c)
        s = w = None

    n_pairs = 2 * N if bounded else N
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        r_p = b - A @ x
        r_d = c - A.T @ y - z + (w if bounded else 0.0)
        primal_obj = float(c @ x)
        dual_obj = float(b @ y) - (u * float(w.sum()) if bounded else 0.0)
        mu = (float(x @ z) + (float(s @ w) if bounded else 0.0)) / n_pairs
        rel_p = float(np.linalg.norm(r_p)) / b_scale
        rel_d = float(np.linalg.norm(r_d)) / c_scale
        gap = abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj))
        merit = max(rel_p, rel_d, gap)
        if best is None or merit < best[0]:
            best = (merit, x.copy(), y.copy(), z.copy(), None if w is None else w.copy(),
                    rel_p, rel_d, gap)
        if rel_p <= tol and rel_d <= tol and gap <= tol:
            return LPResult(x, y, z, w, it, True, rel_p, rel_d, gap)

        inv_theta = z / x + (w / s if bounded else 0.0)
        theta = 1.0 / inv_theta

        def direction(r_xz, r_sw):
            tmp = r_d - r_xz / x
            if bounded:
                tmp = tmp + r_sw / s
            dy = _solve_normal(A, theta, r_p + A @ (theta * tmp))
            dx = theta * (A.T @ dy - tmp)
            dz = (r_xz - z * dx) / x
            if bounded:
                dw = (r_sw + w * dx) / s
                return dx, dy, dz, -dx, dw
            return dx, dy, dz, None, None

        # predictor
        r_xz = -x * z
        r_sw = -s * w if bounded else None
        dx, dy, dz, ds, dw = direction(r_xz, r_sw)
        ap = _max_step(x, dx)
        ad = _max_step(z, dz)
        if bounded:
            ap = min(ap, _max_step(s, ds))
            ad = min(ad, _max_step(w, dw))
        mu_aff = float((x + ap * dx) @ (z + ad * dz))
        if bounded:
            mu_aff += float((s + ap * ds) @ (w + ad * dw))
        mu_aff /= n_pairs
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # corrector
        r_xz = sigma * mu - x * z - dx * dz
        if bounded:
            r_sw = sigma * mu - s * w - ds * dw
        dx, dy, dz, ds, dw = direction(r_xz, r_sw)
        ap = _max_step(x, dx)
        ad = _max_step(z, dz)
        if bounded:
            ap = min(ap, _max_step(s, ds))
            ad = min(ad, _max_step(w, dw))
        ap = min(1.0, _STEP_FRACTION * ap)
        ad = min(1.0, _STEP_FRACTION * ad)

        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz
        if bounded:
            s = s + ap * ds
            w = w + ad * dw
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            break

    _, x, y, z, w, rel_p, rel_d, gap = best
    return LPResult(x, y, z, w, it, False, rel_p, rel_d, gap)
