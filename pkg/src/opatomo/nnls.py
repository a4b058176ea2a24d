"""Dense least-squares and non-negative least-squares solvers.

The unfolding step of the two-displacement estimator produces small, dense,
well-structured systems (a few hundred unknowns at most).  An exact
active-set method terminates in finitely many steps on such systems and
avoids the tolerance tuning an iterative projected-gradient scheme would
need, so that is what ``solve_nnls`` implements.

Matrices are plain ``numpy.ndarray`` objects in row-major layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SingularSystem",
    "NnlsResult",
    "solve_ls",
    "solve_nnls",
]

# Relative KKT tolerance: a coordinate counts as optimal when its gradient
# component is within this factor of the largest entry of M^T b.
KKT_RTOL = 1e-8

# Diagonal regularization factor for the normal equations, relative to the
# trace of M^T M.
LS_REG_RTOL = 1e-12


class SingularSystem(ValueError):
    """The (regularized) least-squares system is rank-deficient."""


@dataclass(frozen=True)
class NnlsResult:
    """Outcome of a non-negative least-squares solve.

    ``x`` is the coefficient vector (all entries >= 0), ``residual`` the
    Euclidean norm of ``M x - b``, ``converged`` whether the KKT conditions
    were met before the iteration cap, and ``n_iter`` the number of
    active-set changes performed.
    """

    x: np.ndarray
    residual: float
    converged: bool
    n_iter: int


def _validate_system(matrix, rhs) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(matrix, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {m.shape}")
    if b.ndim != 1:
        raise ValueError(f"right-hand side must be 1-D, got shape {b.shape}")
    if m.shape[0] != b.shape[0]:
        raise ValueError(
            f"incompatible shapes: matrix {m.shape} vs rhs {b.shape}"
        )
    if not np.all(np.isfinite(m)) or not np.all(np.isfinite(b)):
        raise ValueError("matrix and rhs entries must be finite")
    return m, b


def solve_ls(matrix, rhs) -> tuple[np.ndarray, float]:
    """Unconstrained least squares: minimize ||M x - b||.

    Solves the normal equations with a small diagonal regularization
    (``LS_REG_RTOL`` times the trace of ``M^T M``), which handles both
    over- and under-determined shapes.  Returns ``(x, residual_norm)``.

    Raises SingularSystem when the regularized system is still effectively
    rank-deficient (e.g. an all-zero matrix).
    """
    m, b = _validate_system(matrix, rhs)
    gram = m.T @ m
    trace = float(np.trace(gram))
    if trace <= 0.0:
        raise SingularSystem("matrix has zero norm; system is singular")
    reg = LS_REG_RTOL * trace
    gram[np.diag_indices_from(gram)] += reg
    try:
        x = np.linalg.solve(gram, m.T @ b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("solution is not finite")
    residual = float(np.linalg.norm(m @ x - b))
    return x, residual


def solve_nnls(matrix, rhs, max_iter: int | None = None) -> NnlsResult:
    """Non-negative least squares: minimize ||M x - b|| subject to x >= 0.

    Lawson-Hanson active-set iteration.  At the returned point the KKT
    conditions hold up to ``KKT_RTOL * max|M^T b|``: clamped coordinates
    have non-negative gradient components, free coordinates have (near)
    zero ones.  Ties for the entering index break toward the lowest index,
    which keeps the iteration deterministic across platforms.

    When the iteration cap (default ``10 * n_columns``) is reached the best
    iterate found so far is returned with ``converged=False``.
    """
    m, b = _validate_system(matrix, rhs)
    n_rows, n_cols = m.shape
    if max_iter is None:
        max_iter = 10 * n_cols

    x = np.zeros(n_cols)
    passive = np.zeros(n_cols, dtype=bool)
    tol = KKT_RTOL * float(np.max(np.abs(m.T @ b), initial=0.0))

    n_iter = 0
    converged = False
    while True:
        # Negative gradient of the objective at the current iterate.
        w = m.T @ (b - m @ x)
        candidates = ~passive & (w > tol)
        if not np.any(candidates):
            converged = True
            break
        if n_iter >= max_iter:
            break
        # argmax over candidates; numpy returns the first (lowest) index
        # among ties.
        scores = np.where(candidates, w, -np.inf)
        passive[int(np.argmax(scores))] = True

        while True:
            n_iter += 1
            cols = np.flatnonzero(passive)
            z = np.zeros(n_cols)
            z[cols] = np.linalg.lstsq(m[:, cols], b, rcond=None)[0]
            if np.all(z[cols] > 0.0):
                x = z
                break
            # Step toward z only as far as the first coordinate to hit zero,
            # then drop every coordinate that reached the boundary.
            blocking = cols[z[cols] <= 0.0]
            ratios = x[blocking] / (x[blocking] - z[blocking])
            alpha = float(np.min(ratios))
            x = x + alpha * (z - x)
            at_zero = passive & (x <= tol * max(1.0, float(np.max(np.abs(x)))))
            x[at_zero] = 0.0
            passive[at_zero] = False
            if n_iter >= max_iter:
                break
        if n_iter >= max_iter and not converged:
            # Re-check optimality once before giving up.
            w = m.T @ (b - m @ x)
            converged = not np.any(~passive & (w > tol))
            break

    x = np.where(x < 0.0, 0.0, x)
    residual = float(np.linalg.norm(m @ x - b))
    return NnlsResult(x=x, residual=residual, converged=converged, n_iter=n_iter)
