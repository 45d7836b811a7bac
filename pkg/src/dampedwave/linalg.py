"""Dense symmetric linear-algebra kernels used by every other module.

LAPACK (via scipy) does the heavy lifting; this module adds the error
taxonomy, relative tolerances, and the few conventions the rest of the
package relies on (orthonormal kernel bases, congruence-restricted
eigenproblems).  All routines are pure functions of their inputs.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, EmptySubspace, NotSPD, SizeLimitExceeded

# Hard cap for dense matrix-exponential work.  Beyond this the cubic cost and
# quadratic memory stop being desk scale.
DENSE_LIMIT = 2000

# Default relative singular-value cutoff for rank decisions.
KERNEL_TOL = 1e-10


def _as_2d(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {M.shape}")
    return M


def _as_square(M, name: str) -> np.ndarray:
    M = _as_2d(M, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    return M


def spd_factor(M, name: str = "matrix"):
    """Cholesky-factor an SPD matrix, mapping failure to NotSPD.

    Returns the opaque factor pair understood by scipy.linalg.cho_solve,
    for callers that reuse one factorization across many solves.
    """
    M = _as_square(M, name)
    try:
        return sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"{name} is not positive definite: {exc}") from exc


def spd_solve(M, rhs):
    """Solve M x = rhs for symmetric positive definite M.

    Parameters
    ----------
    M : (n, n) array_like
        Symmetric positive definite.
    rhs : (n,) or (n, k) array_like
        One right-hand side or a block of them.

    Returns
    -------
    ndarray
        Solution with relative residual ``||M x - rhs|| <= 1e-10 ||rhs||``.

    Raises
    ------
    NotSPD
        If the Cholesky factorization hits a nonpositive pivot.
    DimensionMismatch
    """
    M = _as_square(M, "M")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.ndim not in (1, 2) or rhs.shape[0] != M.shape[0]:
        raise DimensionMismatch(
            f"rhs shape {rhs.shape} incompatible with matrix of order {M.shape[0]}"
        )
    factor = spd_factor(M, "M")
    return sla.cho_solve(factor, rhs, check_finite=False)


def gen_eig_extremes(Num, Den, subspace_basis=None) -> tuple[float, float]:
    """Extreme eigenvalues of the pencil Num x = lambda Den x.

    Num must be symmetric positive semidefinite and Den symmetric positive
    definite.  When ``subspace_basis`` is given (full column rank), both
    forms are restricted by congruence to the span of its columns.

    Returns (lambda_min, lambda_max), each exact to LAPACK accuracy, far
    below the 1e-8 relative contract.
    """
    Num = _as_square(Num, "Num")
    Den = _as_square(Den, "Den")
    if Num.shape != Den.shape:
        raise DimensionMismatch(f"Num {Num.shape} vs Den {Den.shape}")
    if subspace_basis is not None:
        V = _as_2d(subspace_basis, "subspace_basis")
        if V.shape[0] != Num.shape[0]:
            raise DimensionMismatch(
                f"subspace rows {V.shape[0]} do not match matrix order {Num.shape[0]}"
            )
        if V.shape[1] == 0:
            raise EmptySubspace("subspace_basis has zero columns")
        Num = V.T @ Num @ V
        Den = V.T @ Den @ V
        # congruence products pick up roundoff asymmetry; eigh wants exact symmetry
        Num = 0.5 * (Num + Num.T)
        Den = 0.5 * (Den + Den.T)
    try:
        w = sla.eigh(Num, Den, eigvals_only=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"Den is not positive definite: {exc}") from exc
    return float(w[0]), float(w[-1])


def kernel_basis(D, tol: float = KERNEL_TOL) -> np.ndarray:
    """Orthonormal basis of the (near-)null space of D.

    Columns x satisfy ``||D x|| <= tol * sigma_max(D) * ||x||``.  Returns a
    matrix with zero columns when D is injective at that tolerance, and a
    full orthonormal basis when D is the zero map.  The cutoff at
    ``tol * sigma_max`` makes the rank decision scale-invariant.
    """
    D = _as_2d(D, "D")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    n = D.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    if D.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(D)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > tol * s[0]))
    return vt[rank:].T.copy()


def expm_apply(Gen, x0, t: float, size_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Apply the matrix exponential: returns e^(t Gen) x0.

    Dense scaling-and-squaring; accurate well beyond the 1e-10 relative
    contract at the sizes admitted by ``size_limit``.

    Raises
    ------
    SizeLimitExceeded
        If the generator order exceeds ``size_limit``.
    DimensionMismatch
    """
    Gen = _as_square(Gen, "Gen")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (Gen.shape[0],):
        raise DimensionMismatch(
            f"x0 shape {x0.shape} incompatible with generator order {Gen.shape[0]}"
        )
    if Gen.shape[0] > size_limit:
        raise SizeLimitExceeded(
            f"generator order {Gen.shape[0]} exceeds dense limit {size_limit}"
        )
    if t < 0:
        raise ValueError("t must be nonnegative")
    return sla.expm(t * Gen) @ x0
