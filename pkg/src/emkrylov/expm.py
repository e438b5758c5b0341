"""Dense matrix exponential for the small reduced operators.

Scaling-and-squaring with diagonal Pade approximants of orders 3/5/7/9/13
and the standard 1-norm switching thresholds. Intended for the k x k mapped
Hessenberg matrices (k of order ten), but correct for any square matrix.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NumericalError, ParameterError

_PADE_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
         33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0),
}

_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1, 7: 9.504178996162932e-1,
          9: 2.097847961257068, 13: 5.371920351148152}


def _pade_uv(M: np.ndarray, order: int):
    b = _PADE_B[order]
    n = M.shape[0]
    eye = np.eye(n)
    M2 = M @ M
    if order == 13:
        M4 = M2 @ M2
        M6 = M4 @ M2
        u_high = M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
        u_low = b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * eye
        U = M @ (u_high + u_low)
        v_high = M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
        V = v_high + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * eye
        return U, V
    powers = {0: eye, 2: M2}
    for p in range(4, order, 2):
        powers[p] = powers[p - 2] @ M2
    U = M @ sum(b[k] * powers[k - 1] for k in range(1, order + 1, 2))
    V = sum(b[k] * powers[k] for k in range(0, order + 1, 2))
    return U, V


def expm_dense(M: np.ndarray) -> np.ndarray:
    """exp(M) by scaling and squaring with Pade approximation."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError("expm needs a square matrix")
    if not np.all(np.isfinite(M)):
        raise NumericalError("expm input has non-finite entries")
    if M.shape[0] == 0:
        return np.zeros((0, 0))

    norm = np.linalg.norm(M, 1)
    squarings = 0
    order = 13
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            order = m
            break
    scaled = M
    if order == 13 and norm > _THETA[13]:
        squarings = int(np.ceil(np.log2(norm / _THETA[13])))
        scaled = M / (2.0 ** squarings)

    U, V = _pade_uv(scaled, order)
    try:
        result = lu_solve(lu_factor(V - U), V + U)
    except Exception as exc:
        raise NumericalError(f"Pade denominator singular in expm: {exc}") from exc
    for _ in range(squarings):
        result = result @ result
    return result


def small_matrix_exp(M: np.ndarray, t: float) -> np.ndarray:
    """exp(t * M) for a small dense M and t >= 0."""
    if not (np.isscalar(t) and np.isfinite(t) and t >= 0):
        raise ParameterError("t must be a finite nonnegative scalar")
    M = np.asarray(M, dtype=float)
    if t == 0.0:
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ParameterError("expm needs a square matrix")
        return np.eye(M.shape[0])
    return expm_dense(t * M)
