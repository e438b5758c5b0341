"""Sparse direct-solve helpers shared by the solver engines.

Two flavors are needed: a shifted solve (A - sigma*I) x = b, which is always
nonsingular for sigma > 0 because the assembled diffusion operators have
nonpositive real spectrum, and a deflated solve A x = b for the singular
nucleation-phase operator, valid only for right-hand sides in range(A).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConservationViolationError, NumericalError

#: Relative residual above which a deflated singular solve is rejected.
DEFLATED_RESIDUAL_TOL = 1e-8


class ShiftedSolver:
    """LU-backed solver for (A - sigma*I), factored once and reused."""

    def __init__(self, A: sp.spmatrix, sigma: float):
        n = A.shape[0]
        shifted = (A - sigma * sp.identity(n, format="csr")).tocsc()
        try:
            self._lu = spla.splu(shifted)
        except RuntimeError as exc:
            raise NumericalError(f"shifted matrix (A - {sigma:g} I) is singular: {exc}") from exc
        self.sigma = sigma
        self.n = n

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)


class DeflatedSolver:
    """Solve A x = b for a singular A with nullspace span{1} and known left
    nullvector w, returning the unique solution with w^T x = 0.

    Implemented by grounding one unknown: drop row/column ``ground`` (the
    reduced operator of a connected diffusion graph is nonsingular), solve,
    re-insert the grounded zero, then shift along the nullvector to enforce
    the zero weighted mean. Every solve is verified against the full matrix;
    right-hand sides outside range(A) are rejected.
    """

    def __init__(self, A: sp.spmatrix, left_nullvector: np.ndarray, ground: int = 0):
        n = A.shape[0]
        if not 0 <= ground < n:
            raise ValueError("ground index out of range")
        keep = np.ones(n, dtype=bool)
        keep[ground] = False
        self._A = A.tocsr()
        sub = A.tocsr()[keep][:, keep].tocsc()
        try:
            self._lu = spla.splu(sub)
        except RuntimeError as exc:
            raise NumericalError(f"grounded operator is singular: {exc}") from exc
        self._keep = keep
        self._ground = ground
        self._w = np.asarray(left_nullvector, dtype=float)
        self._w_total = float(self._w.sum())
        self.n = n

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = np.zeros(self.n)
        x[self._keep] = self._lu.solve(rhs[self._keep])
        # remove the nullspace component: w^T x = 0
        x -= (self._w @ x) / self._w_total
        return x

    def solve_checked(self, rhs: np.ndarray, tol: float = DEFLATED_RESIDUAL_TOL) -> np.ndarray:
        x = self.solve(rhs)
        scale = np.linalg.norm(rhs)
        if scale == 0.0:
            return x
        residual = np.linalg.norm(self._A @ x - rhs)
        if residual > tol * scale:
            raise ConservationViolationError(
                "right-hand side is not in range(A): relative residual "
                f"{residual / scale:.3e} exceeds {tol:g}"
            )
        return x


class PlainSolver:
    """LU-backed solver for a nonsingular A (post-void operator)."""

    def __init__(self, A: sp.spmatrix):
        try:
            self._lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise NumericalError(f"operator is singular: {exc}") from exc
        self.n = A.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)
