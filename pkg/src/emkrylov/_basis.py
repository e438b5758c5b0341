"""Shared Arnoldi plumbing: modified Gram-Schmidt with selective reorthogonalization."""

from __future__ import annotations

import numpy as np

#: New-direction norm below breakdown_tol times its pre-orthogonalization norm
#: is treated as a happy breakdown (the candidate is numerically dependent).
BREAKDOWN_TOL = 1e-12

#: Residual overlap (relative) above which a second full MGS pass runs.
REORTH_TOL = 1e-8


def mgs_orthogonalize(basis: list[np.ndarray], w: np.ndarray):
    """Orthogonalize w against the current basis columns in place.

    Returns (coeffs, beta, happy) where coeffs are the projection
    coefficients onto each basis vector (second-pass corrections folded in),
    beta = ||w|| after orthogonalization, and happy flags a breakdown
    relative to the candidate's incoming norm.
    """
    w = w.copy()
    pre_norm = np.linalg.norm(w)
    coeffs = np.zeros(len(basis))
    for i, v in enumerate(basis):
        hij = v @ w
        coeffs[i] = hij
        w -= hij * v

    beta = np.linalg.norm(w)
    if pre_norm > 0 and beta > BREAKDOWN_TOL * pre_norm:
        # one full second pass when orthogonality loss is measurable
        overlap = np.array([v @ w for v in basis])
        if overlap.size and np.linalg.norm(overlap) > REORTH_TOL * beta:
            for i, v in enumerate(basis):
                w -= overlap[i] * v
            coeffs += overlap
            beta = np.linalg.norm(w)

    happy = pre_norm == 0.0 or beta <= BREAKDOWN_TOL * pre_norm
    return coeffs, beta, w, happy
