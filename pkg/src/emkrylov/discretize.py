"""Spatial discretization of the stress equation on an interconnect tree.

Each segment is split into uniformly spaced grid points. Tree nodes are
shared unknowns (stress continuity holds by construction); interior rows
carry the standard three-point diffusion stencil; terminal and junction rows
come from finite-volume balances over half cells, which is algebraically the
same as second-order ghost-node elimination of the flux boundary conditions.

The result is the LTI system  x' = A x + B u  with one input column per
segment (u holds the per-segment drive magnitudes G), nonpositive spectrum,
and, in the nucleation phase, row sums exactly zero so that span{1} is the
nullspace of A and the control-volume weights form the left nullvector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError
from .tree import InterconnectTree, MaterialParams, Segment

PHASE_NUCLEATION = "nucleation"
PHASE_POSTVOID = "post-void"

DEFAULT_POINTS_PER_SEGMENT = 11


def diffusivity(segment: Segment, mat: MaterialParams) -> float:
    """Stress diffusivity kappa = D_a * B * Omega / (k_B * T)."""
    return (mat.diffusivity_base * mat.bulk_modulus * mat.atomic_volume
            / (mat.boltzmann * mat.temperature))


def drive_force(segment: Segment, mat: MaterialParams) -> float:
    """EM drive G = e * rho * J * Z* / Omega, signed along a -> b."""
    return (mat.electron_charge * mat.resistivity_cu * segment.current_density
            * mat.effective_charge / mat.atomic_volume)


@dataclass(frozen=True)
class GridMap:
    """Mapping between grid unknowns and tree geometry.

    Grid rows 0..n_tree_nodes-1 are the tree nodes (row index == node id);
    interior points follow segment by segment. ``segment_rows[s]`` lists the
    grid rows along segment s from node_a to node_b inclusive.
    """

    n: int
    n_tree_nodes: int
    segment_rows: tuple[np.ndarray, ...]
    dx: np.ndarray                 # per segment (m)
    owner_segment: np.ndarray      # per grid point: segment id, -1 for tree nodes
    arc_position: np.ndarray       # per grid point: arc position along owner (m); NaN for tree nodes

    def segments_at_row(self, row: int, tree: InterconnectTree) -> list[int]:
        """Segment ids incident to a grid row."""
        if row < self.n_tree_nodes:
            return [s.id for s in tree.segments if row in (s.node_a, s.node_b)]
        return [int(self.owner_segment[row])]


@dataclass(frozen=True)
class LtiSystem:
    """Spatially discretized stress dynamics x' = A x + B u (C = I)."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    u: np.ndarray
    x0: np.ndarray
    grid: GridMap
    phase: str
    needs_deflation: bool
    cv_weights: np.ndarray     # control-volume lengths (m); left nullvector in nucleation phase
    cell_volumes: np.ndarray   # control-volume metal volumes W*H*dx (m^3)
    kappa: np.ndarray = field(repr=False, default=None)  # per segment (m^2/s)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def forcing(self) -> np.ndarray:
        """b = B @ u."""
        return self.B @ self.u

    def dump_triplets(self, path) -> None:
        """Debug dump of A in text triplet format: 'row col value' per line."""
        coo = self.A.tocoo()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {self.n} {self.n} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {format(v, '.17g')}\n")


def assemble_nucleation(
    tree: InterconnectTree,
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    x0: np.ndarray | None = None,
) -> LtiSystem:
    """Assemble the nucleation-phase system with blocking terminals.

    Every segment gets ``points_per_segment`` grid points including its two
    end nodes, so dx = L / (points - 1).
    """
    if points_per_segment < 2:
        raise ParameterError("points_per_segment must be >= 2")

    mat = tree.materials
    n_nodes = tree.n_nodes
    pts = points_per_segment

    n = n_nodes + tree.n_segments * (pts - 2)
    dx = np.array([s.length / (pts - 1) for s in tree.segments])
    kappa = np.array([diffusivity(s, mat) for s in tree.segments])
    g = np.array([drive_force(s, mat) for s in tree.segments])

    segment_rows = []
    owner = np.full(n, -1, dtype=int)
    arc = np.full(n, np.nan)
    next_row = n_nodes
    for s in tree.segments:
        inner = np.arange(next_row, next_row + pts - 2)
        rows = np.concatenate(([s.node_a], inner, [s.node_b]))
        segment_rows.append(rows)
        owner[inner] = s.id
        arc[inner] = dx[s.id] * np.arange(1, pts - 1)
        next_row += pts - 2

    w = np.zeros(n)            # control-volume lengths
    vol = np.zeros(n)          # control-volume metal volumes
    b_rows, b_cols, b_vals = [], [], []
    c_rows, c_cols, c_vals = [], [], []   # symmetric conductance part
    for s in tree.segments:
        rows = segment_rows[s.id]
        c = kappa[s.id] / dx[s.id]
        area = s.cross_section
        for i in range(len(rows) - 1):
            p, q = rows[i], rows[i + 1]
            c_rows += [p, q]
            c_cols += [q, p]
            c_vals += [c, c]
        w[rows[1:-1]] += dx[s.id]
        w[rows[0]] += 0.5 * dx[s.id]
        w[rows[-1]] += 0.5 * dx[s.id]
        vol[rows[1:-1]] += dx[s.id] * area
        vol[rows[0]] += 0.5 * dx[s.id] * area
        vol[rows[-1]] += 0.5 * dx[s.id] * area
        # drive enters through the two end rows: +kappa*G at node_a, -kappa*G at node_b
        b_rows += [rows[0], rows[-1]]
        b_cols += [s.id, s.id]
        b_vals += [kappa[s.id], -kappa[s.id]]

    conduct = sp.csr_matrix((c_vals, (c_rows, c_cols)), shape=(n, n))
    # diagonal = -(row sum of off-diagonals): row sums are exactly zero
    lap = conduct - sp.diags(np.asarray(conduct.sum(axis=1)).ravel(), format="csr")
    inv_w = sp.diags(1.0 / w, format="csr")
    A = (inv_w @ lap).tocsr()
    B = (inv_w @ sp.csr_matrix((b_vals, (b_rows, b_cols)), shape=(n, tree.n_segments))).tocsr()

    if x0 is None:
        x0 = np.zeros(n)
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (n,):
            raise ParameterError(f"x0 must have shape ({n},)")

    grid = GridMap(
        n=n,
        n_tree_nodes=n_nodes,
        segment_rows=tuple(segment_rows),
        dx=dx,
        owner_segment=owner,
        arc_position=arc,
    )
    return LtiSystem(
        A=A, B=B, u=g, x0=x0, grid=grid,
        phase=PHASE_NUCLEATION, needs_deflation=True,
        cv_weights=w, cell_volumes=vol, kappa=kappa,
    )


def assemble_postvoid(
    base: LtiSystem,
    nucleation_grid_point: int,
    mat: MaterialParams,
    stress_at_tnuc: np.ndarray,
) -> LtiSystem:
    """Re-assemble the system after a void nucleates at one grid point.

    The void row keeps its diffusive couplings but gains the Robin term
    -(sum of incident kappa) / (delta * w_v) on the diagonal, obtained by
    ghost-node elimination of d(sigma)/dx |_void = sigma_void / delta. The
    drive contribution at that row disappears (the void face is no longer
    blocking), which removes the constant nullspace and makes A nonsingular.
    """
    v = int(nucleation_grid_point)
    if not 0 <= v < base.n:
        raise ParameterError(f"nucleation grid point {v} outside 0..{base.n - 1}")
    stress_at_tnuc = np.asarray(stress_at_tnuc, dtype=float)
    if stress_at_tnuc.shape != (base.n,):
        raise ParameterError(f"stress_at_tnuc must have shape ({base.n},)")

    if v < base.grid.n_tree_nodes:
        kappa_sum = sum(base.kappa[i] for i, rows in enumerate(base.grid.segment_rows)
                        if v in (rows[0], rows[-1]))
    else:
        kappa_sum = base.kappa[int(base.grid.owner_segment[v])]

    A = base.A.tolil(copy=True)
    A[v, v] = A[v, v] - kappa_sum / (mat.void_thickness * base.cv_weights[v])
    A = A.tocsr()

    B = base.B.tolil(copy=True)
    B[v, :] = 0.0
    B = B.tocsr()

    return LtiSystem(
        A=A, B=B, u=base.u.copy(), x0=stress_at_tnuc, grid=base.grid,
        phase=PHASE_POSTVOID, needs_deflation=False,
        cv_weights=base.cv_weights, cell_volumes=base.cell_volumes, kappa=base.kappa,
    )
