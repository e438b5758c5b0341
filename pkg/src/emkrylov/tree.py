"""Interconnect tree model: domain types, synthetic generator, file format.

Trees are immutable after construction and safe to share across concurrent
simulations. All quantities are SI (meters, amperes, pascals, kelvins).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ParameterError, TreeFormatError, TreeValidationError

KIND_TERMINAL = "terminal-boundary"
KIND_JUNCTION = "junction"
KIND_INTERIOR = "interior"

_FILE_HEADER = "emtree v1"

# Positions must reproduce segment lengths to this absolute tolerance (m).
LENGTH_POSITION_TOL = 1e-9


@dataclass(frozen=True)
class MaterialParams:
    """Material and condition parameters shared by every segment of a tree.

    Defaults are a 32nm-class copper/Ta-barrier parameter set at stress
    temperature. ``critical_void_volume`` of ``None`` means "use W^2 * H of
    the voided segment" at evaluation time.
    """

    diffusivity_base: float = 3.0e-17   # D_a, effective atomic diffusivity (m^2/s)
    bulk_modulus: float = 1.0e11        # B (Pa)
    atomic_volume: float = 1.182e-29    # Omega (m^3)
    boltzmann: float = 1.380649e-23     # k_B (J/K)
    temperature: float = 378.0          # T (K)
    electron_charge: float = 1.602176634e-19  # e (C)
    resistivity_cu: float = 2.25e-8     # rho_Cu (Ohm m)
    effective_charge: float = 1.0       # Z* (dimensionless)
    resistivity_ta: float = 2.0e-6      # rho_Ta (Ohm m)
    barrier_thickness: float = 5.0e-9   # h_Ta (m)
    void_thickness: float = 1.0e-9      # delta (m)
    critical_stress: float = 1.0e8      # sigma_crit (Pa)
    critical_void_volume: float | None = None  # V_crit (m^3); None -> W^2*H per segment

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "critical_void_volume":
                if value is not None and not (value > 0):
                    raise ParameterError("critical_void_volume must be positive or None")
                continue
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"material parameter {f.name!r} must be finite and > 0")

    def with_overrides(self, **kwargs) -> "MaterialParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class TreeNode:
    id: int
    x: float
    y: float
    kind: str  # terminal-boundary | junction | interior

    def __post_init__(self):
        if self.kind not in (KIND_TERMINAL, KIND_JUNCTION, KIND_INTERIOR):
            raise TreeValidationError(f"node {self.id}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Segment:
    id: int
    node_a: int
    node_b: int
    length: float          # L (m)
    width: float           # W (m)
    height: float          # H (m)
    current_density: float  # J (A/m^2), signed along a -> b

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise TreeValidationError(f"segment {self.id}: node_a == node_b == {self.node_a}")
        for name in ("length", "width", "height"):
            if not getattr(self, name) > 0:
                raise TreeValidationError(f"segment {self.id}: {name} must be > 0")
        if not math.isfinite(self.current_density):
            raise TreeValidationError(f"segment {self.id}: current density must be finite")

    @property
    def cross_section(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class TreeStats:
    l_avg: float        # mean segment length (m)
    l_max: float        # longest node-to-node path length through the tree (m)
    n_segments: int
    n_nodes: int


@dataclass(frozen=True)
class InterconnectTree:
    """A connected acyclic multi-segment interconnect."""

    nodes: tuple[TreeNode, ...]
    segments: tuple[Segment, ...]
    materials: MaterialParams = field(default_factory=MaterialParams)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "segments", tuple(self.segments))
        _validate_tree(self)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-node list of (neighbor node id, segment id)."""
        adj = [[] for _ in self.nodes]
        for seg in self.segments:
            adj[seg.node_a].append((seg.node_b, seg.id))
            adj[seg.node_b].append((seg.node_a, seg.id))
        return adj

    def segments_at(self, node_id: int) -> list[Segment]:
        return [s for s in self.segments if node_id in (s.node_a, s.node_b)]


def _validate_tree(tree: InterconnectTree) -> None:
    nodes, segments = tree.nodes, tree.segments
    if not nodes or not segments:
        raise TreeValidationError("tree must contain at least one segment and two nodes")

    ids = [n.id for n in nodes]
    if ids != list(range(len(nodes))):
        raise TreeValidationError("node ids must be unique and dense 0..N-1 in order")
    seg_ids = [s.id for s in segments]
    if seg_ids != list(range(len(segments))):
        raise TreeValidationError("segment ids must be unique and dense 0..M-1 in order")

    degree = [0] * len(nodes)
    for seg in segments:
        for end in (seg.node_a, seg.node_b):
            if not 0 <= end < len(nodes):
                raise TreeValidationError(f"segment {seg.id}: dangling node id {end}")
            degree[end] += 1

    if len(segments) != len(nodes) - 1:
        raise TreeValidationError(
            f"not a tree: {len(segments)} segments with {len(nodes)} nodes"
        )

    # union-find for connectivity + acyclicity
    parent = list(range(len(nodes)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for seg in segments:
        ra, rb = find(seg.node_a), find(seg.node_b)
        if ra == rb:
            raise TreeValidationError(f"cycle detected at segment {seg.id}")
        parent[ra] = rb

    roots = {find(i) for i in range(len(nodes))}
    if len(roots) != 1:
        raise TreeValidationError("tree graph is disconnected")

    for node in nodes:
        expected = _kind_for_degree(degree[node.id])
        if node.kind != expected:
            raise TreeValidationError(
                f"node {node.id}: kind {node.kind!r} inconsistent with degree "
                f"{degree[node.id]} (expected {expected!r})"
            )

    for seg in segments:
        a, b = nodes[seg.node_a], nodes[seg.node_b]
        dist = math.hypot(a.x - b.x, a.y - b.y)
        if abs(dist - seg.length) > LENGTH_POSITION_TOL:
            raise TreeValidationError(
                f"segment {seg.id}: length {seg.length!r} inconsistent with node "
                f"positions (distance {dist!r})"
            )

    min_len = min(s.length for s in segments)
    if tree.materials.void_thickness > min_len / 100.0:
        warnings.warn(
            "void thickness delta is not small compared to the shortest segment "
            f"({tree.materials.void_thickness:g} m vs {min_len:g} m)",
            stacklevel=3,
        )


def _kind_for_degree(degree: int) -> str:
    if degree == 1:
        return KIND_TERMINAL
    if degree == 2:
        return KIND_INTERIOR
    return KIND_JUNCTION


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamRanges:
    """Sampling ranges for the synthetic generator (inclusive, SI units).

    ``current_density`` is interpreted as a magnitude range with a random
    sign per segment unless its lower bound is negative, in which case values
    are drawn uniformly from the signed interval.
    """

    length: tuple[float, float] = (10e-6, 100e-6)
    width: tuple[float, float] = (0.1e-6, 1.0e-6)
    height: tuple[float, float] = (0.2e-6, 0.2e-6)
    current_density: tuple[float, float] = (1e9, 5e10)

    def __post_init__(self):
        for name in ("length", "width", "height", "current_density"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ParameterError(f"range {name}: min {lo!r} > max {hi!r}")
            if name != "current_density" and lo <= 0:
                raise ParameterError(f"range {name}: min must be > 0")


def generate_synthetic_tree(
    n_segments: int,
    seed: int,
    ranges: ParamRanges | None = None,
    materials: MaterialParams | None = None,
) -> InterconnectTree:
    """Grow a random tree by attaching each new segment to a uniformly chosen
    existing node.

    Deterministic for a fixed seed (PCG64, platform independent). Covers
    chains, stars and mixed topologies; geometry and current density are
    sampled uniformly from ``ranges``.
    """
    if n_segments < 1:
        raise ParameterError("n_segments must be >= 1")
    ranges = ranges or ParamRanges()
    materials = materials or MaterialParams()
    rng = np.random.default_rng(np.random.PCG64(seed))

    positions = [(0.0, 0.0)]
    raw_segments = []  # (attach_node, L, W, H, J)
    for _ in range(n_segments):
        attach = int(rng.integers(0, len(positions)))
        length = float(rng.uniform(*ranges.length))
        width = float(rng.uniform(*ranges.width))
        height = float(rng.uniform(*ranges.height))
        jlo, jhi = ranges.current_density
        if jlo < 0:
            current = float(rng.uniform(jlo, jhi))
        else:
            current = float(rng.uniform(jlo, jhi)) * (1.0 if rng.random() < 0.5 else -1.0)
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        ax, ay = positions[attach]
        positions.append((ax + length * math.cos(angle), ay + length * math.sin(angle)))
        raw_segments.append((attach, length, width, height, current))

    degree = [0] * len(positions)
    for i, (attach, *_rest) in enumerate(raw_segments):
        degree[attach] += 1
        degree[i + 1] += 1

    nodes = tuple(
        TreeNode(id=i, x=positions[i][0], y=positions[i][1], kind=_kind_for_degree(degree[i]))
        for i in range(len(positions))
    )
    segments = tuple(
        Segment(id=i, node_a=attach, node_b=i + 1, length=length, width=width,
                height=height, current_density=current)
        for i, (attach, length, width, height, current) in enumerate(raw_segments)
    )
    return InterconnectTree(nodes=nodes, segments=segments, materials=materials)


# ---------------------------------------------------------------------------
# Tree statistics
# ---------------------------------------------------------------------------

def tree_stats(tree: InterconnectTree) -> TreeStats:
    """Mean segment length and length-weighted diameter of the tree."""
    l_avg = float(np.mean([s.length for s in tree.segments]))
    adj = tree.adjacency()
    seg_len = {s.id: s.length for s in tree.segments}

    def farthest(start: int) -> tuple[int, float]:
        dist = [-1.0] * tree.n_nodes
        dist[start] = 0.0
        stack = [start]
        while stack:
            u = stack.pop()
            for v, sid in adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + seg_len[sid]
                    stack.append(v)
        best = int(np.argmax(dist))
        return best, dist[best]

    # two-pass farthest-node search; exact on trees
    far, _ = farthest(0)
    _, l_max = farthest(far)
    return TreeStats(l_avg=l_avg, l_max=l_max,
                     n_segments=tree.n_segments, n_nodes=tree.n_nodes)


# ---------------------------------------------------------------------------
# File format: line oriented text, UTF-8
#   emtree v1
#   param <name> <value>
#   node <id> <x_m> <y_m> <kind>
#   seg <id> <node_a> <node_b> <L_m> <W_m> <H_m> <J_A_per_m2>
# '#' starts a comment. Serialization is canonical: params sorted by name,
# nodes and segments sorted by id, floats at 17 significant digits.
# ---------------------------------------------------------------------------

_MATERIAL_NAMES = {f.name for f in fields(MaterialParams)}


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def serialize_tree(tree: InterconnectTree) -> str:
    lines = [_FILE_HEADER]
    for name in sorted(_MATERIAL_NAMES):
        value = getattr(tree.materials, name)
        if value is None:  # critical_void_volume in per-segment mode
            continue
        lines.append(f"param {name} {_fmt(value)}")
    for node in tree.nodes:
        lines.append(f"node {node.id} {_fmt(node.x)} {_fmt(node.y)} {node.kind}")
    for seg in tree.segments:
        lines.append(
            f"seg {seg.id} {seg.node_a} {seg.node_b} {_fmt(seg.length)} "
            f"{_fmt(seg.width)} {_fmt(seg.height)} {_fmt(seg.current_density)}"
        )
    return "\n".join(lines) + "\n"


def _parse_float(token: str, lineno: int, col: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise TreeFormatError(f"expected a number, got {token!r}", lineno, col) from None


def _parse_int(token: str, lineno: int, col: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise TreeFormatError(f"expected an integer, got {token!r}", lineno, col) from None


def parse_tree(text: str) -> InterconnectTree:
    """Parse the emtree v1 text format.

    Raises TreeFormatError for syntax problems (with line/column) and
    TreeValidationError for semantic ones (cycles, duplicate ids, geometry).
    """
    lines = text.splitlines()
    if not lines:
        raise TreeFormatError("empty input", 1)

    body = []
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            body.append((lineno, stripped))
    if not body or body[0][1] != _FILE_HEADER:
        raise TreeFormatError(f"missing header {_FILE_HEADER!r}", body[0][0] if body else 1)

    params: dict[str, float] = {}
    nodes: dict[int, TreeNode] = {}
    segs: dict[int, Segment] = {}

    for lineno, line in body[1:]:
        tokens = line.split()
        tag = tokens[0]
        if tag == "param":
            if len(tokens) != 3:
                raise TreeFormatError("param lines take <name> <value>", lineno)
            name = tokens[1]
            if name not in _MATERIAL_NAMES:
                raise TreeValidationError(f"unknown material parameter {name!r} (line {lineno})")
            params[name] = _parse_float(tokens[2], lineno, 3)
        elif tag == "node":
            if len(tokens) != 5:
                raise TreeFormatError("node lines take <id> <x> <y> <kind>", lineno)
            nid = _parse_int(tokens[1], lineno, 2)
            if nid in nodes:
                raise TreeValidationError(f"duplicate node id {nid} (line {lineno})")
            kind = tokens[4]
            if kind not in (KIND_TERMINAL, KIND_JUNCTION, KIND_INTERIOR):
                raise TreeFormatError(f"unknown node kind {kind!r}", lineno, 5)
            nodes[nid] = TreeNode(
                id=nid,
                x=_parse_float(tokens[2], lineno, 3),
                y=_parse_float(tokens[3], lineno, 4),
                kind=kind,
            )
        elif tag == "seg":
            if len(tokens) != 8:
                raise TreeFormatError(
                    "seg lines take <id> <node_a> <node_b> <L> <W> <H> <J>", lineno
                )
            sid = _parse_int(tokens[1], lineno, 2)
            if sid in segs:
                raise TreeValidationError(f"duplicate segment id {sid} (line {lineno})")
            try:
                segs[sid] = Segment(
                    id=sid,
                    node_a=_parse_int(tokens[2], lineno, 3),
                    node_b=_parse_int(tokens[3], lineno, 4),
                    length=_parse_float(tokens[4], lineno, 5),
                    width=_parse_float(tokens[5], lineno, 6),
                    height=_parse_float(tokens[6], lineno, 7),
                    current_density=_parse_float(tokens[7], lineno, 8),
                )
            except TreeValidationError as exc:
                raise TreeValidationError(f"{exc} (line {lineno})") from None
        else:
            raise TreeFormatError(f"unknown directive {tag!r}", lineno, 1)

    if sorted(nodes) != list(range(len(nodes))):
        missing = sorted(set(range(len(nodes))) - set(nodes))
        raise TreeValidationError(f"node ids not dense; missing {missing}")
    if sorted(segs) != list(range(len(segs))):
        missing = sorted(set(range(len(segs))) - set(segs))
        raise TreeValidationError(f"segment ids not dense; missing {missing}")

    materials = MaterialParams(**params)
    return InterconnectTree(
        nodes=tuple(nodes[i] for i in range(len(nodes))),
        segments=tuple(segs[i] for i in range(len(segs))),
        materials=materials,
    )


def load_tree(path) -> InterconnectTree:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_tree(fh.read())


def save_tree(tree: InterconnectTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_tree(tree))
