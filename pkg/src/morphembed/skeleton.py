"""Skeleton parsing, connectivity repair, and canonical preprocessing.

A neuron skeleton is an undirected spatially embedded graph. Nodes carry a
3D position in micrometers, a radius, and a compartment label; exactly one
node is the soma. Graphs are stored with node rows sorted by id, which all
operations preserve, so dense index 0..n-1 always corresponds to ascending
node ids.

All operations are pure: they return new graphs and never mutate their
input. Randomised operations take an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError, SwcParseError


class Compartment(IntEnum):
    """Node compartment labels, numbered like SWC type codes."""

    SOMA = 1
    AXON = 2
    BASAL_DENDRITE = 3
    APICAL_DENDRITE = 4


class SomaMode(str, Enum):
    """Coordinate normalization conventions.

    RELATIVE_DEPTH keeps the soma's depth (y) coordinate and zeroes x and z,
    so laminar position is preserved. SOMA_ORIGIN moves the soma to the
    origin, discarding absolute depth.
    """

    RELATIVE_DEPTH = "relative_depth"
    SOMA_ORIGIN = "soma_origin"


@dataclass
class SkeletonNode:
    id: int
    position: np.ndarray  # (3,) float64, micrometers
    radius: float
    compartment: Compartment
    parent: int | None = None


@dataclass
class NeuronGraph:
    """Undirected spatial graph with one designated soma node.

    ``ids`` is strictly ascending; the row order of ``positions``,
    ``radii`` and ``compartments`` follows it. ``edges`` holds unordered
    id pairs stored as (small, large) tuples.
    """

    ids: np.ndarray           # (n,) int64, strictly ascending
    positions: np.ndarray     # (n, 3) float64
    radii: np.ndarray         # (n,) float64
    compartments: np.ndarray  # (n,) uint8, Compartment values
    edges: set[tuple[int, int]]
    soma_id: int
    meta: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return int(self.ids.shape[0])

    def index_of(self, node_id: int) -> int:
        i = int(np.searchsorted(self.ids, node_id))
        if i >= self.ids.shape[0] or self.ids[i] != node_id:
            raise KeyError(f"node id {node_id} not in graph")
        return i

    def nodes(self) -> list[SkeletonNode]:
        return [
            SkeletonNode(
                id=int(self.ids[i]),
                position=self.positions[i].copy(),
                radius=float(self.radii[i]),
                compartment=Compartment(int(self.compartments[i])),
            )
            for i in range(self.node_count)
        ]

    def edge_array(self) -> np.ndarray:
        """Edges as a lexicographically sorted (m, 2) int64 array of ids."""
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    def validate(self) -> None:
        ids = self.ids
        if ids.shape[0] == 0:
            raise DataError("graph has no nodes")
        if np.any(np.diff(ids) <= 0):
            raise DataError("node ids must be strictly ascending")
        if np.any(self.radii < 0):
            raise DataError("negative radius")
        id_set = set(int(i) for i in ids)
        for a, b in self.edges:
            if a == b:
                raise DataError(f"self-loop on node {a}")
            if a not in id_set or b not in id_set:
                raise DataError(f"edge ({a}, {b}) references missing node")
        soma_idx = np.flatnonzero(self.compartments == Compartment.SOMA)
        if soma_idx.shape[0] != 1 or int(ids[soma_idx[0]]) != self.soma_id:
            raise DataError("graph must have exactly one soma node matching soma_id")


# ---------------------------------------------------------------------------
# SWC parsing / serialization
# ---------------------------------------------------------------------------

_SWC_COMPARTMENTS = {
    1: Compartment.SOMA,
    2: Compartment.AXON,
    3: Compartment.BASAL_DENDRITE,
    4: Compartment.APICAL_DENDRITE,
}


def parse_swc(text: str, dataset_tag: str = "", source: str = "") -> NeuronGraph:
    """Parse SWC text into a NeuronGraph.

    Data lines have 7 whitespace-separated fields ``id type x y z radius
    parent``; ``#`` lines and blank lines are skipped. Type codes outside
    1-4 fall back to the basal dendrite compartment and are recorded under
    ``meta["unknown_compartment_codes"]``. Multiple soma samples are merged
    into a single soma node at their centroid with the maximum radius.
    """
    records: dict[int, tuple[int, float, float, float, float, int, int]] = {}
    unknown_codes: set[int] = set()
    n_data_lines = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 7:
            raise SwcParseError(f"line {lineno}: expected 7 fields, got {len(fields)}")
        try:
            nid = int(fields[0])
            code = int(fields[1])
            x, y, z = float(fields[2]), float(fields[3]), float(fields[4])
            radius = float(fields[5])
            parent = int(fields[6])
        except ValueError as exc:
            raise SwcParseError(f"line {lineno}: non-numeric field ({exc})") from None
        if nid in records:
            raise SwcParseError(f"line {lineno}: duplicate node id {nid}")
        if radius < 0:
            raise SwcParseError(f"line {lineno}: negative radius")
        if parent == nid:
            raise SwcParseError(f"line {lineno}: node {nid} is its own parent")
        if code not in _SWC_COMPARTMENTS:
            unknown_codes.add(code)
            code = int(Compartment.BASAL_DENDRITE)
        records[nid] = (code, x, y, z, radius, parent, lineno)
        n_data_lines += 1
    if n_data_lines == 0:
        raise SwcParseError("empty input: no data lines")

    for nid, (_, _, _, _, _, parent, lineno) in records.items():
        if parent != -1 and parent not in records:
            raise SwcParseError(
                f"line {lineno}: node {nid} references missing parent {parent}"
            )

    soma_ids = sorted(nid for nid, r in records.items() if r[0] == Compartment.SOMA)
    if not soma_ids:
        raise SwcParseError("no soma node (type 1) in file")

    # Merge multi-sample somas: centroid position, max radius, smallest id.
    merged_id = soma_ids[0]
    soma_set = set(soma_ids)
    if len(soma_ids) > 1:
        pts = np.array([[records[i][1], records[i][2], records[i][3]] for i in soma_ids])
        centroid = pts.mean(axis=0)
        max_radius = max(records[i][4] for i in soma_ids)
        parent_of_merged = -1
        for i in soma_ids:
            p = records[i][5]
            if p != -1 and p not in soma_set:
                parent_of_merged = p
                break
        records[merged_id] = (
            int(Compartment.SOMA),
            float(centroid[0]), float(centroid[1]), float(centroid[2]),
            float(max_radius), parent_of_merged, records[merged_id][6],
        )
        for i in soma_ids[1:]:
            del records[i]

    def resolve(nid: int) -> int:
        return merged_id if nid in soma_set else nid

    ids = np.array(sorted(records), dtype=np.int64)
    n = ids.shape[0]
    positions = np.empty((n, 3), dtype=np.float64)
    radii = np.empty(n, dtype=np.float64)
    compartments = np.empty(n, dtype=np.uint8)
    edges: set[tuple[int, int]] = set()
    for row, nid in enumerate(ids):
        code, x, y, z, radius, parent, _ = records[int(nid)]
        positions[row] = (x, y, z)
        radii[row] = radius
        compartments[row] = code
        if parent != -1:
            a, b = resolve(int(nid)), resolve(parent)
            if a != b:
                edges.add((min(a, b), max(a, b)))

    meta: dict = {"dataset": dataset_tag, "source": source}
    if unknown_codes:
        meta["unknown_compartment_codes"] = sorted(unknown_codes)
    return NeuronGraph(ids, positions, radii, compartments, edges, int(merged_id), meta)


def serialize_swc(g: NeuronGraph) -> str:
    """Serialize to SWC text, rooted at the soma (parents precede children).

    Lines are emitted in BFS order with sorted neighbor visiting, so output
    is a deterministic function of the graph. Nodes unreachable from the
    soma (disconnected input) are emitted as additional roots.
    """
    nbrs = adjacency_lists(g)
    soma = g.index_of(g.soma_id)
    parent = np.full(g.node_count, -1, dtype=np.int64)
    seen = np.zeros(g.node_count, dtype=bool)
    order: list[int] = []
    for root in [soma] + [i for i in range(g.node_count) if i != soma]:
        if seen[root]:
            continue
        seen[root] = True
        order.append(root)
        head = len(order) - 1
        while head < len(order):
            cur = order[head]
            head += 1
            for nxt in nbrs[cur]:
                if not seen[nxt]:
                    seen[nxt] = True
                    parent[nxt] = cur
                    order.append(nxt)
    lines = []
    for i in order:
        parent_id = -1 if parent[i] < 0 else int(g.ids[parent[i]])
        lines.append(
            f"{int(g.ids[i])} {int(g.compartments[i])} "
            f"{g.positions[i, 0]!r} {g.positions[i, 1]!r} {g.positions[i, 2]!r} "
            f"{g.radii[i]!r} {parent_id}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Graph structure helpers
# ---------------------------------------------------------------------------

def adjacency_lists(g: NeuronGraph) -> list[list[int]]:
    """Neighbor indices per node (index space), each list sorted."""
    nbrs: list[list[int]] = [[] for _ in range(g.node_count)]
    idx = {int(v): i for i, v in enumerate(g.ids)}
    for a, b in sorted(g.edges):
        ia, ib = idx[a], idx[b]
        nbrs[ia].append(ib)
        nbrs[ib].append(ia)
    return [sorted(x) for x in nbrs]


def bfs_tree(g: NeuronGraph, root_id: int | None = None) -> tuple[list[int], np.ndarray]:
    """BFS order and parent indices rooted at the soma (or ``root_id``).

    Unreachable nodes are absent from the order and keep parent -1.
    """
    root = g.index_of(g.soma_id if root_id is None else root_id)
    nbrs = adjacency_lists(g)
    parent = np.full(g.node_count, -1, dtype=np.int64)
    seen = np.zeros(g.node_count, dtype=bool)
    seen[root] = True
    order = [root]
    head = 0
    while head < len(order):
        cur = order[head]
        head += 1
        for nxt in nbrs[cur]:
            if not seen[nxt]:
                seen[nxt] = True
                parent[nxt] = cur
                order.append(nxt)
    return order, parent


def connected_components(g: NeuronGraph) -> list[np.ndarray]:
    """Connected components as arrays of node indices, in first-seen order."""
    nbrs = adjacency_lists(g)
    seen = np.zeros(g.node_count, dtype=bool)
    comps = []
    for start in range(g.node_count):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        head = 0
        while head < len(comp):
            cur = comp[head]
            head += 1
            for nxt in nbrs[cur]:
                if not seen[nxt]:
                    seen[nxt] = True
                    comp.append(nxt)
        comps.append(np.array(comp, dtype=np.int64))
    return comps


def _min_cross_pair(pos: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, int, int]:
    """Closest pair of nodes between index sets a and b (chunked O(|a||b|))."""
    best = (np.inf, -1, -1)
    chunk = 2048
    pb = pos[b]
    for s in range(0, a.shape[0], chunk):
        pa = pos[a[s : s + chunk]]
        d = cdist(pa, pb)
        flat = int(np.argmin(d))
        i, j = divmod(flat, d.shape[1])
        val = float(d[i, j])
        if val < best[0]:
            best = (val, int(a[s + i]), int(b[j]))
    return best


def connect_components(g: NeuronGraph) -> NeuronGraph:
    """Join disconnected components into one.

    Repeatedly adds the edge between the globally closest pair of nodes
    (straight-line Euclidean distance) that lie in two different components
    until a single component remains. Connected input is returned unchanged.
    """
    comps = connected_components(g)
    if len(comps) == 1:
        return g
    edges = set(g.edges)
    comps = [c for c in comps]
    while len(comps) > 1:
        best = (np.inf, -1, -1, -1, -1)
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                d, ia, ib = _min_cross_pair(g.positions, comps[i], comps[j])
                if d < best[0]:
                    best = (d, ia, ib, i, j)
        _, ia, ib, ci, cj = best
        a, b = int(g.ids[ia]), int(g.ids[ib])
        edges.add((min(a, b), max(a, b)))
        comps[ci] = np.concatenate([comps[ci], comps[cj]])
        del comps[cj]
    return NeuronGraph(
        g.ids, g.positions, g.radii, g.compartments, edges, g.soma_id, dict(g.meta)
    )


def subsample(g: NeuronGraph, n: int, rng: np.random.Generator) -> NeuronGraph:
    """Reduce a connected graph to exactly ``n`` nodes.

    Removes one node at a time: a uniformly random degree-2 non-soma node is
    contracted (its two neighbors reconnected); when no such node exists a
    random non-soma leaf is deleted. The soma is always kept and the result
    stays connected. Graphs with at most ``n`` nodes are returned unchanged.
    """
    if n < 2:
        raise ValueError(f"subsample target must be >= 2, got {n}")
    if g.node_count <= n:
        return g

    nbrs = {i: set(lst) for i, lst in enumerate(adjacency_lists(g))}
    soma = g.index_of(g.soma_id)

    # Candidate pools with O(1) uniform pick via swap-remove lists.
    deg2: list[int] = []
    deg2_pos: dict[int, int] = {}

    def pool_add(v: int) -> None:
        if v != soma and len(nbrs[v]) == 2 and v not in deg2_pos:
            deg2_pos[v] = len(deg2)
            deg2.append(v)

    def pool_discard(v: int) -> None:
        pos = deg2_pos.pop(v, None)
        if pos is None:
            return
        last = deg2.pop()
        if last != v:
            deg2[pos] = last
            deg2_pos[last] = pos

    def pool_update(v: int) -> None:
        if v != soma and v in nbrs and len(nbrs[v]) == 2:
            pool_add(v)
        else:
            pool_discard(v)

    for v in nbrs:
        pool_add(v)

    alive = g.node_count
    while alive > n:
        if deg2:
            v = deg2[int(rng.integers(len(deg2)))]
            a, b = sorted(nbrs[v])
            pool_discard(v)
            nbrs[a].discard(v)
            nbrs[b].discard(v)
            del nbrs[v]
            nbrs[a].add(b)
            nbrs[b].add(a)
            pool_update(a)
            pool_update(b)
        else:
            leaves = sorted(v for v, s in nbrs.items() if len(s) == 1 and v != soma)
            v = leaves[int(rng.integers(len(leaves)))]
            (a,) = nbrs[v]
            nbrs[a].discard(v)
            del nbrs[v]
            pool_update(a)
        alive -= 1

    keep = np.array(sorted(nbrs), dtype=np.int64)
    edges = set()
    for v, s in nbrs.items():
        for w in s:
            a, b = int(g.ids[v]), int(g.ids[w])
            edges.add((min(a, b), max(a, b)))
    return NeuronGraph(
        g.ids[keep],
        g.positions[keep],
        g.radii[keep],
        g.compartments[keep],
        edges,
        g.soma_id,
        dict(g.meta),
    )


def normalize_soma(g: NeuronGraph, mode: SomaMode) -> NeuronGraph:
    """Translate coordinates relative to the soma.

    RELATIVE_DEPTH zeroes x and z at the soma but keeps its y coordinate
    (depth axis); SOMA_ORIGIN moves the soma to (0, 0, 0).
    """
    soma = g.index_of(g.soma_id)
    shift = g.positions[soma].copy()
    if SomaMode(mode) is SomaMode.RELATIVE_DEPTH:
        shift[1] = 0.0
    return NeuronGraph(
        g.ids,
        g.positions - shift,
        g.radii,
        g.compartments,
        set(g.edges),
        g.soma_id,
        dict(g.meta),
    )


def remove_axon(g: NeuronGraph) -> NeuronGraph:
    """Delete all axon-compartment nodes and their incident edges.

    If the removal disconnects the remainder it is repaired with
    ``connect_components``.
    """
    keep_mask = g.compartments != Compartment.AXON
    if keep_mask.all():
        return g
    keep_ids = set(int(v) for v in g.ids[keep_mask])
    edges = {(a, b) for a, b in g.edges if a in keep_ids and b in keep_ids}
    out = NeuronGraph(
        g.ids[keep_mask],
        g.positions[keep_mask],
        g.radii[keep_mask],
        g.compartments[keep_mask],
        edges,
        g.soma_id,
        dict(g.meta),
    )
    return connect_components(out)
