"""Stochastic augmentations for spatial tree graphs and two-view generation.

Six augmentations are composed per view: branch deletion, subsampling to a
fixed node count, rotation around the depth (y) axis, per-node Gaussian
jitter, cumulative jitter along branches, and a rigid depth translation.
Topology-changing operations run first so every view has exactly the
configured node count; geometric noise runs last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .skeleton import NeuronGraph, bfs_tree, subsample


@dataclass
class AugmentConfig:
    """Per-view augmentation parameters.

    ``n_keep`` is the exact node count of a view. Sigmas are in
    micrometers. The rotation axis is fixed to y (orthogonal to the pia).
    """

    n_keep: int = 200
    sigma_jitter: float = 1.0
    n_drop_branches: int = 10
    n_cum_branches: int = 5
    sigma_cum: float = 0.5
    sigma_soma: float = 10.0

    def validate(self) -> None:
        if self.n_keep < 2:
            raise ConfigError("n_keep must be >= 2")
        if min(self.sigma_jitter, self.sigma_cum, self.sigma_soma) < 0:
            raise ConfigError("sigmas must be >= 0")
        if min(self.n_drop_branches, self.n_cum_branches) < 0:
            raise ConfigError("branch counts must be >= 0")

    @classmethod
    def mouse_cortex(cls) -> "AugmentConfig":
        """Defaults used for the mouse visual cortex dataset."""
        return cls(n_keep=200, sigma_jitter=1.0, n_drop_branches=10,
                   n_cum_branches=5, sigma_cum=0.5, sigma_soma=10.0)

    @classmethod
    def rat_cortex(cls) -> "AugmentConfig":
        """Milder defaults used for the rat somatosensory cortex dataset."""
        return cls(n_keep=100, sigma_jitter=0.1, n_drop_branches=5,
                   n_cum_branches=0, sigma_cum=0.0, sigma_soma=1.0)


def rotate_y(g: NeuronGraph, theta: float) -> NeuronGraph:
    """Rotate all positions by ``theta`` radians around the y axis."""
    c, s = np.cos(theta), np.sin(theta)
    p = g.positions
    out = np.empty_like(p)
    out[:, 0] = p[:, 0] * c + p[:, 2] * s
    out[:, 1] = p[:, 1]
    out[:, 2] = -p[:, 0] * s + p[:, 2] * c
    return NeuronGraph(g.ids, out, g.radii, g.compartments, set(g.edges), g.soma_id,
                       dict(g.meta))


def jitter_nodes(g: NeuronGraph, sigma: float, rng: np.random.Generator) -> NeuronGraph:
    """Add independent N(0, sigma^2) noise to every coordinate."""
    if sigma == 0:
        return g
    noise = rng.normal(0.0, sigma, size=g.positions.shape)
    return NeuronGraph(g.ids, g.positions + noise, g.radii, g.compartments,
                       set(g.edges), g.soma_id, dict(g.meta))


def delete_branches(
    g: NeuronGraph, n: int, min_nodes: int, rng: np.random.Generator
) -> NeuronGraph:
    """Delete up to ``n`` random subtrees (branches away from the soma).

    Each draw picks uniformly among non-soma nodes whose subtree holds at
    most 25% of the current nodes and removes that subtree; a draw that
    would take the graph below ``min_nodes`` is skipped. The soma is always
    kept and the result stays connected.
    """
    if n == 0:
        return g
    out = g
    for _ in range(n):
        order, parent = bfs_tree(out)
        size = np.ones(out.node_count, dtype=np.int64)
        for i in reversed(order):
            p = parent[i]
            if p >= 0:
                size[p] += size[i]
        soma = out.index_of(out.soma_id)
        limit = 0.25 * out.node_count
        candidates = [i for i in order if i != soma and size[i] <= limit]
        if not candidates:
            continue
        pick = candidates[int(rng.integers(len(candidates)))]
        if out.node_count - int(size[pick]) < min_nodes:
            continue
        # collect the subtree rooted at pick (away from the soma)
        children: list[list[int]] = [[] for _ in range(out.node_count)]
        for i in order:
            if parent[i] >= 0:
                children[parent[i]].append(i)
        doomed = {pick}
        stack = [pick]
        while stack:
            cur = stack.pop()
            for ch in children[cur]:
                doomed.add(ch)
                stack.append(ch)
        keep = np.array([i for i in range(out.node_count) if i not in doomed],
                        dtype=np.int64)
        keep_ids = set(int(v) for v in out.ids[keep])
        edges = {e for e in out.edges if e[0] in keep_ids and e[1] in keep_ids}
        out = NeuronGraph(out.ids[keep], out.positions[keep], out.radii[keep],
                          out.compartments[keep], edges, out.soma_id, dict(out.meta))
    return out


def cumulative_jitter(
    g: NeuronGraph, n: int, sigma: float, rng: np.random.Generator
) -> NeuronGraph:
    """Random-walk noise along ``n`` branch-point-to-tip paths.

    For each of ``n`` draws a uniform random branch point (node with two or
    more children away from the soma) is chosen and a random path walked to
    a tip; the node at step t is displaced by the running sum of t
    independent N(0, sigma^2 I) draws. Nodes off the walked paths are
    untouched.
    """
    if n == 0 or sigma == 0:
        return g
    order, parent = bfs_tree(g)
    children: list[list[int]] = [[] for _ in range(g.node_count)]
    for i in order:
        if parent[i] >= 0:
            children[parent[i]].append(i)
    branch_points = [i for i in order if len(children[i]) >= 2]
    if not branch_points:
        return g
    positions = g.positions.copy()
    for _ in range(n):
        node = branch_points[int(rng.integers(len(branch_points)))]
        disp = np.zeros(3)
        while children[node]:
            node = children[node][int(rng.integers(len(children[node])))]
            disp = disp + rng.normal(0.0, sigma, size=3)
            positions[node] += disp
    return NeuronGraph(g.ids, positions, g.radii, g.compartments, set(g.edges),
                       g.soma_id, dict(g.meta))


def translate_soma_depth(
    g: NeuronGraph, sigma: float, rng: np.random.Generator
) -> NeuronGraph:
    """Rigidly shift the whole graph along the depth (y) axis by one
    N(0, sigma^2) draw."""
    if sigma == 0:
        return g
    delta = rng.normal(0.0, sigma)
    positions = g.positions.copy()
    positions[:, 1] += delta
    return NeuronGraph(g.ids, positions, g.radii, g.compartments, set(g.edges),
                       g.soma_id, dict(g.meta))


def make_view(g: NeuronGraph, cfg: AugmentConfig, rng: np.random.Generator) -> NeuronGraph:
    """One stochastic view: branch deletion, subsample to ``n_keep``, then
    rotation, jitter, cumulative jitter, and depth translation."""
    if g.node_count < cfg.n_keep:
        raise DataError(
            f"graph has {g.node_count} nodes, fewer than view size {cfg.n_keep}"
        )
    v = delete_branches(g, cfg.n_drop_branches, min_nodes=cfg.n_keep, rng=rng)
    v = subsample(v, cfg.n_keep, rng)
    v = rotate_y(v, rng.uniform(0.0, 2.0 * np.pi))
    v = jitter_nodes(v, cfg.sigma_jitter, rng)
    v = cumulative_jitter(v, cfg.n_cum_branches, cfg.sigma_cum, rng)
    v = translate_soma_depth(v, cfg.sigma_soma, rng)
    return v


def make_two_views(
    g: NeuronGraph, cfg: AugmentConfig, rng: np.random.Generator
) -> tuple[NeuronGraph, NeuronGraph]:
    """Two independent stochastic views of the same graph.

    Both views draw from the same augmentation distribution; their
    randomness comes from two child streams spawned off ``rng``, so a
    fixed seed reproduces the pair bit-exactly.
    """
    r1, r2 = rng.spawn(2)
    return make_view(g, cfg, r1), make_view(g, cfg, r2)
