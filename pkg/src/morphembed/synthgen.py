"""Deterministic generator of labeled synthetic morphology classes.

Grows rooted random trees segment by segment from a soma: basal stems head
downward/lateral, an optional apical stem heads upward and can widen into a
tuft near its top. Class geometry (branching rate, segment length, soma
depth, tuftedness) makes classes separable by coarse shape statistics, so
the generated datasets exercise the full pipeline without external data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import Compartment, NeuronGraph


@dataclass
class SynthClassSpec:
    """Growth parameters of one synthetic morphology class."""

    class_id: int
    branch_prob: float = 0.12          # split probability per grown segment
    segment_length: float = 18.0       # mean segment length, micrometers
    length_jitter: float = 4.0         # sd of the segment length
    soma_depth_mean: float = -300.0    # y offset of the soma
    soma_depth_std: float = 15.0
    tufted: bool = True                # apical widening near the top
    node_range: tuple[int, int] = (150, 350)
    basal_stems: int = 4
    apical: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.branch_prob <= 1.0:
            raise ValueError("branch_prob must lie in [0, 1]")
        if self.segment_length <= 0:
            raise ValueError("segment_length must be > 0")
        if self.length_jitter < 0:
            raise ValueError("length_jitter must be >= 0")
        lo, hi = self.node_range
        if lo < 20 or hi < lo:
            raise ValueError("node_range must satisfy 20 <= min <= max")
        if self.basal_stems < 1:
            raise ValueError("need at least one basal stem")


def default_specs() -> list[SynthClassSpec]:
    """Three visually distinct classes: deep tufted, shallow wide, mid compact."""
    return [
        SynthClassSpec(class_id=0, branch_prob=0.08, segment_length=26.0,
                       length_jitter=5.0, soma_depth_mean=-620.0, soma_depth_std=20.0,
                       tufted=True, node_range=(180, 320), basal_stems=4, apical=True),
        SynthClassSpec(class_id=1, branch_prob=0.22, segment_length=14.0,
                       length_jitter=3.0, soma_depth_mean=-150.0, soma_depth_std=12.0,
                       tufted=False, node_range=(140, 260), basal_stems=6, apical=False),
        SynthClassSpec(class_id=2, branch_prob=0.12, segment_length=9.0,
                       length_jitter=2.0, soma_depth_mean=-380.0, soma_depth_std=15.0,
                       tufted=False, node_range=(160, 300), basal_stems=3, apical=True),
    ]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / max(np.linalg.norm(v), 1e-12)


def _grow(spec: SynthClassSpec, rng: np.random.Generator) -> NeuronGraph:
    lo, hi = spec.node_range
    target = int(rng.integers(lo, hi + 1))
    depth = rng.normal(spec.soma_depth_mean, spec.soma_depth_std)

    ids = [1]
    positions = [np.array([0.0, depth, 0.0])]
    radii = [6.0]
    compartments = [int(Compartment.SOMA)]
    edges: set[tuple[int, int]] = set()

    # tips: (node index, unit direction, compartment)
    tips: list[tuple[int, np.ndarray, int]] = []
    for _ in range(spec.basal_stems):
        ang = rng.uniform(0.0, 2.0 * np.pi)
        d = _unit(np.array([np.cos(ang), rng.uniform(-0.9, -0.1), np.sin(ang)]))
        tips.append((0, d, int(Compartment.BASAL_DENDRITE)))
    if spec.apical:
        d = _unit(np.array([rng.normal(0, 0.1), 1.0, rng.normal(0, 0.1)]))
        tips.append((0, d, int(Compartment.APICAL_DENDRITE)))

    apical_tuft_height = depth + 0.75 * abs(depth)
    while len(ids) < target and tips:
        ti = int(rng.integers(len(tips)))
        node, direction, comp = tips.pop(ti)
        length = max(0.5, rng.normal(spec.segment_length, spec.length_jitter))
        direction = _unit(direction + rng.normal(0.0, 0.35, size=3))
        pos = positions[node] + direction * length
        new_id = len(ids) + 1
        new_idx = len(ids)
        ids.append(new_id)
        positions.append(pos)
        radii.append(max(0.2, rng.normal(0.8, 0.2)))
        compartments.append(comp)
        a, b = ids[node], new_id
        edges.add((min(a, b), max(a, b)))

        p_branch = spec.branch_prob
        if (
            spec.tufted
            and comp == int(Compartment.APICAL_DENDRITE)
            and pos[1] > apical_tuft_height
        ):
            p_branch = min(1.0, 2.5 * spec.branch_prob + 0.15)
        n_children = 2 if rng.random() < p_branch else 1
        for _ in range(n_children):
            tips.append((new_idx, direction.copy(), comp))

    g = NeuronGraph(
        ids=np.array(ids, dtype=np.int64),
        positions=np.array(positions, dtype=np.float64),
        radii=np.array(radii, dtype=np.float64),
        compartments=np.array(compartments, dtype=np.uint8),
        edges=edges,
        soma_id=1,
        meta={"dataset": "synthetic", "class_id": spec.class_id},
    )
    return g


def generate(
    specs: list[SynthClassSpec], per_class: int, seed: int
) -> tuple[list[NeuronGraph], list[int]]:
    """Generate ``per_class`` tree graphs for every class spec.

    Deterministic in ``seed``: each graph draws from its own stream keyed
    by (seed, class position, graph index, attempt). Graphs below the
    class's minimum node count are rejection-resampled.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    for spec in specs:
        spec.validate()
    graphs: list[NeuronGraph] = []
    labels: list[int] = []
    for ci, spec in enumerate(specs):
        for gi in range(per_class):
            for attempt in range(64):
                rng = np.random.default_rng(
                    np.random.SeedSequence([seed, ci, gi, attempt])
                )
                g = _grow(spec, rng)
                if spec.node_range[0] <= g.node_count <= spec.node_range[1]:
                    break
            else:
                raise RuntimeError(
                    f"class {spec.class_id}: growth failed to reach "
                    f"{spec.node_range[0]} nodes after 64 attempts"
                )
            g.meta["source"] = f"class{spec.class_id}_g{gi:03d}"
            graphs.append(g)
            labels.append(spec.class_id)
    return graphs, labels
