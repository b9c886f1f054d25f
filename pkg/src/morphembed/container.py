"""Versioned binary container for preprocessed graphs.

Layout (little-endian):

    magic   4 bytes  b"MGRF"
    version u16
    count   u32      number of graphs
    per graph:
        node_count u32
        node records: id i64, position 3 x f64, radius f64, compartment u8
        edge_count u32
        edge records: 2 x i64 id pair, lexicographically sorted

A JSON manifest written alongside the container lists per-graph name,
dataset tag, and the preprocessing options, in container order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .skeleton import NeuronGraph, Compartment

MAGIC = b"MGRF"
VERSION = 1

_NODE_DTYPE = np.dtype(
    [("id", "<i8"), ("pos", "<f8", (3,)), ("radius", "<f8"), ("comp", "u1")]
)
_EDGE_DTYPE = np.dtype([("a", "<i8"), ("b", "<i8")])


def write_container(graphs: Sequence[NeuronGraph], path: str | Path) -> None:
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<HI", VERSION, len(graphs))
    for g in graphs:
        nodes = np.empty(g.node_count, dtype=_NODE_DTYPE)
        nodes["id"] = g.ids
        nodes["pos"] = g.positions
        nodes["radius"] = g.radii
        nodes["comp"] = g.compartments
        edges = g.edge_array()
        erec = np.empty(edges.shape[0], dtype=_EDGE_DTYPE)
        erec["a"] = edges[:, 0]
        erec["b"] = edges[:, 1]
        buf += struct.pack("<I", g.node_count)
        buf += nodes.tobytes()
        buf += struct.pack("<I", edges.shape[0])
        buf += erec.tobytes()
    Path(path).write_bytes(bytes(buf))


def read_container(path: str | Path, manifest_path: str | Path | None = None) -> list[NeuronGraph]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise DataError(f"{path}: not a graph container (bad magic)")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported container version {version}")
    offset = 10
    graphs: list[NeuronGraph] = []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, offset)
        offset += 4
        nodes = np.frombuffer(data, dtype=_NODE_DTYPE, count=n, offset=offset)
        offset += n * _NODE_DTYPE.itemsize
        (m,) = struct.unpack_from("<I", data, offset)
        offset += 4
        erec = np.frombuffer(data, dtype=_EDGE_DTYPE, count=m, offset=offset)
        offset += m * _EDGE_DTYPE.itemsize
        edges = {(int(a), int(b)) for a, b in zip(erec["a"], erec["b"])}
        compartments = nodes["comp"].copy()
        soma_rows = np.flatnonzero(compartments == Compartment.SOMA)
        if soma_rows.shape[0] != 1:
            raise DataError(f"{path}: graph without a unique soma node")
        graphs.append(
            NeuronGraph(
                nodes["id"].copy(),
                nodes["pos"].copy(),
                nodes["radius"].copy(),
                compartments,
                edges,
                int(nodes["id"][soma_rows[0]]),
            )
        )
    if manifest_path is not None:
        manifest = read_manifest(manifest_path)
        entries = manifest.get("graphs", [])
        if len(entries) != len(graphs):
            raise DataError(f"{manifest_path}: entry count does not match container")
        for g, entry in zip(graphs, entries):
            g.meta.update({"source": entry.get("name", ""), "dataset": entry.get("dataset", "")})
    return graphs


def write_manifest(path: str | Path, entries: list[dict], options: dict) -> None:
    payload = {"version": VERSION, "options": options, "graphs": entries}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
