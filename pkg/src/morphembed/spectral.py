"""Dense graph spectral algebra: adjacency, normalized Laplacian, symmetric
eigendecomposition, and Laplacian positional encodings.

The eigensolver is a Householder tridiagonalization followed by implicit
shift QL with eigenvector accumulation, compiled with numba. Graphs here
are small (at most ~1000 nodes, ~100-200 in training views), so dense
O(n^3) is the right tool.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import NumericError
from .skeleton import NeuronGraph

#: iteration cap per eigenvalue for the QL sweep
QL_ITER_CAP = 60


def adjacency(g: NeuronGraph) -> np.ndarray:
    """Dense symmetric 0/1 adjacency; index i is the i-th smallest node id."""
    n = g.node_count
    a = np.zeros((n, n), dtype=np.float64)
    edges = g.edge_array()
    if edges.shape[0]:
        ia = np.searchsorted(g.ids, edges[:, 0])
        ib = np.searchsorted(g.ids, edges[:, 1])
        a[ia, ib] = 1.0
        a[ib, ia] = 1.0
    return a


def normalized_laplacian(a: np.ndarray) -> np.ndarray:
    """L = I - D^{-1/2} A D^{-1/2}.

    Rows/columns of isolated nodes (degree 0) are left entirely zero,
    including the diagonal, to keep L finite.
    """
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = -(inv_sqrt[:, None] * a * inv_sqrt[None, :])
    di = np.arange(a.shape[0])
    lap[di, di] = np.where(nz, 1.0, 0.0)
    return lap


@njit(cache=True)
def _tred2(a, d, e):  # pragma: no cover - exercised via eig_sym
    # Householder reduction of symmetric a to tridiagonal form; a is
    # overwritten with the accumulated orthogonal transform, d gets the
    # diagonal and e the off-diagonal (e[0] unused).
    n = a.shape[0]
    for i in range(n - 1, 0, -1):
        l = i - 1
        h = 0.0
        if l > 0:
            scale = 0.0
            for k in range(l + 1):
                scale += abs(a[i, k])
            if scale == 0.0:
                e[i] = a[i, l]
                d[i] = 0.0
            else:
                for k in range(l + 1):
                    a[i, k] /= scale
                    h += a[i, k] * a[i, k]
                f = a[i, l]
                g = -np.sqrt(h) if f >= 0.0 else np.sqrt(h)
                e[i] = scale * g
                h -= f * g
                a[i, l] = f - g
                f = 0.0
                for j in range(l + 1):
                    a[j, i] = a[i, j] / h
                    g = 0.0
                    for k in range(j + 1):
                        g += a[j, k] * a[i, k]
                    for k in range(j + 1, l + 1):
                        g += a[k, j] * a[i, k]
                    e[j] = g / h
                    f += e[j] * a[i, j]
                hh = f / (h + h)
                for j in range(l + 1):
                    f = a[i, j]
                    g = e[j] - hh * f
                    e[j] = g
                    for k in range(j + 1):
                        a[j, k] -= f * e[k] + g * a[i, k]
                d[i] = h
        else:
            e[i] = a[i, l]
            d[i] = 0.0
    d[0] = 0.0
    e[0] = 0.0
    for i in range(n):
        l = i
        if d[i] != 0.0:
            for j in range(l):
                g = 0.0
                for k in range(l):
                    g += a[i, k] * a[k, j]
                for k in range(l):
                    a[k, j] -= g * a[k, i]
        d[i] = a[i, i]
        a[i, i] = 1.0
        for j in range(l):
            a[j, i] = 0.0
            a[i, j] = 0.0


@njit(cache=True)
def _tql2(d, e, z, iter_cap):  # pragma: no cover - exercised via eig_sym
    # Implicit-shift QL on the tridiagonal (d, e), rotating the transform
    # accumulated in z into the eigenvector matrix. Eigenvalues are sorted
    # ascending on exit. Returns 0 on success, 1 + failing index otherwise.
    n = d.shape[0]
    eps = np.finfo(np.float64).eps
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it >= iter_cap:
                return l + 1
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            sg = r if g >= 0.0 else -r
            g = d[m] - d[l] + e[l] / (g + sg)
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = z[k, i + 1]
                    z[k, i + 1] = s * z[k, i] + c * f
                    z[k, i] = c * z[k, i] - s * f
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    # selection sort ascending, carrying eigenvector columns along
    for i in range(n - 1):
        kmin = i
        for j in range(i + 1, n):
            if d[j] < d[kmin]:
                kmin = j
        if kmin != i:
            tmp = d[i]
            d[i] = d[kmin]
            d[kmin] = tmp
            for k in range(n):
                t2 = z[k, i]
                z[k, i] = z[k, kmin]
                z[k, kmin] = t2
    return 0


def eig_sym(m: np.ndarray, iter_cap: int = QL_ITER_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix.

    Returns ``(w, u)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvectors in the columns of ``u`` such that ``m @ u[:, i] ==
    w[i] * u[:, i]``.

    Raises ``ValueError`` if ``m`` is not symmetric to 1e-9 and
    ``NumericError`` if the QL sweep does not converge within ``iter_cap``
    iterations per eigenvalue.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        raise ValueError("empty matrix")
    if np.max(np.abs(m - m.T)) > 1e-9:
        raise ValueError("matrix is not symmetric to 1e-9")
    u = m.copy()
    n = m.shape[0]
    d = np.empty(n, dtype=np.float64)
    e = np.empty(n, dtype=np.float64)
    _tred2(u, d, e)
    bad = _tql2(d, e, u, iter_cap)
    if bad:
        raise NumericError(
            f"eigensolver did not converge for eigenvalue index {bad - 1} "
            f"within {iter_cap} iterations"
        )
    return d, u


def fix_eigenvector_signs(u: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: per column, make the entry of largest
    magnitude positive (first such entry on exact ties).

    The rule depends only on entry values, so relabeling the graph's nodes
    permutes the rows of the result without flipping any column.
    """
    out = u.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            out[:, j] = -col
    return out


def positional_encoding(
    g: NeuronGraph,
    k: int,
    rng: np.random.Generator | None = None,
    pe_order: str = "largest",
) -> np.ndarray:
    """Laplacian eigenvector positional encoding, one row per node.

    Takes the ``k`` eigenvectors of the normalized Laplacian selected by
    ``pe_order``: ``"largest"`` picks the eigenvectors of largest
    eigenvalue (descending); ``"smallest_nontrivial"`` picks ascending
    eigenvectors skipping the trivial constant one. Missing columns (when
    the graph has fewer nodes than ``k``) are zero-padded.

    With ``rng`` given, each selected column's global sign is flipped with
    probability 1/2 (training-time sign augmentation). Without ``rng`` the
    deterministic sign convention of ``fix_eigenvector_signs`` applies, so
    the encoding is a pure function of the graph.
    """
    if k < 1:
        raise ValueError(f"encoding width must be >= 1, got {k}")
    if pe_order not in ("largest", "smallest_nontrivial"):
        raise ValueError(f"unknown pe_order {pe_order!r}")
    n = g.node_count
    w, u = eig_sym(normalized_laplacian(adjacency(g)))
    if pe_order == "largest":
        cols = np.arange(n - 1, max(n - 1 - k, -1), -1)
    else:
        cols = np.arange(1, min(1 + k, n))
    sel = u[:, cols]
    if rng is None:
        sel = fix_eigenvector_signs(sel)
    else:
        flips = rng.integers(0, 2, size=k)[: sel.shape[1]]
        sel = sel * np.where(flips, -1.0, 1.0)[None, :]
    out = np.zeros((n, k), dtype=np.float64)
    out[:, : sel.shape[1]] = sel
    return out
