"""Transportation linear program between two discrete marginals.

Solves ``min sum(C * X)`` subject to ``X 1 = p0``, ``X^T 1 = pd``, ``X >= 0``
with the transportation simplex: northwest-corner start, then pivots on the
spanning-tree basis using Bland's rule so degenerate instances cannot cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

MARGINAL_TOL = 1e-9
CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Optimal coupling ``tilde_lambda`` (``r x t``) and its objective ``sum(C * tilde_lambda)``."""

    tilde_lambda: np.ndarray
    objective: float

    def support(self, tol: float = 0.0):
        return [tuple(ij) for ij in np.argwhere(self.tilde_lambda > tol)]

    def to_dict(self) -> dict:
        return {"tilde_lambda": self.tilde_lambda.tolist(), "objective": self.objective}


def _check_simplex(p, name):
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1 or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be a finite vector")
    if np.any(p < -CLAMP_TOL):
        raise ValueError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > MARGINAL_TOL:
        raise ValueError(f"{name} must sum to 1 (got {p.sum()!r})")
    return np.clip(p, 0.0, None)


def _northwest_corner(a, b):
    r, t = len(a), len(b)
    a, b = a.copy(), b.copy()
    x = np.zeros((r, t))
    basis = []
    i = j = 0
    while True:
        q = max(0.0, min(a[i], b[j]))
        x[i, j] = q
        a[i] -= q
        b[j] -= q
        basis.append((i, j))
        if i == r - 1 and j == t - 1:
            break
        # The staircase path always has r + t - 1 cells and forms a spanning tree.
        if j == t - 1 or (i < r - 1 and a[i] <= b[j]):
            i += 1
        else:
            j += 1
    return x, basis


def _tree_adjacency(basis, r, t):
    adj = [[] for _ in range(r + t)]
    for i, j in basis:
        adj[i].append(r + j)
        adj[r + j].append(i)
    return adj


def _duals(C, adj, r, t):
    u = np.zeros(r)
    v = np.zeros(t)
    seen = [False] * (r + t)
    seen[0] = True
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if seen[nb]:
                continue
            seen[nb] = True
            if node < r:
                v[nb - r] = C[node, nb - r] - u[node]
            else:
                u[nb] = C[nb, node - r] - v[node - r]
            queue.append(nb)
    return u, v


def _tree_path(adj, start, goal):
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def _transport_simplex(C, a, b, max_pivots=None):
    r, t = C.shape
    x, basis = _northwest_corner(a, b)
    in_basis = np.zeros((r, t), dtype=bool)
    for ij in basis:
        in_basis[ij] = True
    eps = 1e-12 * max(1.0, float(np.abs(C).max()))
    if max_pivots is None:
        max_pivots = 50 * (r * t) ** 2 + 100

    for _ in range(max_pivots):
        adj = _tree_adjacency(basis, r, t)
        u, v = _duals(C, adj, r, t)
        reduced = C - u[:, None] - v[None, :]
        candidates = (reduced < -eps) & ~in_basis
        if not candidates.any():
            return x
        # Bland: lowest row-major index enters.
        ei, ej = np.unravel_index(np.argmax(candidates.ravel()), (r, t))

        # Path col ej -> row ei through the tree closes the cycle with (ei, ej).
        nodes = _tree_path(adj, r + ej, ei)
        cells = []
        for k in range(len(nodes) - 1):
            p, q = nodes[k], nodes[k + 1]
            cells.append((q, p - r) if p >= r else (p, q - r))
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(x[c] for c in minus)
        leaving = min((c for c in minus if x[c] <= theta), key=lambda c: c[0] * t + c[1])

        for c in minus:
            x[c] -= theta
        for c in plus:
            x[c] += theta
        x[ei, ej] = theta
        x[leaving] = 0.0
        in_basis[leaving] = False
        in_basis[ei, ej] = True
        basis.remove(leaving)
        basis.append((int(ei), int(ej)))
    raise RuntimeError("transportation simplex exceeded its pivot budget")


def solve_transport(C, p0, pd) -> TransportPlan:
    """Vertex-optimal transport plan between marginals ``p0`` (rows) and ``pd`` (columns).

    Rows or columns with zero mass are removed before pivoting and come back
    as zero rows/columns of the plan.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    p0 = _check_simplex(p0, "p0")
    pd = _check_simplex(pd, "pd")
    if C.shape != (p0.size, pd.size):
        raise ValueError(f"cost matrix must have shape ({p0.size}, {pd.size}), got {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite")

    rows = np.flatnonzero(p0 > 0)
    cols = np.flatnonzero(pd > 0)
    a = p0[rows] / p0[rows].sum()
    b = pd[cols] / pd[cols].sum()
    sub = _transport_simplex(C[np.ix_(rows, cols)], a, b)

    plan = np.zeros(C.shape)
    plan[np.ix_(rows, cols)] = sub
    plan[(plan < 0) & (plan >= -CLAMP_TOL)] = 0.0
    return TransportPlan(tilde_lambda=plan, objective=float(np.sum(C * plan)))


def mixing_weights(plan: TransportPlan, p0) -> np.ndarray:
    """Row-conditional weights ``tilde_lambda[i, j] / p0[i]`` (each row sums to 1)."""
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if p0.shape[0] != plan.tilde_lambda.shape[0]:
        raise ValueError("p0 length does not match the plan's row count")
    if np.any(p0 <= 0):
        raise ValueError("mixing weights are undefined for initial components with zero weight")
    lam = np.clip(plan.tilde_lambda / p0[:, None], 0.0, None)
    return lam / lam.sum(axis=1, keepdims=True)
