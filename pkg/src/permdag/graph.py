"""DAGs under a parent ordering.

Vertices are ``0..p-1``. Every edge points from a larger vertex to a smaller
one, so ``parents[i]`` only holds vertices greater than ``i`` and the graph
is acyclic by construction. The text format is 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike

from .errors import IndexOutOfRange, InputError, InvalidEdge


@dataclass(frozen=True, order=True)
class Dag:
    """Immutable DAG stored as sorted parent tuples.

    Equality, ordering and hashing all use ``parents``, which makes the
    lexicographic tie-break in DAG selection well defined.
    """

    parents: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        p = len(self.parents)
        clean = []
        for i, pa in enumerate(self.parents):
            pa = tuple(sorted(int(j) for j in pa))
            if len(set(pa)) != len(pa):
                raise InputError(f"duplicate parent for vertex {i}")
            if pa and (pa[0] <= i or pa[-1] >= p):
                raise InvalidEdge(f"parents of {i} must lie in ({i}, {p})")
            clean.append(pa)
        object.__setattr__(self, "parents", tuple(clean))

    @classmethod
    def trusted(cls, parents: tuple[tuple[int, ...], ...]) -> "Dag":
        """Build without validation; ``parents`` must already be sorted and valid."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "parents", parents)
        return obj

    @classmethod
    def empty(cls, p: int) -> "Dag":
        return cls(((),) * p)

    @classmethod
    def full(cls, p: int) -> "Dag":
        return cls(tuple(tuple(range(i + 1, p)) for i in range(p)))

    @classmethod
    def from_mapping(cls, p: int, parents: dict[int, Iterable[int]]) -> "Dag":
        return cls(tuple(tuple(parents.get(i, ())) for i in range(p)))

    @property
    def p(self) -> int:
        return len(self.parents)

    @property
    def n_edges(self) -> int:
        return sum(len(pa) for pa in self.parents)

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(parent, child)`` pairs."""
        return [(j, i) for i, pa in enumerate(self.parents) for j in pa]

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``M[j, i]`` set when ``j`` is a parent of ``i``."""
        M = np.zeros((self.p, self.p), dtype=bool)
        for j, i in self.edges():
            M[j, i] = True
        return M

    def _check(self, i: int) -> None:
        if not 0 <= i < self.p:
            raise IndexOutOfRange(f"vertex {i} out of range for p={self.p}")


def nu(dag: Dag, i: int) -> int:
    """Number of parents of vertex ``i``."""
    dag._check(i)
    return len(dag.parents[i])


def children(dag: Dag, i: int) -> frozenset[int]:
    dag._check(i)
    return frozenset(j for j in range(i) if i in dag.parents[j])


def from_cholesky_support(L: ArrayLike, tau: float = 0.0) -> Dag:
    """DAG whose edges are the strictly-lower entries with ``|L[i, j]| > tau``."""
    L = np.asarray(L, dtype=float)
    mask = np.tril(np.abs(L) > tau, -1)
    return Dag(tuple(tuple(np.flatnonzero(mask[:, j]).tolist()) for j in range(L.shape[0])))


def toggle_edge(dag: Dag, i: int, j: int) -> Dag:
    """Add or remove the edge ``i -> j`` (requires ``i > j``)."""
    if i <= j:
        raise InvalidEdge(f"edge {i} -> {j} violates the parent ordering")
    dag._check(i)
    pa = set(dag.parents[j])
    pa ^= {i}
    parents = list(dag.parents)
    parents[j] = tuple(sorted(pa))
    return Dag(tuple(parents))


def format_dag(dag: Dag) -> str:
    lines = [str(dag.p)]
    for i, pa in enumerate(dag.parents):
        lines.append(f"{i + 1}: " + " ".join(str(j + 1) for j in pa))
    return "\n".join(line.rstrip() for line in lines) + "\n"


def parse_dag(text: str) -> Dag:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        p = int(lines[0])
        parents: dict[int, list[int]] = {}
        for ln in lines[1:]:
            head, _, rest = ln.partition(":")
            parents[int(head) - 1] = [int(tok) - 1 for tok in rest.split()]
    except (IndexError, ValueError) as exc:
        raise InputError(f"malformed DAG text: {exc}") from None
    if len(parents) != p or set(parents) != set(range(p)):
        raise InputError(f"DAG text must list every vertex 1..{p} once")
    return Dag.from_mapping(p, parents)
