"""Set partitions of the conditioning indices and hitting scenarios.

Partitions are kept in standardized form: blocks ordered by their minima,
equivalently encoded by a restricted-growth string (RGS) ``a`` with
``a[0] = 0`` and ``a[i] <= 1 + max(a[:i])``.  Enumeration follows the
lexicographic order of RGS, so for k = 3 the order is::

    000 {0,1,2}   001 {0,1}{2}   010 {0,2}{1}   011 {0}{1,2}   012 {0}{1}{2}
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from maxcond.errors import CapacityError, TieDetected

MAX_K = 12


@dataclass(frozen=True)
class Partition:
    rgs: tuple[int, ...]

    def __post_init__(self):
        r = self.rgs
        if not r or r[0] != 0:
            raise ValueError(f"not a restricted-growth string: {r}")
        top = 0
        for v in r[1:]:
            if v < 0 or v > top + 1:
                raise ValueError(f"not a restricted-growth string: {r}")
            top = max(top, v)

    @property
    def k(self) -> int:
        return len(self.rgs)

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(max(self.rgs) + 1)]
        for i, b in enumerate(self.rgs):
            out[b].append(i)
        return tuple(tuple(b) for b in out)

    def __len__(self) -> int:
        return max(self.rgs) + 1

    def to_string(self) -> str:
        return " ".join(str(v) for v in self.rgs)

    @classmethod
    def from_string(cls, s: str) -> "Partition":
        return cls(tuple(int(v) for v in s.split()))

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]]) -> "Partition":
        k = sum(len(b) for b in blocks)
        labels = [-1] * k
        for j, b in enumerate(blocks):
            for i in b:
                labels[i] = j
        if -1 in labels:
            raise ValueError("blocks do not cover 0..k-1")
        return partition_from_assignment(labels)

    def __str__(self) -> str:
        return "".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)


def bell_number(k: int) -> int:
    """Bell numbers through the Bell triangle."""
    row = [1]
    for _ in range(k - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1] if k >= 1 else 1


@lru_cache(maxsize=None)
def _enumerate(k: int) -> tuple[Partition, ...]:
    out = []
    a = [0] * k
    mx = [0] * k  # mx[i] = max(a[:i+1])
    while True:
        out.append(Partition(tuple(a)))
        i = k - 1
        while i > 0 and a[i] == mx[i - 1] + 1:
            i -= 1
        if i == 0:
            break
        a[i] += 1
        mx[i] = max(mx[i - 1], a[i])
        for j in range(i + 1, k):
            a[j] = 0
            mx[j] = mx[i]
    return tuple(out)


def enumerate_partitions(k: int) -> list[Partition]:
    if k < 1:
        raise ValueError("k must be positive")
    if k > MAX_K:
        raise CapacityError(f"k = {k} exceeds the partition capacity {MAX_K} "
                            f"(Bell({k}) = {bell_number(k)})")
    return list(_enumerate(k))


def partition_from_assignment(labels) -> Partition:
    labels = list(labels)
    if not labels:
        raise ValueError("empty assignment")
    seen: dict = {}
    rgs = []
    for v in labels:
        if v not in seen:
            seen[v] = len(seen)
        rgs.append(seen[v])
    return Partition(tuple(rgs))


@dataclass(frozen=True)
class HittingScenario:
    partition: Partition
    extremal_atoms: tuple  # AtomFunction per block

    def __post_init__(self):
        if len(self.extremal_atoms) != len(self.partition):
            raise ValueError("one extremal atom per block required")


def scenario_from_realization(real, K, tie_tol: float = 0.0) -> HittingScenario:
    """Hitting scenario of a point-measure realization on the sites ``K``.

    ``K`` is a SiteVector or a sequence of grid ids.  A tie (another atom within
    ``tie_tol`` relative distance of the maximum) raises TieDetected.
    """
    from maxcond.grid import SiteVector

    ids = K.ids if isinstance(K, SiteVector) else np.atleast_1d(np.asarray(K, dtype=int))
    atoms = list(real.atoms)
    if not atoms:
        raise ValueError("empty realization")
    M = np.array([a.values[ids] for a in atoms])
    top = M.max(axis=0)
    if np.any(top <= 0):
        raise ValueError("realization vanishes at a conditioning site")
    winners = M.argmax(axis=0)
    for c in range(ids.size):
        tied = np.flatnonzero(M[:, c] >= top[c] * (1.0 - tie_tol))
        if tied.size > 1:
            raise TieDetected(int(ids[c]), tuple(int(i) for i in tied))
    part = partition_from_assignment(winners.tolist())
    first = {}
    for c, w in enumerate(winners):
        first.setdefault(int(w), c)
    order = sorted(first, key=first.get)
    return HittingScenario(part, tuple(atoms[w] for w in order))
