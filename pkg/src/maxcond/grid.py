"""Sites, site vectors and observation sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Site:
    id: int
    coords: tuple[float, ...]


@dataclass(frozen=True)
class SiteVector:
    sites: tuple[Site, ...]

    def __post_init__(self):
        if not self.sites:
            raise ValueError("SiteVector must be nonempty")
        seen = set()
        for s in self.sites:
            if s.coords in seen:
                raise ValueError(f"duplicate site coordinates {s.coords}")
            seen.add(s.coords)

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return SiteVector(self.sites[i])
        return self.sites[i]

    @property
    def ids(self) -> np.ndarray:
        return np.array([s.id for s in self.sites], dtype=int)

    @property
    def coords(self) -> np.ndarray:
        return np.array([s.coords for s in self.sites], dtype=float)

    @property
    def dim(self) -> int:
        return len(self.sites[0].coords)

    def subset(self, ids: Iterable[int]) -> "SiteVector":
        by_id = {s.id: s for s in self.sites}
        return SiteVector(tuple(by_id[int(i)] for i in ids))

    def find(self, coords: Sequence[float], atol: float = 1e-9) -> Site:
        c = np.atleast_1d(np.asarray(coords, dtype=float))
        d = np.abs(self.coords - c).max(axis=1)
        i = int(np.argmin(d))
        if d[i] > atol:
            raise KeyError(f"no grid site at {tuple(c)}")
        return self.sites[i]


def make_grid(coords) -> SiteVector:
    """Grid with ids ``0..m-1`` from a list of scalars (1-d) or pairs (2-d)."""
    arr = np.asarray(coords, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] not in (1, 2):
        raise ValueError("grid coordinates must be scalars or pairs")
    return SiteVector(tuple(Site(i, tuple(float(v) for v in row)) for i, row in enumerate(arr)))


def site_ids(grid: SiteVector, s) -> np.ndarray:
    """Normalize a SiteVector, Site, int or int sequence to an array of grid ids."""
    if isinstance(s, SiteVector):
        ids = s.ids
    elif isinstance(s, Site):
        ids = np.array([s.id])
    else:
        ids = np.atleast_1d(np.asarray(s, dtype=int))
    if ids.size and (ids.min() < 0 or ids.max() >= len(grid)):
        raise IndexError(f"site ids {ids.tolist()} outside grid of size {len(grid)}")
    return ids


@dataclass(frozen=True)
class ObservationSet:
    t: SiteVector
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "y", y)
        if y.size != len(self.t):
            raise ValueError(f"{y.size} values for {len(self.t)} sites")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise ValueError("observed values must be finite and strictly positive")
        if len(set(self.t.ids.tolist())) != len(self.t):
            raise ValueError("conditioning sites must be distinct")

    @classmethod
    def on(cls, grid: SiteVector, ids: Sequence[int], y: Sequence[float]) -> "ObservationSet":
        return cls(grid.subset(ids), np.asarray(y, dtype=float))

    @property
    def k(self) -> int:
        return len(self.t)

    @property
    def ids(self) -> np.ndarray:
        return self.t.ids

    def permuted(self, perm: Sequence[int]) -> "ObservationSet":
        perm = list(perm)
        return ObservationSet(SiteVector(tuple(self.t.sites[i] for i in perm)), self.y[perm])
