"""Clustered observations, discretization and cell-probability estimation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .latent_space import AlternativeSet, OutcomeGrid


class DegenerateGrid(ValueError):
    """Raised when quantile discretization produces duplicate midpoints."""


class EmptyArm(ValueError):
    """Raised when an assignment arm has no observations."""


@dataclass(frozen=True)
class Observation:
    y_raw: float
    d: str
    z: int

    def __post_init__(self):
        if self.z not in (0, 1):
            raise ValueError(f"z must be 0 or 1, got {self.z}")


@dataclass(frozen=True)
class ClusteredSample:
    """Observations grouped by sampled cluster (e.g. one preschool each)."""

    clusters: tuple[tuple[Observation, ...], ...]

    def __post_init__(self):
        cl = tuple(tuple(c) for c in self.clusters)
        object.__setattr__(self, "clusters", cl)
        if len(cl) < 1:
            raise ValueError("need at least one cluster")
        zs = {o.z for c in cl for o in c}
        if zs != {0, 1}:
            raise ValueError("sample must contain both assignment arms")

    @property
    def g(self) -> int:
        return len(self.clusters)

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.clusters)

    def observations(self) -> list[Observation]:
        return [o for c in self.clusters for o in c]


@dataclass(frozen=True)
class DiscretizationMap:
    """Quantile cut values and the midpoints they induce."""

    cut_values: tuple[float, ...]
    midpoints: tuple[float, ...]

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cut_values)
        mids = tuple(float(m) for m in self.midpoints)
        object.__setattr__(self, "cut_values", cuts)
        object.__setattr__(self, "midpoints", mids)
        if any(b < a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cut values must be nondecreasing")
        if any(b <= a for a, b in zip(mids, mids[1:])):
            raise DegenerateGrid(
                "duplicate discretization midpoints; the data cannot support "
                f"{len(mids)} distinct outcome bins")

    @property
    def m(self) -> int:
        return len(self.midpoints)

    def grid(self) -> OutcomeGrid:
        return OutcomeGrid(self.midpoints)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Conditional cell probabilities P(y, d | z) on a fixed grid."""

    alts: AlternativeSet
    grid: OutcomeGrid
    cells: np.ndarray = field(repr=False)  # shape (2, n_alts, m)
    counts: tuple[int, int] = (0, 0)

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=float)
        object.__setattr__(self, "cells", c)
        if c.shape != (2, self.alts.n, self.grid.m):
            raise ValueError(f"cells must have shape (2, {self.alts.n}, "
                             f"{self.grid.m}), got {c.shape}")
        if (c < 0).any():
            raise ValueError("cell probabilities must be nonnegative")
        sums = c.sum(axis=(1, 2))
        if not np.allclose(sums, 1.0, atol=1e-12, rtol=0):
            raise ValueError(f"per-arm cell probabilities must sum to 1, "
                             f"got {sums}")

    def prob(self, z: int, d: str, y_index: int) -> float:
        return float(self.cells[z, self.alts.index(d), y_index])

    def choice_prob(self, d: str, z: int) -> float:
        return float(self.cells[z, self.alts.index(d), :].sum())

    def arm_mean(self, z: int) -> float:
        grid = np.asarray(self.grid.points)
        return float((self.cells[z].sum(axis=0) * grid).sum())

    def cell_vector(self) -> np.ndarray:
        """Cells flattened in (z, d, y) lexicographic order."""
        return self.cells.reshape(-1).copy()

    def to_json_dict(self) -> dict:
        out = {}
        for z in (0, 1):
            for k, d in enumerate(self.alts.alternatives):
                for j, y in enumerate(self.grid.points):
                    out[f"z={z},d={d},y={y:g}"] = self.cells[z, k, j]
        return out


@dataclass(frozen=True)
class IttIvResult:
    itt_d: float
    itt_y: float
    iv: float | None


def fit_discretizer(raw: Sequence[float], m: int) -> DiscretizationMap:
    """Fit quantile cut values and midpoints for an m-bin discretization.

    Quantile convention: the p-percent quantile is the smallest sample value
    v with fraction(samples <= v) >= p/100, and the 0-percent quantile is the
    sample minimum.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    vals = np.sort(np.asarray(list(raw), dtype=float))
    if vals.size == 0:
        raise ValueError("raw data must be non-empty")
    n = vals.size
    cuts = [float(vals[0])]
    for k in range(1, m + 1):
        p = k / m
        j = int(np.searchsorted(np.arange(1, n + 1) / n, p, side="left"))
        cuts.append(float(vals[min(j, n - 1)]))
    mids = [(cuts[k] + cuts[k - 1]) / 2.0 for k in range(1, m + 1)]
    return DiscretizationMap(tuple(cuts), tuple(mids))


def apply_discretizer(dmap: DiscretizationMap, y_raw: float) -> float:
    """Map a raw outcome to the midpoint of its half-open bin.

    Bins are [cut_{m-1}, cut_m) with the top bin closed; out-of-sample values
    clamp to the first or last bin.
    """
    cuts = dmap.cut_values
    m = dmap.m
    if y_raw >= cuts[m]:
        return dmap.midpoints[m - 1]
    if y_raw < cuts[0]:
        return dmap.midpoints[0]
    for k in range(1, m + 1):
        if y_raw < cuts[k]:
            return dmap.midpoints[k - 1]
    return dmap.midpoints[m - 1]


def estimate(sample: ClusteredSample, alts: AlternativeSet, grid: OutcomeGrid,
             discretizer: DiscretizationMap | None = None) -> EmpiricalDistribution:
    """Pooled conditional cell frequencies P-hat(y, d | z).

    Raw outcomes must already lie on the grid unless a discretizer is given.
    """
    points = np.asarray(grid.points)
    cells = np.zeros((2, alts.n, grid.m))
    counts = [0, 0]
    for obs in sample.observations():
        y = apply_discretizer(discretizer, obs.y_raw) if discretizer else obs.y_raw
        j = int(np.argmin(np.abs(points - y)))
        if not math.isclose(points[j], y, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"outcome {obs.y_raw} is not on the grid and no "
                             "discretizer was supplied")
        cells[obs.z, alts.index(obs.d), j] += 1.0
        counts[obs.z] += 1
    for z in (0, 1):
        if counts[z] == 0:
            raise EmptyArm(f"no observations with z={z}")
        cells[z] /= counts[z]
    return EmpiricalDistribution(alts=alts, grid=grid, cells=cells,
                                 counts=(counts[0], counts[1]))


def cluster_resample(sample: ClusteredSample, seed) -> ClusteredSample:
    """Draw G clusters i.i.d. with replacement; deterministic given seed."""
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, sample.g, size=sample.g)
    return ClusteredSample(tuple(sample.clusters[int(i)] for i in picks))


def itt_iv(emp: EmpiricalDistribution, target: str) -> IttIvResult:
    """Intention-to-treat contrasts and their ratio for a target alternative."""
    itt_d = emp.choice_prob(target, 1) - emp.choice_prob(target, 0)
    itt_y = emp.arm_mean(1) - emp.arm_mean(0)
    iv = itt_y / itt_d if itt_d != 0.0 else None
    return IttIvResult(itt_d=itt_d, itt_y=itt_y, iv=iv)


def load_csv(path) -> ClusteredSample:
    """Read observations from CSV with header cluster_id,y,d,z.

    Clusters are formed by cluster_id in first-appearance order.
    """
    order: list[str] = []
    groups: dict[str, list[Observation]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"cluster_id", "y", "d", "z"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: CSV header must contain "
                             "cluster_id,y,d,z")
        for lineno, row in enumerate(reader, start=2):
            try:
                obs = Observation(y_raw=float(row["y"]), d=row["d"],
                                  z=int(row["z"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad row {row}: {exc}") from exc
            cid = row["cluster_id"]
            if cid not in groups:
                order.append(cid)
                groups[cid] = []
            groups[cid].append(obs)
    if not order:
        raise ValueError(f"{path}: no observations")
    return ClusteredSample(tuple(tuple(groups[c]) for c in order))


def write_csv(path, sample: ClusteredSample) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster_id", "y", "d", "z"])
        for g, cluster in enumerate(sample.clusters):
            for obs in cluster:
                writer.writerow([g, repr(obs.y_raw), obs.d, obs.z])
