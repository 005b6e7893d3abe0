"""Hyperspace of finite subsets under the Hausdorff metric.

The full hyperspace of closed sets is approximated by the bounded-cardinality
finite-subset lattice, which is dense in it; the induced map acts elementwise
with dedup after snapping.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .spaces import CascadeModel, FiniteModel, InvalidParameterError


class HyperBudgetError(RuntimeError):
    """Requested enumeration exceeds the configured budget."""


HyperPoint = tuple  # canonical: sorted tuple of distinct PointIds


def canonical(members) -> HyperPoint:
    out = tuple(sorted(set(int(m) for m in members)))
    if not out:
        raise InvalidParameterError("hyperpoints are nonempty")
    return out


def hausdorff_distance(model: CascadeModel, a, b) -> float:
    """Max of the two directed sup-min distances between finite subsets."""
    a = canonical(a)
    b = canonical(b)
    ia = np.asarray(a, dtype=np.int64)
    ib = np.asarray(b, dtype=np.int64)
    grid_a = np.repeat(ia, len(ib))
    grid_b = np.tile(ib, len(ia))
    d = model.point_dist(grid_a, grid_b).reshape(len(ia), len(ib))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def vietoris_member(model: CascadeModel, a, basis) -> bool:
    """Membership of A in the basic open set <V1..Vk> of metric balls.

    Each ball is a ``(center point id, radius)`` pair; membership needs
    A inside the union and A meeting every ball.
    """
    if not basis:
        raise InvalidParameterError("empty Vietoris basis")
    a = canonical(a)
    ia = np.asarray(a, dtype=np.int64)
    inside = np.zeros(len(a), dtype=bool)
    for center, radius in basis:
        d = model.point_dist(ia, np.full(len(a), center, dtype=np.int64))
        hit = d < radius
        if not hit.any():
            return False
        inside |= hit
    return bool(inside.all())


class HyperCascadeModel(CascadeModel):
    """Enumeration of all subsets of size <= max_cardinality of a base model.

    Satisfies the same raw-image protocol as base models, so envelope and
    property machinery runs on it unchanged.  For finite-exact bases the
    induced map is an exact index table; for sampled bases raw images are
    tuples of base raw images, snapped and deduped on demand.
    """

    kind = "hyper"

    def __init__(self, base: CascadeModel, max_cardinality: int = 3, budget: int = 250_000):
        super().__init__()
        if max_cardinality < 1:
            raise InvalidParameterError("max cardinality must be >= 1")
        n = base.n_points
        total = sum(math.comb(n, j) for j in range(1, max_cardinality + 1))
        if total > budget:
            raise HyperBudgetError(f"{total} hyperpoints exceeds budget {budget}")
        self.base = base
        self.max_cardinality = int(max_cardinality)
        self.name = f"hyper({base.name}, k={max_cardinality})"
        self.params = {"base": base.name, "k": max_cardinality, **base.params}
        self.metric_name = f"hausdorff[{base.metric_name}]"
        self.invertible = base.invertible
        pts = []
        for j in range(1, max_cardinality + 1):
            pts.extend(combinations(range(n), j))
        self.hyperpoints: list[HyperPoint] = pts
        self.index = {p: i for i, p in enumerate(pts)}
        self._singleton = {p[0]: i for i, p in enumerate(pts) if len(p) == 1}
        self._members = [np.asarray(p, dtype=np.int64) for p in pts]
        if isinstance(base, FiniteModel):
            table = [self.index[canonical(base.map_table[m])] for m in self._members]
            self.map_table = np.asarray(table, dtype=np.int64)
            if base.invertible:
                inv = [self.index[canonical(base.inverse_table[m])] for m in self._members]
                self.inverse_table = np.asarray(inv, dtype=np.int64)
            else:
                self.inverse_table = None
        self._res = None

    # -- structure -----------------------------------------------------------

    @property
    def n_points(self):
        return len(self.hyperpoints)

    def singleton_id(self, base_point: int) -> int:
        return self._singleton[base_point]

    def subset_pairs(self):
        """All enumerated (A, B) index pairs with A a proper subset of B."""
        for bi, b in enumerate(self.hyperpoints):
            if len(b) == 1:
                continue
            for j in range(1, len(b)):
                for sub in combinations(b, j):
                    yield self.index[sub], bi

    # -- metric ---------------------------------------------------------------

    def _base_dist_matrix(self):
        if getattr(self, "_bdm", None) is None:
            n = self.base.n_points
            idx = np.arange(n)
            m = np.empty((n, n))
            for i in range(n):
                m[i] = self.base.point_dist(np.full(n, i), idx)
            self._bdm = m
        return self._bdm

    def _padded_members(self):
        # repeat-padding leaves Hausdorff distances unchanged
        if getattr(self, "_padded", None) is None:
            k = self.max_cardinality
            self._padded = np.asarray(
                [list(p) + [p[0]] * (k - len(p)) for p in self.hyperpoints],
                dtype=np.int64,
            )
        return self._padded

    def pairwise_hausdorff(self, a_idx, b_idx) -> np.ndarray:
        """Vectorized Hausdorff distances between two index arrays."""
        bdm = self._base_dist_matrix()
        mem = self._padded_members()
        a = mem[np.atleast_1d(np.asarray(a_idx, dtype=np.int64))]
        b = mem[np.atleast_1d(np.asarray(b_idx, dtype=np.int64))]
        d = bdm[a[:, :, None], b[:, None, :]]
        return np.maximum(d.min(axis=2).max(axis=1), d.min(axis=1).max(axis=1))

    def point_dist(self, a, b):
        a = np.atleast_1d(np.asarray(a))
        b = np.atleast_1d(np.asarray(b))
        if self.base.n_points <= 4096:
            return self.pairwise_hausdorff(a.ravel(), b.ravel()).reshape(a.shape)
        return np.asarray(
            [
                hausdorff_distance(self.base, self.hyperpoints[int(i)], self.hyperpoints[int(j)])
                for i, j in zip(a.ravel(), b.ravel())
            ]
        )

    @property
    def resolution(self):
        if self._res is None:
            self._res = self.base.resolution
        return self._res

    @property
    def diameter(self):
        return self.base.diameter

    # -- dynamics --------------------------------------------------------------

    def _identity_images(self):
        if isinstance(self.base, FiniteModel):
            return np.arange(self.n_points, dtype=np.int64)
        return [tuple(self.base.points[m] for m in p) for p in self.hyperpoints]

    def _advance(self, images, direction):
        if isinstance(self.base, FiniteModel):
            table = self.map_table if direction > 0 else self.inverse_table
            if table is None:
                raise InvalidParameterError("base model is not invertible")
            return table[images]
        out = []
        for members in images:
            arr = np.stack(members)
            nxt = self.base._advance(arr, direction)
            out.append(tuple(nxt[i] for i in range(nxt.shape[0])))
        return out

    def _raw_hausdorff(self, a_members, b_members) -> float:
        a = np.stack(a_members)
        b = np.stack(b_members)
        d = np.empty((a.shape[0], b.shape[0]))
        for i in range(a.shape[0]):
            d[i] = self.base._raw_dist(np.broadcast_to(a[i], b.shape), b)
        return float(max(d.min(axis=1).max(), d.min(axis=0).max()))

    def image_pair_dist(self, a_imgs, b_imgs):
        if isinstance(self.base, FiniteModel):
            a = np.atleast_1d(np.asarray(a_imgs))
            b = np.atleast_1d(np.asarray(b_imgs))
            return self.pairwise_hausdorff(a, b)
        return np.asarray(
            [self._raw_hausdorff(x, y) for x, y in zip(a_imgs, b_imgs)]
        )

    def image_point_dist(self, imgs, point):
        if isinstance(self.base, FiniteModel):
            return self.point_dist(np.asarray(imgs), np.full(len(imgs), point))
        target = [self.base.points[m] for m in self.hyperpoints[point]]
        return np.asarray([self._raw_hausdorff(x, target) for x in imgs])

    def snap_images(self, imgs):
        if isinstance(self.base, FiniteModel):
            return np.asarray(imgs, dtype=np.int64), 0.0
        idx = np.empty(len(imgs), dtype=np.int64)
        err = 0.0
        for i, members in enumerate(imgs):
            arr = np.stack(members)
            snapped, e = self.base.snap_images(arr)
            err = max(err, e)
            idx[i] = self.index[canonical(snapped)]
        return idx, err

    def apply_to_indices(self, imgs, idx):
        if isinstance(self.base, FiniteModel):
            return np.asarray(imgs)[idx]
        return [imgs[i] for i in idx]

    def cluster_key(self, imgs, tau):
        if isinstance(self.base, FiniteModel) and tau < self.resolution:
            return np.asarray(imgs).tobytes()
        return None

    def export_images(self, imgs):
        if isinstance(self.base, FiniteModel):
            return [list(self.hyperpoints[int(i)]) for i in imgs]
        snapped, _ = self.snap_images(imgs)
        return [list(self.hyperpoints[int(i)]) for i in snapped]

    def point_data(self, i):
        return list(self.hyperpoints[i])

    def to_json(self):
        out = {
            "schema": "ellis.hypermodel/1",
            "base": self.base.name,
            "max_cardinality": self.max_cardinality,
            "hyperpoints": [list(p) for p in self.hyperpoints],
        }
        if isinstance(self.base, FiniteModel):
            out["induced_map"] = [int(v) for v in self.map_table]
        return out


def induced_step(hyper: HyperCascadeModel, a) -> HyperPoint:
    """Image of a hyperpoint under the induced map, in canonical form."""
    a = canonical(a)
    base = hyper.base
    if isinstance(base, FiniteModel):
        return canonical(base.map_table[np.asarray(a, dtype=np.int64)])
    raw = base._advance(base.points[np.asarray(a, dtype=np.int64)], 1)
    snapped, _ = base.snap_images(raw)
    return canonical(snapped)


def build_hyper_model(base: CascadeModel, k: int = 3, budget: int = 250_000) -> HyperCascadeModel:
    return HyperCascadeModel(base, k, budget=budget)
