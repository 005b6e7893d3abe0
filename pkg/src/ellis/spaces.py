"""Phase-space models and the example catalog.

A model is a compact metric space sampled (or realized exactly) at finitely
many points, together with a self-map.  Three carrier flavors exist:

* finite-exact: the map is a total index table, all arithmetic is exact;
* sampled: points carry coordinates, the map is a coordinate evaluator and
  images are snapped to the nearest sample point (snap error reported);
* window: points are bi-infinite binary sequences with finite support, the
  map is the shift, evaluated exactly (never snapped mid-orbit).

Iterates of sampled models are computed by composing the raw evaluator and
snapping once at the end, so discretization error does not compound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * math.pi

PointId = int


class UnknownExampleError(KeyError):
    """Requested catalog name does not exist."""


class InvalidParameterError(ValueError):
    """Catalog parameters outside their documented range."""


class NegativePowerError(ValueError):
    """Negative iterate requested on a non-invertible model."""


def _minarc(a, b):
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % TWO_PI
    return np.minimum(d, TWO_PI - d)


def _circ2(a, b):
    # arc distance on a circle of circumference 2 parametrized by [-1, 1]
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return np.minimum(d, 2.0 - d)


# ---------------------------------------------------------------------------
# model classes
# ---------------------------------------------------------------------------


class CascadeModel:
    """Shared interface for all carriers.

    Subclasses provide the raw-image protocol used by the envelope and
    property modules: ``iterate_images(n)`` returns an opaque image object
    (one raw image per sample point), and the ``image_*`` methods interpret
    it.  Models are immutable after construction; the iterate cache only
    memoizes pure results.
    """

    name: str = "anonymous"
    params: dict = {}
    kind: str = "finite-exact"
    invertible: bool = False
    metric_name: str = "euclidean"

    def __init__(self):
        self._iter_cache: dict[int, object] = {}

    # -- metric ------------------------------------------------------------

    @property
    def n_points(self) -> int:
        raise NotImplementedError

    def point_dist(self, a, b):
        """Vectorized metric between sample-point index arrays."""
        raise NotImplementedError

    def metric(self, a: PointId, b: PointId) -> float:
        if not (0 <= a < self.n_points and 0 <= b < self.n_points):
            raise IndexError(f"point id out of range: {a}, {b}")
        return float(self.point_dist(np.asarray([a]), np.asarray([b]))[0])

    @property
    def resolution(self) -> float:
        """Smallest positive pairwise distance (sample scale)."""
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    # -- dynamics (raw-image protocol) --------------------------------------

    def iterate_images(self, n: int):
        if n < 0 and not self.invertible:
            raise NegativePowerError(f"negative power {n} on non-invertible model")
        if n not in self._iter_cache:
            base = 0
            for m in self._iter_cache:
                if (m <= n and base <= m) if n >= 0 else (n <= m <= base):
                    base = m
            img = self._iter_cache.get(base, self._identity_images())
            step = 1 if n >= base else -1
            for _ in range(abs(n - base)):
                img = self._advance(img, step)
            self._iter_cache.setdefault(0, self._identity_images())
            self._iter_cache[n] = img
        return self._iter_cache[n]

    def _identity_images(self):
        raise NotImplementedError

    def _advance(self, images, direction: int):
        raise NotImplementedError

    def image_pair_dist(self, a_imgs, b_imgs) -> np.ndarray:
        """Per-sample-point distances between two image objects."""
        raise NotImplementedError

    def image_sup_dist(self, a_imgs, b_imgs) -> float:
        return float(np.max(self.image_pair_dist(a_imgs, b_imgs)))

    def image_point_dist(self, imgs, point: PointId) -> np.ndarray:
        """Distance from every image entry to one fixed sample point."""
        raise NotImplementedError

    def snap_images(self, imgs) -> tuple[np.ndarray, float]:
        """Nearest sample index per image entry, plus max snap error."""
        raise NotImplementedError

    def apply_to_indices(self, imgs, idx: np.ndarray):
        """Restrict an image object to a subset/reordering of sample points."""
        raise NotImplementedError

    def cluster_key(self, imgs, tau: float):
        """Optional hashable that refines sup-distance ``tau`` clustering.

        ``None`` means callers must fall back to pairwise distances.
        """
        return None

    def export_images(self, imgs) -> list:
        raise NotImplementedError

    # -- serialization -------------------------------------------------------

    def point_data(self, i: PointId):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class FiniteModel(CascadeModel):
    """Finite-exact carrier: the map is an index table."""

    kind = "finite-exact"

    def __init__(self, name, params, coords, dist_fn, map_table,
                 inverse_table=None, metric_name="euclidean",
                 point_labels=None):
        super().__init__()
        self.name = name
        self.params = dict(params)
        self.coords = coords
        self._dist_fn = dist_fn
        self.map_table = np.asarray(map_table, dtype=np.int64)
        if self.map_table.min() < 0 or self.map_table.max() >= len(self.map_table):
            raise InvalidParameterError("map table image out of range")
        self.inverse_table = (
            None if inverse_table is None else np.asarray(inverse_table, dtype=np.int64)
        )
        self.invertible = self.inverse_table is not None
        self.metric_name = metric_name
        self._labels = point_labels
        self._res = None
        self._diam = None

    @property
    def n_points(self):
        return int(len(self.map_table))

    def point_dist(self, a, b):
        return self._dist_fn(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))

    def _scan_scale(self):
        n = self.n_points
        idx = np.arange(n)
        res, diam = math.inf, 0.0
        for i in range(n):
            d = self.point_dist(np.full(n, i), idx)
            pos = d[d > 0]
            if pos.size:
                res = min(res, float(pos.min()))
            diam = max(diam, float(d.max()))
        self._res = res if res < math.inf else 1.0
        self._diam = diam

    @property
    def resolution(self):
        if self._res is None:
            self._scan_scale()
        return self._res

    @property
    def diameter(self):
        if self._diam is None:
            self._scan_scale()
        return self._diam

    def _identity_images(self):
        return np.arange(self.n_points, dtype=np.int64)

    def _advance(self, images, direction):
        table = self.map_table if direction > 0 else self.inverse_table
        if table is None:
            raise NegativePowerError("model has no inverse table")
        return table[images]

    def image_pair_dist(self, a_imgs, b_imgs):
        return self.point_dist(a_imgs, b_imgs)

    def image_point_dist(self, imgs, point):
        return self.point_dist(imgs, np.full(len(imgs), point, dtype=np.int64))

    def snap_images(self, imgs):
        return np.asarray(imgs, dtype=np.int64), 0.0

    def apply_to_indices(self, imgs, idx):
        return np.asarray(imgs)[idx]

    def cluster_key(self, imgs, tau):
        if tau < self.resolution:
            return imgs.tobytes()
        return None

    def export_images(self, imgs):
        return [int(v) for v in imgs]

    def point_data(self, i):
        if self._labels is not None:
            return self._labels[i]
        if self.coords is None:
            return i
        c = self.coords[i]
        return [float(v) for v in np.atleast_1d(c)]

    def to_json(self):
        return {
            "schema": "ellis.model/1",
            "name": self.name,
            "params": self.params,
            "kind": self.kind,
            "metric": self.metric_name,
            "invertible": self.invertible,
            "points": [self.point_data(i) for i in range(self.n_points)],
            "map": [int(v) for v in self.map_table],
        }


class SampledModel(CascadeModel):
    """Sampled carrier: coordinates plus a raw coordinate evaluator."""

    kind = "sampled"

    def __init__(self, name, params, points, step_raw, inverse_raw,
                 raw_dist, snap_raw, epsilon, metric_name, point_fmt=None):
        super().__init__()
        self.name = name
        self.params = dict(params)
        self.points = np.asarray(points, dtype=float)
        self._step_raw = step_raw
        self._inverse_raw = inverse_raw
        self._raw_dist = raw_dist
        self._snap_raw = snap_raw
        self.epsilon = float(epsilon)
        self.invertible = inverse_raw is not None
        self.metric_name = metric_name
        self._point_fmt = point_fmt
        self._diam = None

    @property
    def n_points(self):
        return int(self.points.shape[0])

    def point_dist(self, a, b):
        return self._raw_dist(self.points[np.asarray(a)], self.points[np.asarray(b)])

    @property
    def resolution(self):
        return self.epsilon

    @property
    def diameter(self):
        if self._diam is None:
            d = 0.0
            for i in range(0, self.n_points, max(1, self.n_points // 32)):
                row = self._raw_dist(
                    np.broadcast_to(self.points[i], self.points.shape), self.points
                )
                d = max(d, float(row.max()))
            self._diam = d
        return self._diam

    def _identity_images(self):
        return self.points.copy()

    def _advance(self, images, direction):
        if direction > 0:
            return self._step_raw(images)
        if self._inverse_raw is None:
            raise NegativePowerError("model has no exact inverse evaluator")
        return self._inverse_raw(images)

    def image_pair_dist(self, a_imgs, b_imgs):
        return self._raw_dist(a_imgs, b_imgs)

    def image_point_dist(self, imgs, point):
        tgt = np.broadcast_to(self.points[point], np.asarray(imgs).shape)
        return self._raw_dist(imgs, tgt)

    def snap_images(self, imgs):
        idx = self._snap_raw(imgs)
        err = self._raw_dist(imgs, self.points[idx])
        return idx, float(np.max(err)) if len(err) else 0.0

    def apply_to_indices(self, imgs, idx):
        return np.asarray(imgs)[idx]

    def export_images(self, imgs):
        return [[float(v) for v in np.atleast_1d(row)] for row in np.asarray(imgs)]

    def point_data(self, i):
        if self._point_fmt is not None:
            return self._point_fmt(self.points[i])
        return [float(v) for v in np.atleast_1d(self.points[i])]

    def to_json(self):
        return {
            "schema": "ellis.model/1",
            "name": self.name,
            "params": self.params,
            "kind": self.kind,
            "metric": self.metric_name,
            "invertible": self.invertible,
            "epsilon": self.epsilon,
            "points": [self.point_data(i) for i in range(self.n_points)],
            "map": [self.point_data_raw(self._step_raw(self.points[i : i + 1])[0])
                    for i in range(self.n_points)],
        }

    def point_data_raw(self, raw):
        return [float(v) for v in np.atleast_1d(raw)]

    # convenience used by the spaces-level step() operation
    def step_snapped(self, i: PointId):
        raw = self._step_raw(self.points[i : i + 1])
        idx, err = self.snap_images(raw)
        return raw[0], int(idx[0]), err


class ShiftImage:
    """Lazy image of the sample under sigma^n (window models)."""

    __slots__ = ("n",)

    def __init__(self, n: int):
        self.n = int(n)

    def __repr__(self):
        return f"ShiftImage({self.n})"


class WindowSampleModel(CascadeModel):
    """Finite sample of a two-sided shift space under the exact shift map.

    Points are binary sequences with support inside ``[-radius, radius]``;
    the shift is evaluated exactly via index arithmetic (a ``ShiftImage``
    handle), so arbitrarily deep iterates stay exact.  Distances use the
    standard dyadic sequence metric.
    """

    kind = "window"
    metric_name = "shift-dyadic"

    def __init__(self, name, params, bits: np.ndarray, radius: int, pad: int):
        super().__init__()
        self.name = name
        self.params = dict(params)
        self.radius = int(radius)
        self.pad = int(pad)
        width = 2 * pad + 1
        self.bits = np.zeros((bits.shape[0], width), dtype=np.uint8)
        lo = pad - radius
        self.bits[:, lo : lo + bits.shape[1]] = bits
        self.invertible = True
        order = np.argsort(np.abs(np.arange(-pad, pad + 1)), kind="stable")
        self._scan_order = order

    @property
    def n_points(self):
        return int(self.bits.shape[0])

    def symbol(self, i: PointId, pos: int) -> int:
        p = pos + self.pad
        if 0 <= p < self.bits.shape[1]:
            return int(self.bits[i, p])
        return 0

    def _seq_dist(self, i, shift_i, j, shift_j):
        # first disagreement of sigma^a(x_i) and sigma^b(x_j) around the origin
        width = self.bits.shape[1]
        for p in self._scan_order:
            pos = p - self.pad
            a = pos + shift_i + self.pad
            b = pos + shift_j + self.pad
            va = int(self.bits[i, a]) if 0 <= a < width else 0
            vb = int(self.bits[j, b]) if 0 <= b < width else 0
            if va != vb:
                return 2.0 ** (-abs(pos))
        return 0.0

    def point_dist(self, a, b):
        a = np.atleast_1d(np.asarray(a))
        b = np.atleast_1d(np.asarray(b))
        return np.asarray(
            [self._seq_dist(int(i), 0, int(j), 0) for i, j in zip(a, b)]
        )

    @property
    def resolution(self):
        return 2.0 ** (-self.radius)

    @property
    def diameter(self):
        return 1.0

    def _identity_images(self):
        return ShiftImage(0)

    def _advance(self, images, direction):
        return ShiftImage(images.n + direction)

    def iterate_images(self, n: int):
        return ShiftImage(n)

    def image_pair_dist(self, a_imgs, b_imgs):
        n = self.n_points
        return np.asarray(
            [self._seq_dist(i, a_imgs.n, i, b_imgs.n) for i in range(n)]
        )

    def image_point_dist(self, imgs, point):
        return np.asarray(
            [self._seq_dist(i, imgs.n, point, 0) for i in range(self.n_points)]
        )

    def snap_images(self, imgs):
        idx = np.empty(self.n_points, dtype=np.int64)
        err = 0.0
        for i in range(self.n_points):
            d = [self._seq_dist(i, imgs.n, j, 0) for j in range(self.n_points)]
            idx[i] = int(np.argmin(d))
            err = max(err, float(min(d)))
        return idx, err

    def apply_to_indices(self, imgs, idx):
        raise NotImplementedError("window images cannot be re-indexed; compose shifts instead")

    def window_radius(self, tau: float) -> int:
        # distances are 0 or 2^-k: keys on [-w, w] decide sup<tau exactly
        # when tau lies in (2^-(w+1), 2^-w]
        w = 0
        while 2.0 ** (-(w + 1)) >= tau:
            w += 1
        return w

    def key_matrix(self, exponents, tau: float) -> dict[int, bytes]:
        """Exact tau-cluster keys for sigma^n over the sample, per exponent."""
        w = self.window_radius(tau)
        keys = {}
        width = self.bits.shape[1]
        for n in exponents:
            lo = self.pad + n - w
            hi = self.pad + n + w + 1
            if lo < 0 or hi > width:
                block = np.zeros((self.n_points, 2 * w + 1), dtype=np.uint8)
                src_lo, src_hi = max(lo, 0), min(hi, width)
                if src_lo < src_hi:
                    block[:, src_lo - lo : src_hi - lo] = self.bits[:, src_lo:src_hi]
            else:
                block = self.bits[:, lo:hi]
            keys[n] = np.ascontiguousarray(block).tobytes()
        return keys

    def cluster_key(self, imgs, tau):
        return self.key_matrix([imgs.n], tau)[imgs.n]

    def export_images(self, imgs):
        w = min(self.pad, 8)
        out = []
        for i in range(self.n_points):
            out.append("".join(str(self.symbol(i, imgs.n + p)) for p in range(-w, w + 1)))
        return out

    def point_data(self, i):
        sup = np.nonzero(self.bits[i])[0] - self.pad
        return {"support": [int(v) for v in sup]}

    def to_json(self):
        return {
            "schema": "ellis.model/1",
            "name": self.name,
            "params": self.params,
            "kind": self.kind,
            "metric": self.metric_name,
            "invertible": self.invertible,
            "count": self.n_points,
            "radius": self.radius,
        }


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


@dataclass
class CatalogEntry:
    name: str
    builder: Callable[..., CascadeModel]
    defaults: dict
    summary: str


def _interval_model(name, params, lo, hi, grid, fwd, inv):
    if grid < 2:
        raise InvalidParameterError("grid size must be >= 2")
    pts = np.linspace(lo, hi, grid)
    eps = (hi - lo) / (grid - 1)

    def dist(a, b):
        return np.abs(np.asarray(a, dtype=float).ravel() - np.asarray(b, dtype=float).ravel())

    def snap(raw):
        x = np.asarray(raw, dtype=float).ravel()
        idx = np.rint((x - lo) / eps).astype(np.int64)
        return np.clip(idx, 0, grid - 1)

    return SampledModel(
        name, params, pts,
        step_raw=lambda x: fwd(np.asarray(x, dtype=float)),
        inverse_raw=None if inv is None else (lambda x: inv(np.asarray(x, dtype=float))),
        raw_dist=dist, snap_raw=snap, epsilon=eps, metric_name="interval",
    )


def build_square_map(grid=1001):
    return _interval_model(
        "square-map", {"grid": grid}, 0.0, 1.0, grid,
        fwd=lambda x: x * x, inv=np.sqrt,
    )


def build_neg_cube(grid=2001):
    return _interval_model(
        "neg-cube", {"grid": grid}, -1.0, 1.0, grid,
        fwd=lambda x: -(x ** 3), inv=lambda x: -np.cbrt(x),
    )


def build_identity(n=5):
    if n < 1:
        raise InvalidParameterError("identity model needs n >= 1")
    coords = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)

    def dist(a, b):
        return np.abs(coords[a] - coords[b])

    idx = np.arange(n)
    return FiniteModel("identity", {"n": n}, coords, dist, idx, idx, "interval")


def _rotation_steps(alpha, grid):
    if isinstance(alpha, str) and "/" in alpha:
        frac = Fraction(alpha)
        if grid is None:
            grid = frac.denominator
        if grid % frac.denominator:
            raise InvalidParameterError("grid must be a multiple of the rotation denominator")
        return (frac.numerator * (grid // frac.denominator)) % grid, grid
    if grid is None:
        grid = 144
    return int(round(float(alpha) * grid)) % grid, grid


def build_irrational_rotation(alpha="0.6180339887498949", grid=None):
    try:
        steps, grid = _rotation_steps(alpha, grid)
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidParameterError(str(exc)) from None
    if grid < 2:
        raise InvalidParameterError("rotation grid must be >= 2")
    theta = TWO_PI * np.arange(grid) / grid
    coords = theta

    def dist(a, b):
        return _minarc(coords[a], coords[b])

    fwd = (np.arange(grid) + steps) % grid
    inv = (np.arange(grid) - steps) % grid
    return FiniteModel(
        "irrational-rotation", {"alpha": str(alpha), "grid": grid, "steps": steps},
        coords, dist, fwd, inv, "circle-arc",
    )


def build_double_circle_rotation(alpha="0.6180339887498949", grid=36):
    steps, grid = _rotation_steps(alpha, grid)
    theta = TWO_PI * np.arange(grid) / grid
    radius = np.concatenate([np.ones(grid), 2.0 * np.ones(grid)])
    angle = np.concatenate([theta, theta])
    coords = np.stack([radius, angle], axis=1)

    def dist(a, b):
        return np.abs(radius[a] - radius[b]) + _minarc(angle[a], angle[b])

    one = (np.arange(grid) + steps) % grid
    fwd = np.concatenate([one, one + grid])
    ione = (np.arange(grid) - steps) % grid
    inv = np.concatenate([ione, ione + grid])
    return FiniteModel(
        "double-circle-rotation", {"alpha": str(alpha), "grid": grid, "steps": steps},
        coords, dist, fwd, inv, "radial-plus-arc",
    )


def _circle_stack(name, params, base, levels, mult, step_of_level):
    """Concentric circles r = 1 - base^-j plus the center point and the unit
    circle; each circle rotates by an exact number of grid steps."""
    if levels < 1 or mult < 1:
        raise InvalidParameterError("levels and mult must be >= 1")
    g = (base ** levels) * mult
    radii = [1.0 - base ** (-j) for j in range(1, levels + 1)] + [1.0]
    xs, ys, fwd, inv = [0.0], [0.0], [0], [0]  # center point, fixed
    offset = 1
    for j, r in enumerate(radii, start=1):
        steps = step_of_level(j, g) if j <= levels else 0
        theta = TWO_PI * np.arange(g) / g
        xs.extend(r * np.cos(theta))
        ys.extend(r * np.sin(theta))
        fwd.extend(offset + (np.arange(g) + steps) % g)
        inv.extend(offset + (np.arange(g) - steps) % g)
        offset += g
    coords = np.stack([np.asarray(xs), np.asarray(ys)], axis=1)

    def dist(a, b):
        d = coords[a] - coords[b]
        return np.hypot(d[..., 0], d[..., 1])

    return FiniteModel(name, params, coords, dist, fwd, inv, "euclidean")


def build_dyadic_circle_stack(levels=5, mult=4):
    return _circle_stack(
        "dyadic-circle-stack", {"levels": levels, "mult": mult}, 2, levels, mult,
        lambda j, g: (-(g >> j)) % g,
    )


def build_dyadic_circle_stack_inward(levels=8, mult=1):
    return _circle_stack(
        "dyadic-circle-stack-inward", {"levels": levels, "mult": mult}, 2, levels, mult,
        lambda j, g: (g >> j) % g,
    )


def build_triadic_circle_stack(levels=3, mult=2):
    return _circle_stack(
        "triadic-circle-stack", {"levels": levels, "mult": mult}, 3, levels, mult,
        lambda j, g: (-(g // (3 ** j))) % g,
    )


def _stack_points(n, truncate):
    # one component: k in {-T..T, inf} crossed with labels 1..n
    ks = list(range(-truncate, truncate + 1)) + [None]  # None = infinity
    pts = [(k, l) for k in ks for l in range(1, n + 1)]
    return ks, pts


def _stack_karc(k):
    return 1.0 if k is None else k / (1.0 + abs(k))


def build_periodic_stack(n=3, truncate=100):
    if n < 1 or truncate < 1:
        raise InvalidParameterError("periodic-stack needs n >= 1 and truncate >= 1")
    _, pts = _stack_points(n, truncate)
    index = {p: i for i, p in enumerate(pts)}
    arc = np.asarray([_stack_karc(k) for k, _ in pts])
    lab = np.asarray([l for _, l in pts])

    def dist(a, b):
        return _circ2(arc[a], arc[b]) + (lab[a] != lab[b]).astype(float)

    fwd = []
    for k, l in pts:
        k2 = None if (k is None or k >= truncate) else k + 1
        l2 = l % n + 1
        fwd.append(index[(k2, l2)])
    labels = [{"n": n, "k": "inf" if k is None else k, "l": l} for k, l in pts]
    return FiniteModel(
        "periodic-stack", {"n": n, "truncate": truncate}, None, dist, fwd, None,
        "compactified-line-plus-label", point_labels=labels,
    )


def build_periodic_union(n=3, truncate=100):
    if n < 1 or truncate < 1:
        raise InvalidParameterError("periodic-union needs n >= 1 and truncate >= 1")
    pts, comps = [], []
    for comp in range(1, n + 1):
        _, p = _stack_points(comp, truncate)
        pts.extend((comp, k, l) for k, l in p)
        comps.extend([comp] * len(p))
    index = {p: i for i, p in enumerate(pts)}
    arc = np.asarray([_stack_karc(k) for _, k, _ in pts])
    lab = np.asarray([l for _, _, l in pts])
    comp_arr = np.asarray(comps)

    def dist(a, b):
        return (
            3.0 * (comp_arr[a] != comp_arr[b]).astype(float)
            + _circ2(arc[a], arc[b])
            + (lab[a] != lab[b]).astype(float)
        )

    fwd = []
    for comp, k, l in pts:
        k2 = None if (k is None or k >= truncate) else k + 1
        fwd.append(index[(comp, k2, l % comp + 1)])
    labels = [{"n": c, "k": "inf" if k is None else k, "l": l} for c, k, l in pts]
    return FiniteModel(
        "periodic-union", {"n": n, "truncate": truncate}, None, dist, fwd, None,
        "compactified-line-plus-label", point_labels=labels,
    )


def build_isolated_ones_subshift(truncate=12):
    if truncate < 1:
        raise InvalidParameterError("truncate must be >= 1")
    # points: x^j (single 1 at position j), |j| <= truncate, plus all-zero
    js = list(range(-truncate, truncate + 1))
    n = len(js) + 1
    zero = n - 1
    absj = np.asarray([abs(j) for j in js] + [0])

    def dist(a, b):
        a = np.atleast_1d(np.asarray(a))
        b = np.atleast_1d(np.asarray(b))
        out = np.zeros(a.shape, dtype=float)
        flat = out.ravel()
        for i, (x, y) in enumerate(zip(a.ravel(), b.ravel())):
            if x == y:
                continue
            # first disagreement sits at the 1 of smallest |position|
            radii = [absj[t] for t in (x, y) if t != zero]
            flat[i] = 2.0 ** (-min(radii))
        return out

    fwd = []
    for j in js:
        fwd.append(zero if j - 1 < -truncate else js.index(j - 1))
    fwd.append(zero)
    labels = [{"one_at": j} for j in js] + [{"one_at": None}]
    return FiniteModel(
        "isolated-ones-subshift", {"truncate": truncate}, None, dist, fwd, None,
        "shift-dyadic", point_labels=labels,
    )


def build_annulus_skew(radial=5, grid=36, alpha=0.6180339887498949):
    if radial < 0 or grid < 2:
        raise InvalidParameterError("annulus-skew needs radial >= 0 and grid >= 2")
    r_grid = np.linspace(1.0, 2.0, radial + 2)
    t_grid = TWO_PI * np.arange(grid) / grid
    rr, tt = np.meshgrid(r_grid, t_grid, indexing="ij")
    pts = np.stack([rr.ravel(), tt.ravel()], axis=1)
    d_theta = TWO_PI * float(alpha)

    def fwd(raw):
        raw = np.atleast_2d(raw)
        r, t = raw[:, 0], raw[:, 1]
        return np.stack([1.0 + (r - 1.0) ** 2, (t + d_theta) % TWO_PI], axis=1)

    def inv(raw):
        raw = np.atleast_2d(raw)
        r, t = raw[:, 0], raw[:, 1]
        return np.stack([1.0 + np.sqrt(np.maximum(r - 1.0, 0.0)), (t - d_theta) % TWO_PI], axis=1)

    def dist(a, b):
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        return np.abs(a[:, 0] - b[:, 0]) + _minarc(a[:, 1], b[:, 1])

    def snap(raw):
        raw = np.atleast_2d(raw)
        ri = np.clip(np.rint((raw[:, 0] - 1.0) * (radial + 1)), 0, radial + 1).astype(np.int64)
        ti = np.rint(raw[:, 1] / (TWO_PI / grid)).astype(np.int64) % grid
        return ri * grid + ti

    eps = min(1.0 / (radial + 1), TWO_PI / grid)
    return SampledModel(
        "annulus-skew", {"radial": radial, "grid": grid, "alpha": alpha}, pts,
        fwd, inv, dist, snap, eps, "radial-plus-arc",
    )


CATALOG: dict[str, CatalogEntry] = {}


def _register(name, builder, defaults, summary):
    CATALOG[name] = CatalogEntry(name, builder, defaults, summary)


_register("square-map", build_square_map, {"grid": 1001},
          "interval squaring map; iterates limit onto two idempotent step maps")
_register("neg-cube", build_neg_cube, {"grid": 2001},
          "odd cubing map with sign flip; four limit maps forming two 2-element ideals")
_register("identity", build_identity, {"n": 5},
          "identity map on n points")
_register("irrational-rotation", build_irrational_rotation,
          {"alpha": "0.6180339887498949", "grid": None},
          "circle rotation resolved exactly on the angular grid")
_register("double-circle-rotation", build_double_circle_rotation,
          {"alpha": "0.6180339887498949", "grid": 36},
          "same rotation on two disjoint circles; distal but not transitive")
_register("dyadic-circle-stack", build_dyadic_circle_stack, {"levels": 5, "mult": 4},
          "circles at radii 1-2^-j rotating by -2*pi/2^j; locally rigid stack")
_register("dyadic-circle-stack-inward", build_dyadic_circle_stack_inward,
          {"levels": 8, "mult": 1},
          "circles at radii 1-2^-j rotating by +2*pi/2^j; pointwise returns along powers of 2")
_register("triadic-circle-stack", build_triadic_circle_stack, {"levels": 3, "mult": 2},
          "base-3 analogue of the dyadic stack")
_register("periodic-stack", build_periodic_stack, {"n": 3, "truncate": 100},
          "compactified integer line crossed with an n-cycle; envelope gains an n-periodic idempotent")
_register("periodic-union", build_periodic_union, {"n": 3, "truncate": 100},
          "disjoint union of periodic stacks 1..n; single limit idempotent of period lcm(1..n)")
_register("isolated-ones-subshift", build_isolated_ones_subshift, {"truncate": 12},
          "orbit of the single-1 sequence plus the zero sequence; constant limit map")
_register("annulus-skew", build_annulus_skew, {"radial": 5, "grid": 36, "alpha": 0.6180339887498949},
          "rotation with quadratic radial drift between two invariant boundary circles")


def load_example(name: str, **params) -> CascadeModel:
    if name not in CATALOG:
        raise UnknownExampleError(name)
    entry = CATALOG[name]
    merged = dict(entry.defaults)
    for key, value in params.items():
        if key not in entry.defaults:
            raise InvalidParameterError(f"{name} has no parameter {key!r}")
        merged[key] = value
    return entry.builder(**merged)


def list_catalog() -> list[dict]:
    return [
        {"name": e.name, "params": dict(e.defaults), "summary": e.summary}
        for e in (CATALOG[k] for k in sorted(CATALOG))
    ]


# ---------------------------------------------------------------------------
# spec-level operations
# ---------------------------------------------------------------------------


def metric(model: CascadeModel, a: PointId, b: PointId) -> float:
    return model.metric(a, b)


def step(model: CascadeModel, x: PointId):
    """One application of the map.

    Finite-exact models return the image PointId.  Sampled models return
    ``(raw, snapped_id, snap_error)`` so discretization is never silent.
    """
    if isinstance(model, SampledModel):
        raw, idx, err = model.step_snapped(x)
        return {"raw": [float(v) for v in np.atleast_1d(raw)], "snapped": idx, "snap_error": err}
    if isinstance(model, WindowSampleModel):
        raise InvalidParameterError("window models are iterated through iterate_images")
    return int(model.map_table[x])


def orbit_segment(model: CascadeModel, x: PointId, n_from: int, n_to: int):
    if n_from > n_to:
        raise InvalidParameterError("n_from must be <= n_to")
    if n_from < 0 and not model.invertible:
        raise NegativePowerError("negative powers need an invertible model")
    out = []
    for n in range(n_from, n_to + 1):
        imgs = model.iterate_images(n)
        if isinstance(model, FiniteModel):
            out.append(int(imgs[x]))
        elif isinstance(model, SampledModel):
            raw = imgs[x]
            idx, _ = model.snap_images(raw.reshape(1, -1) if raw.ndim else np.asarray([raw]))
            out.append({
                "raw": [float(v) for v in np.atleast_1d(raw)],
                "snapped": int(idx[0]),
            })
        else:
            out.append({"shift": imgs.n, "point": x})
    return out


def omega_limit_estimate(model: CascadeModel, x: PointId, horizon: int, tol: float) -> set[PointId]:
    """Sample points hit at least twice by the tail half of the orbit."""
    if horizon < 1:
        raise InvalidParameterError("horizon must be >= 1")
    hits = np.zeros(model.n_points, dtype=np.int64)
    for n in range(horizon // 2 + 1, horizon + 1):
        imgs = model.iterate_images(n)
        if isinstance(model, FiniteModel):
            target = int(imgs[x])
            d0 = 0.0
            hits[target] += 1
            if tol > 0:
                row = model.point_dist(np.full(model.n_points, target), np.arange(model.n_points))
                hits[(row <= tol) & (row > d0)] += 1
        elif isinstance(model, SampledModel):
            raw = np.asarray(imgs)[x]
            pts = model.points
            d = model._raw_dist(np.broadcast_to(raw, pts.shape), pts)
            hits[d <= tol] += 1
        else:
            d = np.asarray([model._seq_dist(x, imgs.n, j, 0) for j in range(model.n_points)])
            hits[d <= tol] += 1
    return {int(i) for i in np.nonzero(hits >= 2)[0]}


def snap_to_finite(model: SampledModel, name: str | None = None) -> FiniteModel:
    """Freeze a sampled model into a finite-exact one via the snapped step.

    The result iterates the snapped map (a total index table); useful for
    preimage enumeration and exact envelopes at coarse grid scales.
    """
    if not isinstance(model, SampledModel):
        raise InvalidParameterError("snap_to_finite expects a sampled model")
    raw = model._step_raw(model.points)
    table, _ = model.snap_images(raw)
    inverse = None
    if sorted(table) == list(range(model.n_points)):
        inverse = np.argsort(table)
    coords = model.points

    def dist(a, b):
        return model._raw_dist(coords[np.asarray(a)], coords[np.asarray(b)])

    return FiniteModel(
        name or f"{model.name}-snapped", dict(model.params), coords, dist,
        table, inverse, model.metric_name,
    )


def sample_window_model(count=64, radius=64, seed=0, density=0.5,
                        name="two-shift-window", pad_extra=2) -> WindowSampleModel:
    """Seeded sample of finite-support sequences from the full 2-shift."""
    if count < 1 or radius < 1:
        raise InvalidParameterError("count and radius must be >= 1")
    rng = np.random.default_rng(seed)
    bits = (rng.random((count, 2 * radius + 1)) < density).astype(np.uint8)
    pad = radius + pad_extra
    return WindowSampleModel(
        name, {"count": count, "radius": radius, "seed": seed, "density": density},
        bits, radius, pad,
    )
