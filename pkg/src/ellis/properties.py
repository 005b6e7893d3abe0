"""Horizon-bounded dynamical property checkers.

Every verdict is relative to the horizon and tolerance it was computed with,
and is serialized together with them: the underlying properties are
asymptotic, the artifact observes finite shadows.  Open sets are metric
balls on the sample; shift spaces use exact cylinder arithmetic instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .spaces import (
    CascadeModel,
    FiniteModel,
    InvalidParameterError,
    SampledModel,
    WindowSampleModel,
)
from .symbolic import Subshift, cylinder_hitting
from .hyperspace import HyperCascadeModel, build_hyper_model
from . import envelope as envelope_mod


@dataclass
class OpenSet:
    kind: str                 # ball | cylinder | points
    center: int | None = None
    radius: float | None = None
    word: str | None = None
    points: tuple = ()

    def resolve(self, model: CascadeModel) -> np.ndarray:
        if self.kind == "points":
            idx = np.asarray(sorted(self.points), dtype=np.int64)
        elif self.kind == "ball":
            d = model.point_dist(
                np.full(model.n_points, self.center, dtype=np.int64),
                np.arange(model.n_points),
            )
            idx = np.nonzero(d < self.radius)[0]
        else:
            raise InvalidParameterError("cylinder sets resolve on shift spaces only")
        if idx.size == 0:
            raise InvalidParameterError("open set misses the sample")
        return idx

    def label(self) -> str:
        if self.kind == "ball":
            return f"B({self.center},{self.radius:g})"
        if self.kind == "cylinder":
            return f"[{self.word}]"
        return f"{{{','.join(map(str, self.points))}}}"


@dataclass
class PropertyVerdict:
    name: str
    verdict: str              # holds | fails | inconclusive
    horizon: int
    params: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    counterexamples: list = field(default_factory=list)

    def to_json(self):
        return asdict(self)


def ball(center: int, radius: float) -> OpenSet:
    return OpenSet("ball", center=center, radius=radius)


def cylinder(word: str) -> OpenSet:
    return OpenSet("cylinder", word=word)


# ---------------------------------------------------------------------------
# distance plumbing
# ---------------------------------------------------------------------------


def full_distance_matrix(model: CascadeModel) -> np.ndarray:
    n = model.n_points
    if isinstance(model, HyperCascadeModel):
        out = np.empty((n, n))
        idx = np.arange(n)
        for i in range(n):
            out[i] = model.pairwise_hausdorff(np.full(n, i), idx)
        return out
    if isinstance(model, WindowSampleModel):
        order = model._scan_order
        weights = 2.0 ** (-np.abs(np.arange(-model.pad, model.pad + 1)))[order]
        out = np.zeros((n, n))
        bits = model.bits[:, order]
        for i in range(n):
            diff = bits != bits[i]
            first = np.argmax(diff, axis=1)
            any_diff = diff.any(axis=1)
            out[i] = np.where(any_diff, weights[first], 0.0)
        return out
    idx = np.arange(n)
    out = np.empty((n, n))
    for i in range(n):
        out[i] = model.point_dist(np.full(n, i), idx)
    return out


def _point_return_matrix(model: CascadeModel, horizon: int, tau: float) -> np.ndarray:
    """R[n, i] true when the n-th image of point i is within tau of it."""
    n_pts = model.n_points
    if isinstance(model, WindowSampleModel):
        w = model.window_radius(tau)
        bits = np.pad(model.bits, ((0, 0), (horizon + w + 1, horizon + w + 1)))
        origin = model.pad + horizon + w + 1
        base = bits[:, origin - w : origin + w + 1]
        out = np.zeros((horizon + 1, n_pts), dtype=bool)
        out[0] = True
        for n in range(1, horizon + 1):
            sl = bits[:, origin + n - w : origin + n + w + 1]
            out[n] = (sl == base).all(axis=1)
        return out
    ident = model.iterate_images(0)
    out = np.zeros((horizon + 1, n_pts), dtype=bool)
    out[0] = True
    for n in range(1, horizon + 1):
        imgs = model.iterate_images(n)
        out[n] = model.image_pair_dist(imgs, ident) <= tau
    return out


# ---------------------------------------------------------------------------
# hitting sets and transitivity
# ---------------------------------------------------------------------------


def hitting_set(target, u, v, horizon: int) -> list[int]:
    """Times n in [1, horizon] at which the n-th image of U meets V."""
    if isinstance(target, Subshift):
        uw = u.word if isinstance(u, OpenSet) else u
        vw = v.word if isinstance(v, OpenSet) else v
        return cylinder_hitting(target, uw, vw, horizon)
    model = target
    iu = u.resolve(model)
    iv_center, iv_radius = v.center, v.radius
    if v.kind == "points":
        if not isinstance(model, FiniteModel):
            raise InvalidParameterError("explicit point sets need a finite-exact model")
        iv = set(int(x) for x in v.resolve(model))
    out = []
    for n in range(1, horizon + 1):
        imgs = model.iterate_images(n)
        if isinstance(model, FiniteModel):
            hit_imgs = imgs[iu]
            if v.kind == "points":
                if any(int(x) in iv for x in hit_imgs):
                    out.append(n)
            else:
                d = model.point_dist(hit_imgs, np.full(len(iu), iv_center))
                if (d < iv_radius).any():
                    out.append(n)
        else:
            sub = model.apply_to_indices(imgs, iu)
            d = model._raw_dist(sub, np.broadcast_to(model.points[iv_center], np.asarray(sub).shape))
            if (d < iv_radius).any():
                out.append(n)
    return out


def default_cover(model: CascadeModel, granularity: float | None = None,
                  max_sets: int = 360) -> list[OpenSet]:
    if granularity is None:
        granularity = min(4.0 * model.resolution, model.diameter / 4.0)
    g = granularity
    stride = max(1, model.n_points // max_sets)
    centers = list(range(0, model.n_points, stride))
    cover = [ball(c, g) for c in centers]
    # coverage check: every sample point inside some ball
    covered = np.zeros(model.n_points, dtype=bool)
    for s in cover:
        covered[s.resolve(model)] = True
    if not covered.all():
        cover = [ball(c, g) for c in range(model.n_points)]
    return cover


def _has_run(ns: list[int], run: int) -> bool:
    if not ns:
        return False
    streak, prev = 1, None
    for n in ns:
        streak = streak + 1 if prev is not None and n == prev + 1 else 1
        if streak >= run:
            return True
        prev = n
    return False


def classify_transitivity(target, horizon: int, cover=None, cylinder_length: int = 3,
                          thick_run: int = 10, granularity: float | None = None) -> dict:
    """Transitive / weakly mixing / mixing verdicts over a finite open cover.

    Shift spaces use all cylinders up to ``cylinder_length``; models use
    metric balls at the given granularity.  Weak mixing combines the
    product-pair test with a thickness scan of every hitting set.
    """
    if isinstance(target, Subshift):
        words = [w for L in range(1, cylinder_length + 1) for w in sorted(target.words(L))]
        sets = [cylinder(w) for w in words]
    else:
        sets = cover if cover is not None else default_cover(target, granularity)
    labels = [s.label() for s in sets]
    hits = {}
    for i, u in enumerate(sets):
        for j, v in enumerate(sets):
            hits[(i, j)] = hitting_set(target, u, v, horizon)
    run = min(thick_run, max(2, horizon // 4))
    empty = [(labels[i], labels[j]) for (i, j), ns in hits.items() if not ns]
    transitive = not empty
    thick_fail = [(labels[i], labels[j]) for (i, j), ns in hits.items()
                  if not _has_run(ns, run)]
    masks = {k: np.zeros(horizon + 1, dtype=bool) for k in hits}
    for k, ns in hits.items():
        masks[k][ns] = True
    pair_fail = []
    keys = list(hits)
    for a in keys:
        for b in keys:
            if not (masks[a] & masks[b]).any():
                pair_fail.append((a, b))
                break
        if pair_fail:
            break
    weakly = transitive and not thick_fail and not pair_fail
    tails = {}
    for k, ns in hits.items():
        n0 = None
        have = set(ns)
        for start in range(1, horizon + 1):
            if all(m in have for m in range(start, horizon + 1)):
                n0 = start
                break
        tails[k] = n0
    mixing = transitive and all(n0 is not None for n0 in tails.values())
    verdicts = {
        "transitive": PropertyVerdict(
            "transitive", "holds" if transitive else "fails", horizon,
            {"sets": labels}, witnesses=[] if empty else [min(ns) for ns in hits.values()][:4],
            counterexamples=empty[:4]),
        "weakly_mixing": PropertyVerdict(
            "weakly_mixing", "holds" if weakly else "fails", horizon,
            {"thick_run": run}, counterexamples=(thick_fail + pair_fail)[:4]),
        "mixing": PropertyVerdict(
            "mixing", "holds" if mixing else "fails", horizon,
            {}, witnesses=[max(n for n in tails.values() if n is not None)] if mixing else []),
    }
    chain_ok = (not mixing or weakly) and (not weakly or transitive)
    return {"verdicts": verdicts, "chain_ok": chain_ok, "tails": tails}


def strong_transitivity_check(model: CascadeModel, horizon: int, cover=None) -> dict:
    """Backward-orbit density of every point, cross-checked against
    minimality (forward-orbit density) for invertible models."""
    if not isinstance(model, FiniteModel):
        raise InvalidParameterError("strong transitivity needs enumerable preimages")
    sets = cover if cover is not None else default_cover(model)
    set_idx = [frozenset(int(i) for i in s.resolve(model)) for s in sets]
    n = model.n_points
    pre = [[] for _ in range(n)]
    for x in range(n):
        pre[int(model.map_table[x])].append(x)
    failures = []
    for x in range(n):
        seen = {x}
        frontier = {x}
        for _ in range(horizon):
            frontier = {p for y in frontier for p in pre[y]} - seen
            if not frontier:
                break
            seen |= frontier
        if any(not (seen & s) for s in set_idx):
            failures.append(x)
    strongly = not failures
    minimal = None
    if model.invertible:
        fails_fwd = []
        for x in range(n):
            orbit = {x}
            cur = x
            for _ in range(min(horizon, n)):
                cur = int(model.map_table[cur])
                orbit.add(cur)
            if any(not (orbit & s) for s in set_idx):
                fails_fwd.append(x)
        minimal = not fails_fwd
    return {
        "strongly_transitive": PropertyVerdict(
            "strongly_transitive", "holds" if strongly else "fails", horizon,
            {}, counterexamples=failures[:4]),
        "minimal": minimal,
        "agrees_with_minimality": None if minimal is None else (strongly == minimal),
    }


# ---------------------------------------------------------------------------
# equicontinuity / sensitivity
# ---------------------------------------------------------------------------


def _neighbor_pairs(model: CascadeModel, dist: np.ndarray):
    """Per point: its nearest neighbors (ties included)."""
    n = model.n_points
    out = []
    big = dist + np.eye(n) * (dist.max() + 1.0)
    nn = big.min(axis=1)
    for i in range(n):
        if not math.isfinite(nn[i]):
            out.append((i, []))
            continue
        mates = np.nonzero(big[i] <= nn[i] * (1 + 1e-12))[0]
        out.append((i, [int(m) for m in mates]))
    return out


def _pair_sup_divergence(model, pairs, horizon):
    """sup over n <= horizon of d(f^n x, f^n y) for the given index pairs."""
    if isinstance(model, WindowSampleModel):
        sups = []
        for x, y in pairs:
            diff = np.nonzero(model.bits[x] != model.bits[y])[0] - model.pad
            if diff.size == 0:
                sups.append(0.0)
                continue
            # shifting by n moves a disagreement at p to p - n
            best = math.inf
            for p in diff:
                reach = 0 if 0 <= p <= horizon else min(abs(p), abs(p - horizon))
                best = min(best, reach)
            sups.append(2.0 ** (-best))
        return np.asarray(sups)
    xs = np.asarray([p[0] for p in pairs], dtype=np.int64)
    ys = np.asarray([p[1] for p in pairs], dtype=np.int64)
    sup = np.zeros(len(pairs))
    for n in range(horizon + 1):
        imgs = model.iterate_images(n)
        a = model.apply_to_indices(imgs, xs)
        b = model.apply_to_indices(imgs, ys)
        sup = np.maximum(sup, model.image_pair_dist(a, b))
    return sup


def equicontinuity_scan(model: CascadeModel, eps_list, horizon: int,
                        granularity: float | None = None) -> dict:
    """Per-epsilon equicontinuity points at nearest-neighbor scale.

    A point passes for epsilon when every nearest neighbor stays within
    epsilon along the whole horizon; almost equicontinuity asks the passing
    set to be dense at cover granularity, and sensitivity is the absence of
    passing points at the smallest epsilon.
    """
    eps_list = sorted(eps_list)
    if granularity is None:
        # window samples live at cylinder scale; metric grids at 4x resolution
        granularity = 0.5 if isinstance(model, WindowSampleModel) else 4.0 * model.resolution
    g = granularity
    dist = full_distance_matrix(model)
    neighbor = _neighbor_pairs(model, dist)
    pairs = []
    for i, mates in neighbor:
        if mates and dist[i, mates[0]] > g:
            continue  # isolated at cover scale: vacuously equicontinuous
        for m in mates:
            pairs.append((i, m))
    sup = _pair_sup_divergence(model, pairs, horizon)
    worst = np.zeros(model.n_points)
    for (i, _m), s in zip(pairs, sup):
        worst[i] = max(worst[i], s)
    result = {}
    for eps in eps_list:
        eq_points = [i for i in range(model.n_points) if worst[i] < eps]
        if eq_points:
            dense = bool((dist[:, eq_points].min(axis=1) <= g).all())
        else:
            dense = False
        result[eps] = {"equicontinuity_points": eq_points, "ae": dense}
    smallest = eps_list[0]
    sensitive = not result[smallest]["equicontinuity_points"]
    return {
        "per_epsilon": result,
        "ae": all(result[e]["ae"] for e in eps_list),
        "sensitive": sensitive,
        "sensitivity_constant": float(worst.min()) if sensitive else None,
        "horizon": horizon,
        "granularity": g,
    }


def hyper_equicontinuity_crosscheck(base_model: CascadeModel, k: int, eps_list,
                                    horizon: int, budget: int = 250_000) -> dict:
    """Almost-equicontinuity agreement between a model and its finite-subset
    hyperspace at cardinality k."""
    hyper = build_hyper_model(base_model, k, budget=budget)
    base = equicontinuity_scan(base_model, eps_list, horizon)
    hyp = equicontinuity_scan(hyper, eps_list, horizon)
    return {
        "base_ae": base["ae"],
        "hyper_ae": hyp["ae"],
        "agree": base["ae"] == hyp["ae"],
        "base": base,
        "hyper": hyp,
    }


def orbit_closure_equicontinuity(base_model: FiniteModel, members, eps: float,
                                 horizon: int) -> dict:
    """Equicontinuity of one (arbitrary-cardinality) set inside its own
    induced orbit closure; used for sets too large to enumerate."""
    from .hyperspace import hausdorff_distance

    if not isinstance(base_model, FiniteModel):
        raise InvalidParameterError("orbit-closure check needs a finite-exact model")
    a = tuple(sorted(set(int(m) for m in members)))
    orbit = [a]
    seen = {a}
    cur = a
    for _ in range(horizon):
        cur = tuple(sorted(set(int(base_model.map_table[m]) for m in cur)))
        if cur in seen:
            break
        seen.add(cur)
        orbit.append(cur)
    dists = [hausdorff_distance(base_model, a, b) for b in orbit[1:]]
    if not dists:
        return {"equicontinuous": True, "orbit_size": 1, "nn_distance": None}
    nn = min(dists)
    mates = [b for b, d in zip(orbit[1:], dists) if d <= nn * (1 + 1e-12)]
    sup = 0.0
    for b in mates:
        x, y = a, b
        for _ in range(horizon):
            sup = max(sup, hausdorff_distance(base_model, x, y))
            x = tuple(sorted(set(int(base_model.map_table[m]) for m in x)))
            y = tuple(sorted(set(int(base_model.map_table[m]) for m in y)))
    return {
        "equicontinuous": sup < eps,
        "orbit_size": len(orbit),
        "nn_distance": nn,
        "sup_divergence": sup,
    }


# ---------------------------------------------------------------------------
# rigidity
# ---------------------------------------------------------------------------


def rigidity_battery(model: CascadeModel, horizon: int, tau: float,
                     tuple_size: int = 3, n_tuples: int = 32, seed: int = 0,
                     uniform_witnesses: int = 3) -> dict:
    """Weak / pointwise / uniform rigidity at tolerance tau.

    Weak rigidity samples tuples (all singletons plus seeded tuples) and asks
    each for a common return time; pointwise rigidity asks one return time
    for the whole sample; uniform rigidity asks for recurring full returns
    (at least ``uniform_witnesses`` of them), the finite shadow of a
    sequence of uniform returns marching to infinity.
    """
    if tau <= 0:
        raise InvalidParameterError("tau must be positive")
    r = _point_return_matrix(model, horizon, tau)
    n_pts = model.n_points
    # full-sample simultaneous returns
    full = np.nonzero(r[1:].all(axis=1))[0] + 1
    rigid = full.size >= 1
    uniform = full.size >= uniform_witnesses
    # tuple tests
    rng = np.random.default_rng(seed)
    tuples = [(i,) for i in range(n_pts)]
    for _ in range(n_tuples):
        size = int(rng.integers(2, max(3, tuple_size + 1)))
        tuples.append(tuple(int(v) for v in rng.integers(0, n_pts, size)))
    weak_fail = None
    for t in tuples:
        if not r[1:, list(t)].all(axis=1).any():
            weak_fail = t
            break
    weakly = weak_fail is None
    chain_ok = (not uniform or rigid) and (not rigid or weakly)
    return {
        "weakly_rigid": PropertyVerdict(
            "weakly_rigid", "holds" if weakly else "fails", horizon,
            {"tau": tau, "tuple_size": tuple_size},
            counterexamples=[] if weakly else [list(weak_fail)]),
        "rigid": PropertyVerdict(
            "rigid", "holds" if rigid else "fails", horizon, {"tau": tau},
            witnesses=[int(v) for v in full[:4]]),
        "uniformly_rigid": PropertyVerdict(
            "uniformly_rigid", "holds" if uniform else "fails", horizon,
            {"tau": tau, "required_witnesses": uniform_witnesses},
            witnesses=[int(v) for v in full[:uniform_witnesses]]),
        "full_return_times": [int(v) for v in full],
        "chain_ok": chain_ok,
    }


# ---------------------------------------------------------------------------
# recurrence taxonomy
# ---------------------------------------------------------------------------


def recurrence_report(model: CascadeModel, horizon: int, tau: float) -> dict:
    """Per-point recurrence flags at tolerance tau."""
    if isinstance(model, WindowSampleModel):
        raise InvalidParameterError("recurrence report is not defined for window samples")
    r = _point_return_matrix(model, horizon, tau)
    n_pts = model.n_points
    dist = full_distance_matrix(model)
    points = []
    for x in range(n_pts):
        returns = [int(n) for n in range(1, horizon + 1) if r[n, x]]
        recurrent = len(returns) >= 2
        ball_idx = np.nonzero(dist[x] <= tau)[0]
        hit_ns = []
        for n in range(1, horizon + 1):
            imgs = model.iterate_images(n)
            sub = model.apply_to_indices(imgs, ball_idx)
            dd = (
                model.point_dist(sub, np.full(len(ball_idx), x))
                if isinstance(model, FiniteModel)
                else model._raw_dist(sub, np.broadcast_to(model.points[x], np.asarray(sub).shape))
            )
            if (dd <= tau).any():
                hit_ns.append(n)
        nonwandering = bool(hit_ns)
        essentially = False
        if hit_ns:
            have = set(hit_ns)
            for start in range(1, horizon + 1):
                if all(m in have for m in range(start, horizon + 1)):
                    essentially = True
                    break
        gaps = None
        if returns:
            seq = [0] + returns
            gaps = max(b - a for a, b in zip(seq, seq[1:]))
        points.append({
            "point": x,
            "recurrent": recurrent,
            "nonwandering": nonwandering,
            "essentially_nonwandering": essentially,
            "almost_periodic_gap": gaps if recurrent else None,
        })
    return {"horizon": horizon, "tau": tau, "points": points}


# ---------------------------------------------------------------------------
# WAP proxy and semiflow distality
# ---------------------------------------------------------------------------


def wap_proxy_check(model: CascadeModel, env, eps_grid=None) -> dict:
    """Discrete continuity modulus of the envelope's adherence elements.

    Iterates of the generator are continuous by construction, so only the
    elements the iterates accumulate on are eligible for the discontinuity
    flag: the cycle part of an exact envelope, the limit and composite
    clusters of an approximate one.  An element is flagged when its modulus
    collapses to the sample resolution while neighbors map at least eps
    apart.
    """
    if eps_grid is None:
        eps_grid = [model.diameter / 4.0, model.diameter / 8.0]
    dist = full_distance_matrix(model)
    n = model.n_points
    iu = np.triu_indices(n, k=1)
    base = dist[iu]
    scale = model.resolution * (1 + 1e-9)
    if hasattr(env, "index"):  # exact: the cycle part is the adherence set
        eligible = set(range(env.index, env.index + env.period))
    else:
        eligible = {i for i, el in enumerate(env.elements)
                    if el.is_limit or el.provenance == "composite"}
    report = []
    all_cont = True
    for el_idx, el in enumerate(env.elements):
        imgs = el.images
        a = model.apply_to_indices(imgs, iu[0])
        b = model.apply_to_indices(imgs, iu[1])
        img_d = model.image_pair_dist(a, b)
        entry = {"element": env.elements[el_idx].name, "moduli": {}}
        discont = False
        for eps in eps_grid:
            viol = img_d >= eps
            delta = float(base[viol].min()) if viol.any() else math.inf
            entry["moduli"][eps] = None if math.isinf(delta) else delta
            if delta <= scale:
                discont = True
        entry["adherence"] = el_idx in eligible
        entry["continuous"] = not discont
        if el_idx in eligible:
            all_cont &= not discont
        report.append(entry)
    worst = min(
        (m for e in report for m in e["moduli"].values() if m is not None),
        default=None,
    )
    return {"all_elements_continuous": all_cont, "worst_modulus": worst,
            "elements": report}


def distal_semiflow_check(model: FiniteModel) -> dict:
    """Distality of a finite semicascade and the theorem consequences:
    pointwise almost periodicity and surjectivity must follow exactly."""
    if not isinstance(model, FiniteModel):
        raise InvalidParameterError("semiflow check needs a finite-exact model")
    env = envelope_mod.exact_envelope(model)
    distal = all(
        len(set(int(v) for v in el.images)) == model.n_points for el in env.elements
    )
    table = model.map_table
    surjective = len(set(int(v) for v in table)) == model.n_points
    pap = all(_on_cycle(table, x) for x in range(model.n_points))
    return {
        "distal": distal,
        "pointwise_almost_periodic": pap,
        "surjective": surjective,
        "consequences_hold": (not distal) or (pap and surjective),
    }


def _on_cycle(table, x) -> bool:
    seen = set()
    cur = x
    while cur not in seen:
        seen.add(cur)
        cur = int(table[cur])
    cycle = set()
    probe = cur
    while probe not in cycle:
        cycle.add(probe)
        probe = int(table[probe])
    return x in cycle
