"""Finite right-topological semigroup analysis over composition tables.

Exact tables (from finite-exact envelopes) are validated strictly; tables
with snap error (approximate envelopes) run every check in report mode,
since tolerance identification can break associativity at the resolution
boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class TableError(ValueError):
    """Composition table fails a structural invariant in strict mode."""


@dataclass
class FiniteSemigroup:
    table: np.ndarray
    identity: int | None = None
    generator: int | None = None
    source: str = "table"          # table | exact | approx
    associativity_violations: int = 0

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)
        n = self.size
        if self.table.shape != (n, n):
            raise TableError("table must be square")
        if n and ((self.table < 0).any() or (self.table >= n).any()):
            raise TableError("table is not closed")
        self.associativity_violations = self._associativity_scan()
        if self.associativity_violations and self.source != "approx":
            raise TableError(
                f"{self.associativity_violations} associativity violations in a strict table"
            )

    @property
    def size(self) -> int:
        return int(self.table.shape[0])

    def _associativity_scan(self, sample: int = 4096, seed: int = 0) -> int:
        n = self.size
        if n == 0:
            return 0
        t = self.table
        if n <= 64:
            lhs = t[t, :]              # (i,j,k) -> t[t[i,j], k]
            rhs = t[:, t]              # (i,j,k) -> t[i, t[j,k]]
            return int((lhs != rhs).sum())
        rng = np.random.default_rng(seed)
        i, j, k = (rng.integers(0, n, sample) for _ in range(3))
        return int((t[t[i, j], k] != t[i, t[j, k]]).sum())

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def to_json(self) -> dict:
        return {
            "schema": "ellis.semigroup/1",
            "size": self.size,
            "table": self.table.tolist(),
            "identity": self.identity,
            "generator": self.generator,
            "source": self.source,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FiniteSemigroup":
        return cls(np.asarray(doc["table"]), doc.get("identity"),
                   doc.get("generator"), doc.get("source", "table"))


def from_envelope(env) -> FiniteSemigroup:
    if env.table is None or (env.table < 0).any():
        raise TableError("envelope has no closed composition table")
    source = "exact" if type(env).__name__ == "ExactEnvelope" else "approx"
    return FiniteSemigroup(env.table, env.identity_index, env.generator_index, source)


# ---------------------------------------------------------------------------
# idempotents and ideals
# ---------------------------------------------------------------------------


def idempotents(s: FiniteSemigroup) -> list[int]:
    t = s.table
    return [int(i) for i in range(s.size) if t[i, i] == i]


def minimal_left_ideals(s: FiniteSemigroup) -> list[tuple[int, ...]]:
    """Inclusion-minimal principal left ideals S.a (with a adjoined)."""
    t = s.table
    principal = []
    for a in range(s.size):
        ideal = frozenset(int(v) for v in t[:, a]) | {a}
        principal.append(ideal)
    minimal = []
    for ideal in principal:
        if any(other < ideal for other in principal):
            continue
        if ideal not in minimal:
            minimal.append(ideal)
    out = sorted((tuple(sorted(i)) for i in set(minimal)), key=lambda x: (len(x), x))
    return out


@dataclass
class IdealDecomposition:
    minimal_left_ideals: list
    idempotents_per_ideal: list
    groups: dict
    kernel: tuple
    partition_ok: bool
    groups_ok: bool
    ideals_have_idempotents: bool


def kernel_and_groups(s: FiniteSemigroup) -> IdealDecomposition:
    t = s.table
    ideals = minimal_left_ideals(s)
    idem = set(idempotents(s))
    per_ideal = [tuple(sorted(set(i) & idem)) for i in ideals]
    groups = {}
    partition_ok = True
    groups_ok = True
    for ideal, js in zip(ideals, per_ideal):
        seen = set()
        for v in js:
            vi = tuple(sorted({int(t[v, p]) for p in ideal}))
            groups[(ideal, v)] = vi
            if seen & set(vi):
                partition_ok = False
            seen |= set(vi)
            groups_ok &= _is_group_on(t, vi, v)
        if seen != set(ideal):
            partition_ok = False
    kernel = tuple(sorted({p for i in ideals for p in i}))
    return IdealDecomposition(
        [tuple(i) for i in ideals], per_ideal, groups, kernel,
        partition_ok, groups_ok, all(js for js in per_ideal),
    )


def _is_group_on(t, members, identity) -> bool:
    mset = set(members)
    for g in members:
        if t[identity, g] != g or t[g, identity] != g:
            return False
        if any(int(t[g, h]) not in mset for h in members):
            return False
        if not any(t[g, h] == identity and t[h, g] == identity for h in members):
            return False
    return True


def ideal_isomorphism_check(s: FiniteSemigroup, ideal_i, ideal_k) -> dict:
    """Pair an idempotent of I with its partner in K and verify that right
    multiplication by the partner is an equivariant bijection I -> K.

    Both pairing orientations are searched and the successful one recorded.
    """
    t = s.table
    set_i, set_k = set(ideal_i), set(ideal_k)
    js_i = [u for u in idempotents(s) if u in set_i]
    js_k = [v for v in idempotents(s) if v in set_k]
    if not js_i or not js_k:
        return {"isomorphic": False, "reason": "ideal without idempotent"}
    pairing = None
    for u in js_i:
        for v in js_k:
            if t[u, v] == v and t[v, u] == u:
                pairing = (u, v, "uv=v,vu=u")
                break
            if t[u, v] == u and t[v, u] == v:
                pairing = (u, v, "uv=u,vu=v")
                break
        if pairing:
            break
    if pairing is None:
        return {"isomorphic": False, "reason": "no idempotent pairing found"}
    u, v, orientation = pairing
    image = [int(t[p, v]) for p in ideal_i]
    bijective = set(image) == set_k and len(set(image)) == len(ideal_i)
    violations = []
    for sdx in range(s.size):
        for p in ideal_i:
            lhs = t[t[sdx, p], v]
            rhs = t[sdx, t[p, v]]
            if lhs != rhs:
                violations.append((sdx, p))
    return {
        "isomorphic": bool(bijective and not violations),
        "pairing": {"u": u, "v": v, "orientation": orientation},
        "bijective": bijective,
        "equivariance_violations": violations,
    }


def is_group_distal(s: FiniteSemigroup) -> dict:
    t = s.table
    n = s.size
    idem = idempotents(s)
    has_identity = s.identity is not None
    is_group = has_identity
    if has_identity:
        target = np.arange(n)
        for i in range(n):
            if not (np.array_equal(np.sort(t[i]), target)
                    and np.array_equal(np.sort(t[:, i]), target)):
                is_group = False
                break
    unique = len(idem) == 1 and has_identity and idem[0] == s.identity
    return {
        "is_group": bool(is_group),
        "unique_idempotent_is_identity": bool(unique),
        "agree": bool(is_group == unique),
    }


# ---------------------------------------------------------------------------
# proximality
# ---------------------------------------------------------------------------


def _collapse_matrix(model, element, tau: float) -> np.ndarray:
    """Boolean matrix of sample pairs identified by one envelope element."""
    imgs = element.images
    if isinstance(imgs, np.ndarray) and imgs.ndim == 1 and imgs.dtype.kind == "i":
        return np.equal.outer(imgs, imgs)
    arr = np.asarray(imgs, dtype=float)
    n = arr.shape[0]
    flat = arr.reshape(n, -1)
    ii = np.repeat(np.arange(n), n)
    jj = np.tile(np.arange(n), n)
    d = model._raw_dist(flat[ii], flat[jj]).reshape(n, n)
    return d <= tau


def proximal_structure(model, env) -> dict:
    """Proximal pairs, per-ideal relations, and the unique-ideal biconditional.

    A pair is proximal when some envelope element identifies it (within tau
    for sampled models); the relation attached to a minimal left ideal keeps
    the pairs identified by every element of the ideal.
    """
    s = from_envelope(env)
    tau = getattr(env, "tau", 0.0)
    n = model.n_points
    collapse = [_collapse_matrix(model, el, tau) for el in env.elements]
    prox = np.zeros((n, n), dtype=bool)
    for mat in collapse:
        prox |= mat
    ideals = minimal_left_ideals(s)
    relations = []
    for ideal in ideals:
        rel = np.ones((n, n), dtype=bool)
        for el in ideal:
            rel &= collapse[el]
        relations.append(rel)
    closed = prox | np.eye(n, dtype=bool)
    transitive = not ((closed @ closed) & ~closed).any()
    nontrivial = int(prox[~np.eye(n, dtype=bool)].sum()) // 2
    return {
        "pair_count": nontrivial,
        "proximal": prox,
        "ideal_count": len(ideals),
        "per_ideal_pair_counts": [int(r[~np.eye(n, dtype=bool)].sum()) // 2 for r in relations],
        "is_equivalence": bool(transitive),
        "theorem_er_consistent": bool((len(ideals) == 1) == transitive),
        "finitely_proximal": True,
    }


# ---------------------------------------------------------------------------
# periodicity and recurrence inside the envelope
# ---------------------------------------------------------------------------


def _generator_orbit(s: FiniteSemigroup, start: int):
    gen = s.generator
    orbit = [start]
    seen = {start: 0}
    cur = start
    while True:
        cur = int(s.table[gen, cur])
        if cur in seen:
            return orbit, seen[cur]
        seen[cur] = len(orbit)
        orbit.append(cur)


def periodic_element_analysis(env) -> dict:
    """Periodic points of the envelope under left multiplication by the
    generator: their common period, whether each orbit is a minimal left
    ideal, and the 2n count bound."""
    s = from_envelope(env)
    if s.generator is None:
        raise TableError("envelope has no generator element")
    ideals = {frozenset(i) for i in minimal_left_ideals(s)}
    periodic = {}
    for p in range(s.size):
        orbit, entry = _generator_orbit(s, p)
        if entry == 0:  # the orbit returns to p itself
            periodic[p] = len(orbit)
    periods = sorted(set(periodic.values()))
    orbits_minimal = {}
    for p, per in periodic.items():
        orbit, _ = _generator_orbit(s, p)
        orbits_minimal[p] = frozenset(orbit) in ideals
    common = periods[0] if len(periods) == 1 else (math.lcm(*periods) if periods else None)
    bound_ok = (not periodic) or len(periodic) <= 2 * max(periods)
    return {
        "periodic_elements": sorted(periodic),
        "least_periods": {p: periodic[p] for p in sorted(periodic)},
        "all_periods_equal": len(periods) <= 1,
        "common_period": common,
        "orbit_is_minimal_ideal": orbits_minimal,
        "count_bound_ok": bool(bound_ok),
        "count": len(periodic),
    }


def recurrent_idempotent_check(env, horizon: int | None = None) -> dict:
    """Each idempotent should be revisited by the generator orbit; an
    isolated identity is exempted (it is a limit of no nontrivial iterate)."""
    from .envelope import identity_isolated

    s = from_envelope(env)
    if s.generator is None:
        raise TableError("envelope has no generator element")
    horizon = horizon or s.size + 1
    report = {}
    for u in idempotents(s):
        cur = u
        witness = None
        for k in range(1, horizon + 1):
            cur = int(s.table[s.generator, cur])
            if cur == u:
                witness = k
                break
        report[u] = witness
    iso = identity_isolated(env)
    required = {u: w for u, w in report.items()
                if not (u == s.identity and iso["isolated"])}
    return {
        "witnesses": report,
        "identity_exempt": bool(iso["isolated"]),
        "all_required_recurrent": all(w is not None for w in required.values()),
    }


# ---------------------------------------------------------------------------
# randomized equivalence corpus
# ---------------------------------------------------------------------------


def run_equivalence_corpus(count: int = 500, max_points: int = 8, seed: int = 7,
                           power_ns=(2, 3)) -> dict:
    """Exercise the theorem equivalences on random finite-exact models.

    Checks, per model: group <=> unique idempotent = identity <=> no
    nontrivial proximal pair; unique minimal left ideal <=> proximality
    transitive; minimal-ideal pairs isomorphic; power decomposition; an
    idempotent exists; distal consequences (pointwise almost periodic orbits
    and surjectivity).
    """
    from .envelope import envelope_power_decomposition, exact_envelope
    from .spaces import FiniteModel

    rng = np.random.default_rng(seed)
    violations = []
    for trial in range(count):
        n = int(rng.integers(2, max_points + 1))
        invertible = bool(rng.random() < 0.5)
        if invertible:
            table = rng.permutation(n)
            inverse = np.argsort(table)
        else:
            table = rng.integers(0, n, n)
            inverse = np.argsort(table) if sorted(table) == list(range(n)) else None
        coords = np.linspace(0.0, 1.0, n)

        def dist(a, b, coords=coords):
            return np.abs(coords[np.asarray(a)] - coords[np.asarray(b)])

        model = FiniteModel(f"corpus-{trial}", {"seed": seed}, coords, dist,
                            table, inverse, "interval")
        env = exact_envelope(model)
        s = from_envelope(env)
        idem = idempotents(s)
        if not idem:
            violations.append((trial, "nakamura"))
        gd = is_group_distal(s)
        prox = proximal_structure(model, env)
        no_pairs = prox["pair_count"] == 0
        if not (gd["is_group"] == gd["unique_idempotent_is_identity"] == no_pairs):
            violations.append((trial, "distal-equivalences"))
        if not prox["theorem_er_consistent"]:
            violations.append((trial, "unique-ideal-vs-transitivity"))
        ideals = minimal_left_ideals(s)
        for a in range(len(ideals)):
            for b in range(len(ideals)):
                res = ideal_isomorphism_check(s, ideals[a], ideals[b])
                if not res["isomorphic"]:
                    violations.append((trial, f"ideal-isomorphism-{a}-{b}"))
        for pn in power_ns:
            if not envelope_power_decomposition(model, pn)["equal"]:
                violations.append((trial, f"power-decomposition-{pn}"))
        if no_pairs:
            # distal consequences: every orbit is a cycle and the map is onto
            img = set(int(v) for v in table)
            on_cycles = all(_point_on_cycle(table, x) for x in range(n))
            if not (len(img) == n and on_cycles):
                violations.append((trial, "distal-semiflow-consequences"))
    return {"count": count, "violations": violations, "ok": not violations}


def _point_on_cycle(table, x) -> bool:
    seen = set()
    cur = x
    while cur not in seen:
        seen.add(cur)
        cur = int(table[cur])
    # x is on a cycle iff the eventual cycle contains x
    cycle = set()
    probe = cur
    while probe not in cycle:
        cycle.add(probe)
        probe = int(table[probe])
    return x in cycle
