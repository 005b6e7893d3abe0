"""Shift spaces: SFTs, sofic shifts, spacing subshifts, languages, entropy,
mixing classification, periodic spectra, and sliding-block factor codes.

Shifts are represented by their languages and graph presentations; no
infinite sequence is ever materialized.  Subshifts of finite type get a
higher-block graph (deterministic, trimmed to its essential part), labeled
graphs are determinized by subset construction for exact word counting, and
spacing subshifts are expanded to a finite forbidden family with the cutoff
recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import spaces


class ShiftSpecError(ValueError):
    """Malformed subshift specification."""


class RuleUndefinedError(KeyError):
    """Sliding-block rule applied outside its domain language."""


# ---------------------------------------------------------------------------
# presentations
# ---------------------------------------------------------------------------


def _essential_trim(states, edges):
    """Iteratively drop states without both in- and out-edges.

    ``edges``: list of (src, symbol, dst).  Returns (kept state ids, edges).
    """
    alive = set(range(len(states)))
    while True:
        has_out = {s for s, _, _ in edges if s in alive}
        has_in = {t for _, _, t in edges if t in alive}
        keep = {s for s in alive if s in has_out and s in has_in}
        edges = [(s, a, t) for s, a, t in edges if s in keep and t in keep]
        if keep == alive:
            return sorted(alive), edges
        alive = keep


@dataclass
class _Presentation:
    """Graph presentation driving all exact language computations.

    ``delta`` maps (state, symbol) -> frozenset of successors; ``starts`` is
    the single start used for deterministic word counting: for SFTs the word
    itself determines its start state, so counting runs over the block graph;
    for general labeled graphs we count on the subset automaton instead.
    """

    n_states: int
    delta: dict
    deterministic: bool
    block_length: int        # m such that words of length >= m fix their path (SFT); 0 for subset automata
    state_words: list | None  # block-graph state words (SFT only)
    adjacency: np.ndarray

    def read(self, state_set: frozenset, word) -> frozenset:
        cur = state_set
        for sym in word:
            nxt = set()
            for s in cur:
                nxt |= self.delta.get((s, sym), frozenset())
            if not nxt:
                return frozenset()
            cur = frozenset(nxt)
        return cur


def _block_presentation(alphabet, forbidden):
    """Higher-block graph of the SFT over ``alphabet`` avoiding ``forbidden``."""
    forb = set(forbidden)
    maxlen = max((len(w) for w in forb), default=1)
    m = max(maxlen - 1, 1)

    def ok(word):
        return not any(word[i : i + len(f)] == f for f in forb for i in range(len(word) - len(f) + 1))

    states = [w for w in ("".join(t) for t in product(alphabet, repeat=m)) if ok(w)]
    edges = []
    for i, u in enumerate(states):
        for a in alphabet:
            w = u + a
            if ok(w):
                v = w[-m:]
                if v in states:
                    edges.append((i, a, states.index(v)))
    alive, edges = _essential_trim(states, edges)
    remap = {s: i for i, s in enumerate(alive)}
    kept_states = [states[s] for s in alive]
    delta = {}
    adj = np.zeros((len(alive), len(alive)), dtype=np.int64)
    for s, a, t in edges:
        delta.setdefault((remap[s], a), set()).add(remap[t])
        adj[remap[s], remap[t]] += 1
    delta = {k: frozenset(v) for k, v in delta.items()}
    return _Presentation(len(alive), delta, True, m, kept_states, adj)


def _subset_presentation(nfa_states, nfa_edges):
    """Subset automaton from the all-states start of an essential NFA."""
    alive, edges = _essential_trim(list(range(nfa_states)), nfa_edges)
    delta = {}
    for s, a, t in edges:
        delta.setdefault((s, a), set()).add(t)
    symbols = sorted({a for _, a, _ in edges})
    start = frozenset(alive)
    subsets = [start]
    index = {start: 0}
    trans = {}
    queue = [start]
    while queue:
        cur = queue.pop()
        for a in symbols:
            nxt = set()
            for s in cur:
                nxt |= delta.get((s, a), set())
            if not nxt:
                continue
            nxt = frozenset(nxt)
            if nxt not in index:
                index[nxt] = len(subsets)
                subsets.append(nxt)
                queue.append(nxt)
            trans[(index[cur], a)] = frozenset({index[nxt]})
    adj = np.zeros((len(subsets), len(subsets)), dtype=np.int64)
    for (s, _a), ts in trans.items():
        for t in ts:
            adj[s, t] += 1
    nfa_delta = {}
    for s, a, t in edges:
        nfa_delta.setdefault((s, a), set()).add(t)
    nfa_delta = {k: frozenset(v) for k, v in nfa_delta.items()}
    pres = _Presentation(len(subsets), trans, True, 0, None, adj)
    pres.nfa_delta = nfa_delta
    pres.nfa_states = alive
    return pres


# ---------------------------------------------------------------------------
# subshift
# ---------------------------------------------------------------------------


@dataclass
class Subshift:
    alphabet: tuple
    kind: str            # forbidden | edge-graph | labeled-graph | spacing
    payload: dict
    one_sided: bool = False
    presentation: _Presentation = field(repr=False, default=None)

    # -- language ------------------------------------------------------------

    def words(self, n: int) -> set[str]:
        if n == 0:
            return {""}
        p = self.presentation
        if p.block_length:  # SFT block graph
            m = p.block_length
            if n <= m:
                return {w[:n] for w in p.state_words}
            out = set()

            def walk(origin, state, suffix):
                if len(suffix) == n - m:
                    out.add(origin + suffix)
                    return
                for a in self.alphabet:
                    for t in p.delta.get((state, a), ()):
                        walk(origin, t, suffix + a)

            for s in range(p.n_states):
                walk(p.state_words[s], s, "")
            return out
        out = set()

        def walk2(state, word):
            if len(word) == n:
                out.add(word)
                return
            for a in self.alphabet:
                for t in p.delta.get((state, a), ()):
                    walk2(t, word + a)

        walk2(0, "")
        return out

    def count_words(self, n: int) -> int:
        if n == 0:
            return 1
        p = self.presentation
        if p.block_length:
            m = p.block_length
            if n <= m:
                return len({w[:n] for w in p.state_words})
            vec = np.ones(p.n_states, dtype=object)
            power = np.linalg.matrix_power(p.adjacency.astype(object), n - m)
            return int(np.ones(p.n_states, dtype=object) @ power @ vec)
        power = np.linalg.matrix_power(p.adjacency.astype(object), n)
        return int(power[0].sum())

    def word_in_language(self, word: str) -> bool:
        p = self.presentation
        if p.block_length:
            start = frozenset(range(p.n_states))
            # words shorter than the block window: prefix of some state word
            if len(word) <= p.block_length:
                return any(w.startswith(word) for w in p.state_words)
            # align: the block graph reads one symbol per edge beyond the window
            m = p.block_length
            try:
                s0 = p.state_words.index(word[:m])
            except ValueError:
                return False
            return bool(p.read(frozenset({s0}), word[m:]))
        return bool(p.read(frozenset({0}), word))

    def periodic_count(self, n: int) -> int:
        """Number of points with period dividing n."""
        p = self.presentation
        if self.kind in ("forbidden", "edge-graph", "spacing"):
            return int(np.trace(np.linalg.matrix_power(p.adjacency.astype(object), n)))
        # sofic: count words w of length n whose periodic extension lies in X
        count = 0
        for w in self.words(n):
            if self._periodic_word_ok(w):
                count += 1
        return count

    def _periodic_word_ok(self, w: str) -> bool:
        # the w-periodic point exists iff the "read w" relation has a cycle
        p = self.presentation
        nfa = p.nfa_delta
        states = p.nfa_states
        idx = {s: i for i, s in enumerate(states)}
        mat = np.zeros((len(states), len(states)), dtype=bool)
        for s in states:
            cur = {s}
            for a in w:
                nxt = set()
                for q in cur:
                    nxt |= nfa.get((q, a), frozenset())
                cur = nxt
                if not cur:
                    break
            for t in cur:
                mat[idx[s], idx[t]] = True
        power = mat.copy()
        for _ in range(len(states)):
            if power.diagonal().any():
                return True
            power = power @ mat
        return False

    def to_json(self) -> dict:
        out = {"schema": "ellis.shift/1", "alphabet": list(self.alphabet),
               "kind": self.kind, "one_sided": self.one_sided}
        out.update(self.payload)
        return out


def build_subshift(spec: dict) -> Subshift:
    """Canonicalize a shift spec.

    Accepted kinds: ``forbidden`` {alphabet, forbidden}, ``edge-graph``
    {matrix}, ``labeled-graph`` {states, edges, right_resolving?}, ``spacing``
    {allowed_gaps | gap_modulus, cutoff}.
    """
    kind = spec.get("kind")
    one_sided = bool(spec.get("one_sided", False))
    if kind == "forbidden":
        alphabet = tuple(spec["alphabet"])
        if not alphabet:
            raise ShiftSpecError("empty alphabet")
        if any(len(a) != 1 for a in alphabet):
            raise ShiftSpecError("symbols must be single characters")
        forbidden = tuple(spec.get("forbidden", ()))
        for w in forbidden:
            if not w or any(c not in alphabet for c in w):
                raise ShiftSpecError(f"forbidden block {w!r} not over the alphabet")
        pres = _block_presentation(alphabet, forbidden)
        return Subshift(alphabet, kind, {"forbidden": list(forbidden)}, one_sided, pres)
    if kind == "edge-graph":
        matrix = np.asarray(spec["matrix"], dtype=np.int64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ShiftSpecError("adjacency matrix must be square")
        if not np.isin(matrix, (0, 1)).all():
            raise ShiftSpecError("adjacency entries must be 0/1")
        n = matrix.shape[0]
        if n > 36:
            raise ShiftSpecError("edge-graph alphabet limited to 36 states")
        alphabet = tuple("0123456789abcdefghijklmnopqrstuvwxyz"[:n])
        forbidden = tuple(
            alphabet[i] + alphabet[j] for i in range(n) for j in range(n) if not matrix[i, j]
        )
        pres = _block_presentation(alphabet, forbidden)
        return Subshift(alphabet, kind, {"matrix": matrix.tolist()}, one_sided, pres)
    if kind == "labeled-graph":
        states = list(spec["states"])
        edges_in = [tuple(e) for e in spec.get("edges", spec.get("labeled_edges", ()))]
        if not edges_in:
            raise ShiftSpecError("labeled graph needs edges")
        symbols = sorted({a for _, a, _ in edges_in})
        if any(len(a) != 1 for a in symbols):
            raise ShiftSpecError("labels must be single characters")
        index = {s: i for i, s in enumerate(states)}
        edges = [(index[s], a, index[t]) for s, a, t in edges_in]
        rr = True
        seen = set()
        for s, a, _ in edges:
            if (s, a) in seen:
                rr = False
            seen.add((s, a))
        pres = _subset_presentation(len(states), edges)
        payload = {"states": states, "edges": [list(e) for e in edges_in],
                   "right_resolving": bool(spec.get("right_resolving", rr))}
        return Subshift(tuple(symbols), kind, payload, one_sided, pres)
    if kind == "spacing":
        cutoff = int(spec.get("cutoff", 12))
        if cutoff < 1:
            raise ShiftSpecError("spacing cutoff must be >= 1")
        if "allowed_gaps" in spec:
            allowed = {int(g) for g in spec["allowed_gaps"]}
        elif "gap_modulus" in spec:
            k = int(spec["gap_modulus"])
            allowed = {g for g in range(cutoff + 1) if g % k == 0}
        else:
            raise ShiftSpecError("spacing spec needs allowed_gaps or gap_modulus")
        forbidden = tuple(
            "1" + "0" * g + "1" for g in range(cutoff + 1) if g not in allowed
        )
        pres = _block_presentation(("0", "1"), forbidden)
        payload = {"allowed_gaps": sorted(allowed), "cutoff": cutoff,
                   "truncation": "gaps above the cutoff are unconstrained"}
        return Subshift(("0", "1"), kind, payload, one_sided, pres)
    raise ShiftSpecError(f"unknown shift kind {kind!r}")


def full_shift(r: int = 2) -> Subshift:
    names = "0123456789"[:r]
    return build_subshift({"kind": "forbidden", "alphabet": list(names), "forbidden": []})


def golden_mean_shift() -> Subshift:
    return build_subshift({"kind": "forbidden", "alphabet": ["0", "1"], "forbidden": ["11"]})


def even_shift(presentation: str = "labeled") -> Subshift:
    # two-state right-resolving presentation: 1-loops at A, 0-edges A<->B
    return build_subshift({
        "kind": "labeled-graph",
        "states": ["A", "B"],
        "edges": [["A", "1", "A"], ["A", "0", "B"], ["B", "0", "A"]],
        "right_resolving": True,
    })


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def language(shift: Subshift, n: int) -> set[str]:
    if n < 0:
        raise ShiftSpecError("word length must be >= 0")
    return shift.words(n)


def dominant_eigenvalue(matrix: np.ndarray, rel_tol: float = 1e-10, max_iter: int = 100_000):
    """Spectral radius of a nonnegative matrix by power iteration.

    Iterates on A + I so periodic structure cannot stall convergence; the
    shift is subtracted from the Rayleigh estimate.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    if n == 0:
        return 0.0
    shifted = a + np.eye(n)
    v = np.ones(n) / math.sqrt(n)
    prev = 0.0
    for _ in range(max_iter):
        w = shifted @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        est = float(v @ shifted @ v)
        if abs(est - prev) <= rel_tol * max(1.0, abs(est)):
            return est - 1.0
        prev = est
    return prev - 1.0


def _strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    if n == 0:
        return False

    def reach(mat):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            s = frontier.pop()
            for t in np.nonzero(mat[s])[0]:
                if not seen[t]:
                    seen[t] = True
                    frontier.append(int(t))
        return seen

    return bool(reach(adj).all() and reach(adj.T).all())


def _graph_period(adj: np.ndarray) -> int:
    """gcd of cycle lengths (0 when the graph has no cycle)."""
    n = adj.shape[0]
    period = 0
    seen = np.full(n, -1, dtype=np.int64)
    for root in range(n):
        if seen[root] >= 0:
            continue
        seen[root] = 0
        frontier = [root]
        while frontier:
            s = frontier.pop()
            for t in np.nonzero(adj[s])[0]:
                if seen[t] < 0:
                    seen[t] = seen[s] + 1
                    frontier.append(int(t))
                else:
                    period = math.gcd(period, int(seen[s] + 1 - seen[t]))
    return abs(period)


def classify_sft(shift: Subshift) -> dict:
    adj = shift.presentation.adjacency
    irreducible = _strongly_connected(adj)
    period = _graph_period(adj)
    return {
        "irreducible": irreducible,
        "mixing": bool(irreducible and period == 1),
        "period": period,
    }


def entropy_estimates(shift: Subshift, n_max: int) -> dict:
    if n_max < 2:
        raise ShiftSpecError("n_max must be >= 2")
    counts = [shift.count_words(n) for n in range(1, n_max + 1)]
    seq = [(n, math.log(c) / n if c else -math.inf) for n, c in zip(range(1, n_max + 1), counts)]
    ratio = (
        math.log(counts[-1] / counts[-2]) if counts[-1] and counts[-2] else -math.inf
    )
    adj = shift.presentation.adjacency
    irreducible = _strongly_connected(adj)
    lam = dominant_eigenvalue(adj)
    return {
        "counts": counts,
        "sequence": seq,
        "ratio_estimate": ratio,
        "spectral": math.log(lam) if lam > 0 else -math.inf,
        "reducible_warning": not irreducible,
    }


def _mobius(n: int) -> int:
    if n == 1:
        return 1
    result, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    if m > 1:
        result = -result
    return result


def periodic_spectrum(shift: Subshift, n_max: int) -> dict[int, int]:
    """Points of each least period 1..n_max (counts of points, not orbits)."""
    per_div = {n: shift.periodic_count(n) for n in range(1, n_max + 1)}
    out = {}
    for n in range(1, n_max + 1):
        total = 0
        for d in range(1, n + 1):
            if n % d == 0:
                total += _mobius(n // d) * per_div[d]
        if total:
            out[n] = total
    return out


def boyle_precondition(x: Subshift, y: Subshift, n_max: int) -> dict:
    """Check the hypotheses of the periodic-point/entropy factor criterion.

    Never claims a factor map exists; reports whether every least period of
    ``x`` (up to the horizon) is divisible by some least period of ``y`` and
    the spectral entropy gap h(x) - h(y).
    """
    px = periodic_spectrum(x, n_max)
    py = periodic_spectrum(y, n_max)
    per_divides = all(
        any(p % q == 0 for q in py) for p in px
    ) if px else True
    hx = entropy_estimates(x, max(2, n_max))["spectral"]
    hy = entropy_estimates(y, max(2, n_max))["spectral"]
    gap = hx - hy
    return {
        "per_divides": per_divides,
        "entropy_gap": gap,
        "hypotheses_hold": bool(per_divides and gap > 0),
        "periods_x": px,
        "periods_y": py,
    }


# ---------------------------------------------------------------------------
# sliding-block codes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlidingBlockCode:
    memory: int
    anticipation: int
    rule: dict  # window word -> output symbol

    @property
    def window(self) -> int:
        return self.memory + self.anticipation + 1


def apply_block_code(code: SlidingBlockCode, word: str) -> str:
    w = code.window
    if len(word) < w:
        raise RuleUndefinedError(f"word shorter than the {w}-window")
    out = []
    for i in range(len(word) - w + 1):
        win = word[i : i + w]
        if win not in code.rule:
            raise RuleUndefinedError(win)
        out.append(code.rule[win])
    return "".join(out)


def verify_factor(code: SlidingBlockCode, domain: Subshift, codomain: Subshift, n: int) -> bool:
    """Every domain n-word must map into the codomain's (n - m - a)-language."""
    drop = code.memory + code.anticipation
    if n <= drop:
        raise ShiftSpecError("n must exceed memory + anticipation")
    for w in domain.words(n):
        img = apply_block_code(code, w)
        if not codomain.word_in_language(img):
            return False
    return True


def golden_to_even_code() -> SlidingBlockCode:
    """2-block rule factoring the no-11 shift onto the even-gaps shift."""
    return SlidingBlockCode(memory=0, anticipation=1,
                            rule={"00": "1", "01": "0", "10": "0"})


def cylinder_metric(x_word: str, y_word: str) -> dict:
    """Sequence metric restricted to two central windows of equal odd length.

    A disagreement at the center (radius-0 window) already differs, giving
    distance 1; windows that agree everywhere are flagged indistinguishable
    at this horizon and given distance 0.
    """
    if len(x_word) != len(y_word):
        raise ShiftSpecError("central words must have equal length")
    if len(x_word) % 2 == 0:
        raise ShiftSpecError("central words must have odd length")
    r = len(x_word) // 2

    def sym(w, pos):
        return w[pos + r]

    k = None
    for radius in range(r + 1):
        if sym(x_word, -radius) != sym(y_word, -radius) or sym(x_word, radius) != sym(y_word, radius):
            k = radius - 1
            break
    if k is None:
        return {"distance": 0.0, "indistinguishable_at_horizon": True, "window_radius": r}
    return {"distance": 2.0 ** (-(k + 1)), "indistinguishable_at_horizon": False, "window_radius": r}


# ---------------------------------------------------------------------------
# cylinder hitting sets (used by the property checkers on shift models)
# ---------------------------------------------------------------------------


def _merge_words(u: str, v: str, offset: int):
    """Overlay v at ``offset`` over u; None on conflict."""
    length = max(len(u), offset + len(v))
    out = []
    for i in range(length):
        a = u[i] if i < len(u) else None
        b = v[i - offset] if 0 <= i - offset < len(v) else None
        if a is not None and b is not None and a != b:
            return None
        out.append(a if a is not None else b)
    if any(c is None for c in out):
        # fill the gap with every completion later; keep placeholder
        return out
    return out


def cylinder_hitting(shift: Subshift, u: str, v: str, horizon: int) -> list[int]:
    """n in [1, horizon] such that the shift of cylinder [u] meets [v]."""
    p = shift.presentation
    if p.block_length:
        all_states = frozenset(range(p.n_states))
        read = p.read
    else:
        all_states = frozenset(shift.presentation.nfa_states)

        def read(ss, word):
            cur = ss
            for a in word:
                nxt = set()
                for s in cur:
                    nxt |= p.nfa_delta.get((s, a), frozenset())
                if not nxt:
                    return frozenset()
                cur = frozenset(nxt)
            return cur

    def successors(ss):
        nxt = set()
        table = p.delta if p.block_length else p.nfa_delta
        for s in ss:
            for a in shift.alphabet:
                nxt |= table.get((s, a), frozenset())
        return frozenset(nxt)

    out = []
    # overlap region: u and v constrain a common window
    for n in range(1, min(len(u), horizon + 1)):
        merged = _merge_words(u, v, n)
        if merged is None:
            continue
        slots = [i for i, c in enumerate(merged) if c is None]
        for fill in product(shift.alphabet, repeat=len(slots)):
            w = list(merged)
            for i, c in zip(slots, fill):
                w[i] = c
            if shift.word_in_language("".join(w)):
                out.append(n)
                break
    # beyond the overlap: one incremental frontier walk
    cur = read(all_states, u)
    for n in range(len(u), horizon + 1):
        if n > len(u):
            cur = successors(cur)
        if not cur:
            break
        if read(cur, v):
            out.append(n)
    return [n for n in sorted(set(out)) if 1 <= n <= horizon]


# ---------------------------------------------------------------------------
# window models (finite samples of a shift as phase-space models)
# ---------------------------------------------------------------------------


def window_model(shift: Subshift, count: int, radius: int, seed: int = 0,
                 name: str | None = None) -> spaces.WindowSampleModel:
    """Seeded finite sample of ``shift`` as a window phase-space model.

    Sequences are generated by random walks on the presentation graph, then
    padded with the first alphabet symbol outside the window; only binary
    alphabets whose padding symbol is legal make faithful samples, which is
    all this artifact needs.
    """
    if len(shift.alphabet) != 2 or set(shift.alphabet) != {"0", "1"}:
        raise ShiftSpecError("window models require the binary alphabet 0/1")
    rng = np.random.default_rng(seed)
    p = shift.presentation
    width = 2 * radius + 1
    bits = np.zeros((count, width), dtype=np.uint8)
    for i in range(count):
        state = int(rng.integers(0, p.n_states))
        row = []
        while len(row) < width:
            options = [(a, t) for a in shift.alphabet
                       for t in p.delta.get((state, a), ())]
            if not options:
                state = int(rng.integers(0, p.n_states))
                row = []
                continue
            a, t = options[int(rng.integers(0, len(options)))]
            row.append(1 if a == "1" else 0)
            state = t
        bits[i] = row
    pad = radius + 2
    return spaces.WindowSampleModel(
        name or f"window({count})", {"count": count, "radius": radius, "seed": seed},
        bits, radius, pad,
    )


def two_shift_window_model(count: int, radius: int, seed: int = 0,
                           horizon_pad: int = 2) -> spaces.WindowSampleModel:
    """Full 2-shift sample: iid bits on the window, zero outside."""
    return spaces.sample_window_model(count=count, radius=radius, seed=seed,
                                      pad_extra=horizon_pad)


def emit_language_csv(shift: Subshift, n_max: int) -> str:
    est = entropy_estimates(shift, n_max)
    lines = ["n,count,log_count_over_n"]
    for (n, val), c in zip(est["sequence"], est["counts"]):
        lines.append(f"{n},{c},{val:.12f}")
    return "\n".join(lines) + "\n"
