import numpy as np
import pytest

from ellis import algebra, envelope, properties, spaces, symbolic
from ellis.properties import (
    OpenSet,
    ball,
    classify_transitivity,
    distal_semiflow_check,
    equicontinuity_scan,
    hitting_set,
    hyper_equicontinuity_crosscheck,
    orbit_closure_equicontinuity,
    recurrence_report,
    rigidity_battery,
    strong_transitivity_check,
    wap_proxy_check,
)


def finite(table, inverse=None):
    n = len(table)
    coords = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    return spaces.FiniteModel(
        "m", {}, coords,
        lambda a, b, c=coords: np.abs(c[np.asarray(a)] - c[np.asarray(b)]),
        table, inverse, "interval")


# -- hitting sets ---------------------------------------------------------------


def test_hitting_identity():
    ident = spaces.load_example("identity", n=5)
    u = ball(2, 0.05)
    assert hitting_set(ident, u, u, 10) == list(range(1, 11))


def test_hitting_two_shift_cylinders():
    # oracle: for the full shift any non-overlapping placement is realizable
    full2 = symbolic.full_shift(2)
    assert hitting_set(full2, "1", "0", 10) == list(range(1, 11))


def test_hitting_disjoint_invariant_circles():
    dc = spaces.load_example("double-circle-rotation", grid=12)
    u = ball(0, 0.1)          # on circle r=1
    v = ball(12, 0.1)         # on circle r=2
    assert hitting_set(dc, u, v, 30) == []


def test_empty_open_set_rejected():
    ident = spaces.load_example("identity", n=5)
    with pytest.raises(spaces.InvalidParameterError):
        ball(0, -1.0).resolve(ident)


# -- transitivity ------------------------------------------------------------------


def test_classify_two_shift_mixing():
    out = classify_transitivity(symbolic.full_shift(2), 50, cylinder_length=3)
    assert out["verdicts"]["mixing"].verdict == "holds"
    assert out["verdicts"]["weakly_mixing"].verdict == "holds"
    assert out["verdicts"]["transitive"].verdict == "holds"
    assert out["chain_ok"]


def test_classify_golden_mean_mixing():
    out = classify_transitivity(symbolic.golden_mean_shift(), 50, cylinder_length=3)
    assert out["verdicts"]["mixing"].verdict == "holds"


def test_classify_identity_not_transitive():
    ident = spaces.load_example("identity", n=5)
    out = classify_transitivity(ident, 20)
    assert out["verdicts"]["transitive"].verdict == "fails"
    assert out["verdicts"]["mixing"].verdict == "fails"
    assert out["chain_ok"]


def test_classify_rotation_transitive_not_mixing():
    rot = spaces.load_example("irrational-rotation", grid=24)
    out = classify_transitivity(rot, 96)
    assert out["verdicts"]["transitive"].verdict == "holds"
    assert out["verdicts"]["mixing"].verdict == "fails"
    assert out["chain_ok"]


# -- strong transitivity --------------------------------------------------------------


def test_strong_transitivity_cycle_and_square():
    cyc = finite([1, 2, 0], [2, 0, 1])
    out = strong_transitivity_check(cyc, 10)
    assert out["strongly_transitive"].verdict == "holds"
    assert out["minimal"] and out["agrees_with_minimality"]

    sq = spaces.snap_to_finite(spaces.load_example("square-map", grid=51))
    out2 = strong_transitivity_check(sq, 60)
    assert out2["strongly_transitive"].verdict == "fails"


def test_strong_transitivity_equals_minimality_on_invertible():
    rng = np.random.default_rng(9)
    rot = spaces.load_example("irrational-rotation", grid=18)
    out = strong_transitivity_check(rot, 40)
    assert out["strongly_transitive"].verdict == "holds" and out["minimal"]
    for _ in range(10):
        n = int(rng.integers(3, 9))
        perm = rng.permutation(n)
        model = finite(perm, np.argsort(perm))
        rep = strong_transitivity_check(model, 2 * n)
        assert rep["agrees_with_minimality"]


# -- equicontinuity --------------------------------------------------------------------


def test_rotation_equicontinuous_everywhere():
    rot = spaces.load_example("irrational-rotation", grid=36)
    out = equicontinuity_scan(rot, [0.25, 0.5], 100)
    assert len(out["per_epsilon"][0.25]["equicontinuity_points"]) == 36
    assert out["ae"] and not out["sensitive"]


def test_two_shift_window_sensitive():
    win = spaces.sample_window_model(count=120, radius=48, seed=3)
    out = equicontinuity_scan(win, [0.25, 0.49], 96)
    assert out["per_epsilon"][0.25]["equicontinuity_points"] == []
    assert out["sensitive"] and not out["ae"]


def test_square_map_ae_with_interior_points():
    sq = spaces.load_example("square-map", grid=21)
    out = equicontinuity_scan(sq, [0.5], 40)
    pts = out["per_epsilon"][0.5]["equicontinuity_points"]
    assert 20 not in pts          # x = 1 is not an equicontinuity point
    assert set(range(15)) <= set(pts)
    assert out["ae"]


def test_hyper_crosscheck_square_and_rotation():
    sq = spaces.load_example("square-map", grid=21)
    out = hyper_equicontinuity_crosscheck(sq, 2, [0.5], 40)
    assert out["base_ae"] and out["hyper_ae"] and out["agree"]
    rot = spaces.load_example("irrational-rotation", grid=36)
    out2 = hyper_equicontinuity_crosscheck(rot, 2, [0.5], 80)
    assert out2["base_ae"] and out2["hyper_ae"] and out2["agree"]


def test_radial_slice_not_equicontinuous_in_orbit_closure():
    # base stack is locally benign but the full radial slice fails inside its
    # own induced orbit closure
    stack = spaces.load_example("dyadic-circle-stack", levels=5, mult=16)
    base = equicontinuity_scan(stack, [0.5], 64)
    assert base["ae"]
    g = 2 ** 5 * 16
    members = [0] + [1 + j * g for j in range(6)]  # center plus one point per circle
    rep = orbit_closure_equicontinuity(stack, members, 0.5, 64)
    assert not rep["equicontinuous"]
    assert rep["orbit_size"] == 32


# -- rigidity ---------------------------------------------------------------------------


def test_rigidity_rotation_uniform():
    rot = spaces.load_example("irrational-rotation", grid=34)
    out = rigidity_battery(rot, 512, 0.02)
    assert out["uniformly_rigid"].verdict == "holds"
    assert out["full_return_times"][0] == 34
    assert out["chain_ok"]


def test_rigidity_dyadic_inward_rigid_not_uniform():
    m = spaces.load_example("dyadic-circle-stack-inward")  # levels 8
    out = rigidity_battery(m, 512, 0.02)
    assert out["rigid"].verdict == "holds"
    witness = out["rigid"].witnesses[0]
    assert witness & (witness - 1) == 0  # a power of two
    out5 = rigidity_battery(m, 512, 0.5)
    assert out5["uniformly_rigid"].verdict == "fails"
    assert out5["chain_ok"] and out["chain_ok"]


def test_rigidity_two_shift_not_weakly():
    win = spaces.sample_window_model(count=200, radius=160, seed=1)
    out = rigidity_battery(win, 150, 0.4)
    assert out["weakly_rigid"].verdict == "fails"
    assert out["rigid"].verdict == "fails"


def test_rigidity_witness_monotone_in_horizon():
    rot = spaces.load_example("irrational-rotation", grid=34)
    small = rigidity_battery(rot, 140, 0.02)
    large = rigidity_battery(rot, 512, 0.02)
    assert small["rigid"].verdict == "holds"
    assert large["rigid"].witnesses[0] == small["rigid"].witnesses[0]


def test_weak_rigidity_matches_identity_isolation_on_catalog():
    cases = {
        "square-map": {"grid": 201},
        "neg-cube": {"grid": 201},
        "identity": {},
        "irrational-rotation": {"grid": 34},
        "double-circle-rotation": {"grid": 24},
        "dyadic-circle-stack": {"levels": 4, "mult": 4},
        "dyadic-circle-stack-inward": {"levels": 5, "mult": 2},
        "triadic-circle-stack": {"levels": 2, "mult": 2},
        "periodic-stack": {"n": 3, "truncate": 20},
        "periodic-union": {"n": 2, "truncate": 15},
        "isolated-ones-subshift": {"truncate": 8},
        "annulus-skew": {"radial": 3, "grid": 18},
    }
    horizon, tau = 128, 0.02
    for name, params in cases.items():
        model = spaces.load_example(name, **params)
        bat = rigidity_battery(model, horizon, tau)
        rng = "two-sided" if model.invertible else "forward"
        env = envelope.approx_envelope(model, horizon, tau, rng, close_table=False)
        iso = envelope.identity_isolated(env)
        assert (bat["weakly_rigid"].verdict == "holds") == (not iso["isolated"]), name
        assert bat["chain_ok"], name


def test_not_isolated_implies_all_points_recurrent():
    for name, params in (
        ("irrational-rotation", {"grid": 18}),
        ("dyadic-circle-stack", {"levels": 3, "mult": 4}),
        ("identity", {"n": 4}),
    ):
        model = spaces.load_example(name, **params)
        env = envelope.approx_envelope(model, 64, 0.02, "two-sided", close_table=False)
        assert not envelope.identity_isolated(env)["isolated"]
        rep = recurrence_report(model, 64, 0.02)
        assert all(p["recurrent"] for p in rep["points"])


# -- recurrence --------------------------------------------------------------------------


def test_recurrence_identity():
    ident = spaces.load_example("identity", n=4)
    rep = recurrence_report(ident, 10, 0.01)
    for p in rep["points"]:
        assert p["recurrent"] and p["nonwandering"] and p["essentially_nonwandering"]
        assert p["almost_periodic_gap"] == 1


def test_recurrence_square_interior_not_recurrent():
    sq = spaces.load_example("square-map", grid=41)
    rep = recurrence_report(sq, 60, 0.01)
    interior = rep["points"][20]  # x = 0.5
    assert not interior["recurrent"]
    ends = (rep["points"][0], rep["points"][40])
    assert all(p["recurrent"] for p in ends)


def test_recurrence_periodic_stack():
    st = spaces.load_example("periodic-stack", n=3, truncate=8)
    rep = recurrence_report(st, 40, 0.05)
    for entry in rep["points"]:
        k = st.point_data(entry["point"])["k"]
        if k == "inf":
            assert entry["recurrent"] and entry["nonwandering"]
            assert entry["almost_periodic_gap"] == 3
        elif abs(k) <= 4:
            assert not entry["nonwandering"]


# -- WAP proxy and semiflows -------------------------------------------------------------


def test_wap_proxy_rotation_and_isolated_ones():
    rot = spaces.load_example("irrational-rotation", grid=36)
    rep = wap_proxy_check(rot, envelope.exact_envelope(rot))
    assert rep["all_elements_continuous"]

    iso = spaces.load_example("isolated-ones-subshift", truncate=8)
    rep2 = wap_proxy_check(iso, envelope.exact_envelope(iso))
    assert rep2["all_elements_continuous"]


def test_wap_proxy_square_map_limit_discontinuous():
    sq = spaces.load_example("square-map", grid=101)
    env = envelope.approx_envelope(sq, 40, 1e-2, "two-sided")
    rep = wap_proxy_check(sq, env)
    assert not rep["all_elements_continuous"]
    flagged = {e["element"] for e in rep["elements"]
               if e["adherence"] and not e["continuous"]}
    limit_names = {env.elements[i].name for i in env.limit_elements}
    assert flagged == limit_names


def test_distal_semiflow_check():
    perm = finite([1, 2, 3, 4, 0], [4, 0, 1, 2, 3])
    rep = distal_semiflow_check(perm)
    assert rep["distal"] and rep["pointwise_almost_periodic"] and rep["surjective"]

    const = finite([0, 0])
    rep2 = distal_semiflow_check(const)
    assert not rep2["distal"]
    assert rep2["consequences_hold"]  # vacuous

    rng = np.random.default_rng(4)
    for _ in range(15):
        n = int(rng.integers(2, 9))
        perm_t = rng.permutation(n)
        rep3 = distal_semiflow_check(finite(perm_t, np.argsort(perm_t)))
        assert rep3["distal"] and rep3["consequences_hold"]


def test_distal_model_envelope_group_and_equicontinuous():
    for name, params in (
        ("irrational-rotation", {"grid": 18}),
        ("double-circle-rotation", {"grid": 12}),
        ("dyadic-circle-stack", {"levels": 3, "mult": 8}),
    ):
        model = spaces.load_example(name, **params)
        env = envelope.exact_envelope(model)
        assert algebra.is_group_distal(algebra.from_envelope(env))["is_group"]
        scan = equicontinuity_scan(model, [model.diameter / 4], 64)
        eps = model.diameter / 4
        assert len(scan["per_epsilon"][eps]["equicontinuity_points"]) == model.n_points
