import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ellis import spaces


def test_unknown_name():
    with pytest.raises(spaces.UnknownExampleError):
        spaces.load_example("no-such-model")


def test_invalid_parameter():
    with pytest.raises(spaces.InvalidParameterError):
        spaces.load_example("square-map", grid=1)
    with pytest.raises(spaces.InvalidParameterError):
        spaces.load_example("square-map", bogus=3)


def test_catalog_lists_every_interface_name():
    names = {e["name"] for e in spaces.list_catalog()}
    assert names == {
        "square-map", "neg-cube", "identity", "irrational-rotation",
        "double-circle-rotation", "dyadic-circle-stack",
        "dyadic-circle-stack-inward", "triadic-circle-stack",
        "periodic-stack", "periodic-union", "isolated-ones-subshift",
        "annulus-skew",
    }


def test_catalog_determinism():
    a = spaces.load_example("periodic-stack", n=3, truncate=9).to_json()
    b = spaces.load_example("periodic-stack", n=3, truncate=9).to_json()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    wa = spaces.sample_window_model(count=12, radius=8, seed=5)
    wb = spaces.sample_window_model(count=12, radius=8, seed=5)
    assert np.array_equal(wa.bits, wb.bits)


def test_metric_identity_and_symmetry():
    m = spaces.load_example("square-map", grid=51)
    assert spaces.metric(m, 10, 10) == 0.0
    assert spaces.metric(m, 3, 40) == spaces.metric(m, 40, 3)
    with pytest.raises(IndexError):
        m.metric(0, 51)


def test_circle_antipodal_arc_length():
    rot = spaces.load_example("irrational-rotation", grid=36)
    assert spaces.metric(rot, 0, 18) == pytest.approx(math.pi)


def test_shift_metric_on_window_model():
    # two sequences differing only at the origin sit at distance 2^0 = 1;
    # differing first at +-1 gives 2^-1
    bits = np.zeros((3, 11), dtype=np.uint8)
    bits[1, 5] = 1          # differs from row 0 at position 0
    bits[2, 6] = 1          # differs from row 0 at position +1
    model = spaces.WindowSampleModel("w", {}, bits, 5, 7)
    assert model.metric(0, 1) == 1.0
    assert model.metric(0, 2) == 0.5


def test_step_finite_and_sampled():
    ident = spaces.load_example("identity", n=5)
    assert spaces.step(ident, 2) == 2
    sq = spaces.load_example("square-map", grid=101)
    out = spaces.step(sq, 50)  # x = 0.5
    assert out["raw"] == [0.25]
    assert out["snapped"] == 25
    assert out["snap_error"] == 0.0


def test_step_periodic_stack_formula():
    m = spaces.load_example("periodic-stack", n=3, truncate=5)
    # locate (3, 0, 1): step must give (3, 1, 2)
    idx = next(i for i in range(m.n_points)
               if m.point_data(i) == {"n": 3, "k": 0, "l": 1})
    nxt = spaces.step(m, idx)
    assert m.point_data(nxt) == {"n": 3, "k": 1, "l": 2}


def test_orbit_segment_identity_and_stack():
    ident = spaces.load_example("identity", n=5)
    assert spaces.orbit_segment(ident, 3, 0, 4) == [3, 3, 3, 3, 3]
    m = spaces.load_example("periodic-stack", n=2, truncate=5)
    start = next(i for i in range(m.n_points)
                 if m.point_data(i) == {"n": 2, "k": 0, "l": 1})
    seg = spaces.orbit_segment(m, start, 0, 2)
    assert [m.point_data(i) for i in seg] == [
        {"n": 2, "k": 0, "l": 1}, {"n": 2, "k": 1, "l": 2}, {"n": 2, "k": 2, "l": 1},
    ]


def test_orbit_segment_square_map_snapping():
    sq = spaces.load_example("square-map", grid=1001)
    seg = spaces.orbit_segment(sq, 900, 0, 3)  # x = 0.9
    raws = [s["raw"][0] for s in seg]
    assert raws == pytest.approx([0.9, 0.81, 0.6561, 0.43046721])
    assert seg[2]["snapped"] == 656


def test_orbit_segment_consistency_with_step():
    m = spaces.load_example("isolated-ones-subshift", truncate=6)
    seg = spaces.orbit_segment(m, 2, 0, 6)
    for a, b in zip(seg, seg[1:]):
        assert spaces.step(m, a) == b


def test_negative_powers_rejected_on_semicascade():
    m = spaces.load_example("periodic-stack", n=2, truncate=5)
    with pytest.raises(spaces.NegativePowerError):
        spaces.orbit_segment(m, 0, -1, 1)


def test_inverse_roundtrip():
    for name, params in (
        ("irrational-rotation", {"grid": 24}),
        ("dyadic-circle-stack", {"levels": 3, "mult": 2}),
        ("neg-cube", {"grid": 201}),
    ):
        m = spaces.load_example(name, **params)
        fwd = m.iterate_images(1)
        back = m._advance(fwd, -1)
        tol = 0.0 if m.kind == "finite-exact" else 2 * m.resolution
        assert float(np.max(m.image_pair_dist(back, m.iterate_images(0)))) <= tol


def test_omega_limit_trivial_cases():
    ident = spaces.load_example("identity", n=5)
    assert spaces.omega_limit_estimate(ident, 2, 10, 0.01) == {2}
    sq = spaces.load_example("square-map", grid=1001)
    assert spaces.omega_limit_estimate(sq, 500, 200, 1e-6) == {0}


def test_omega_limit_rotation_orbit_fill():
    # oracle: brute-force orbit fill; steps = round(0.4472*360) = 161,
    # coprime to 360, so the exact grid rotation visits every point
    rot = spaces.load_example("irrational-rotation", alpha=0.4472, grid=360)
    steps = rot.params["steps"]
    assert math.gcd(steps, 360) == 1
    visited = {(steps * n) % 360 for n in range(10000)}
    assert len(visited) == 360
    om = spaces.omega_limit_estimate(rot, 0, 10000, rot.resolution / 2)
    assert om == set(range(360))


def test_omega_limit_equals_cycle_part_on_small_finite_models():
    rng = np.random.default_rng(3)
    for _ in range(12):
        n = int(rng.integers(2, 9))
        table = rng.integers(0, n, n)
        coords = np.linspace(0, 1, n)
        m = spaces.FiniteModel(
            "rand", {}, coords,
            lambda a, b, c=coords: np.abs(c[np.asarray(a)] - c[np.asarray(b)]),
            table, None, "interval")
        for x in range(n):
            # brute-force cycle part of the orbit of x
            orbit, seen = [], {}
            cur = x
            while cur not in seen:
                seen[cur] = len(orbit)
                orbit.append(cur)
                cur = int(table[cur])
            cycle = set(orbit[seen[cur]:])
            assert spaces.omega_limit_estimate(m, x, 64, 0.0) == cycle


def test_stack_infinity_metric():
    m = spaces.load_example("periodic-stack", n=2, truncate=10)
    def find(k, l):
        want = {"n": 2, "k": k, "l": l}
        return next(i for i in range(m.n_points) if m.point_data(i) == want)
    inf1 = find("inf", 1)
    assert m.metric(find(4, 1), inf1) == pytest.approx(1 / 5)
    assert m.metric(find(-4, 1), inf1) == pytest.approx(1 / 5)
    assert m.metric(find(0, 1), inf1) == pytest.approx(1.0)


def test_triangle_inequality_spot_checks():
    models = [
        spaces.load_example("periodic-stack", n=3, truncate=6),
        spaces.load_example("dyadic-circle-stack", levels=3, mult=2),
        spaces.load_example("isolated-ones-subshift", truncate=6),
        spaces.load_example("double-circle-rotation", grid=12),
    ]
    rng = np.random.default_rng(0)
    for m in models:
        n = m.n_points
        for _ in range(200):
            a, b, c = (int(v) for v in rng.integers(0, n, 3))
            assert m.metric(a, c) <= m.metric(a, b) + m.metric(b, c) + 1e-12


def test_snap_to_finite():
    sq = spaces.load_example("square-map", grid=11)
    fin = spaces.snap_to_finite(sq)
    assert fin.n_points == 11
    assert int(fin.map_table[10]) == 10  # 1.0 fixed
    assert int(fin.map_table[0]) == 0
    assert not fin.invertible


def test_rotation_convergent_fraction():
    rot = spaces.load_example("irrational-rotation", alpha="5/36")
    assert rot.n_points == 36 and rot.params["steps"] == 5
    with pytest.raises(spaces.InvalidParameterError):
        spaces.load_example("irrational-rotation", alpha="5/36", grid=20)


def test_model_export_schema():
    doc = spaces.load_example("identity", n=3).to_json()
    assert doc["schema"] == "ellis.model/1"
    assert doc["map"] == [0, 1, 2]
    assert len(doc["points"]) == 3


@given(st.integers(min_value=2, max_value=40), st.integers(min_value=0, max_value=39))
def test_rotation_orbit_period_divides_grid(grid, start):
    rot = spaces.load_example("irrational-rotation", grid=grid)
    start %= grid
    seg = spaces.orbit_segment(rot, start, 0, grid)
    assert seg[grid] == seg[0]
