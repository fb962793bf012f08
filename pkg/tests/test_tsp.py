import pytest
from hypothesis import given, settings, strategies as st

from uavcover.graph import build_grid, build_path, build_random_geometric
from uavcover.tsp import (Walk, canonical_form, distinct_tours, metric_closure, solve_tsp_exact,
                          solve_tsp_heuristic)

from oracles import brute_tsp


def assert_closed_cover(g, w):
    assert w.nodes[0] == g.station and w.nodes[-1] == g.station
    assert set(w.nodes) == set(g.nodes)
    assert w.total_time == g.walk_time(w.nodes)


class TestExact:
    def test_path(self, p3):
        w = solve_tsp_exact(p3)
        assert w.nodes == (0, 1, 2, 1, 0)
        assert w.total_time == 4000.0

    def test_grid2_perimeter(self, grid2):
        w = solve_tsp_exact(grid2)
        assert w.total_time == 4000.0
        assert len(w.nodes) == 5 and len(set(w.nodes)) == 4

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_permutation_oracle(self, seed):
        g = build_random_geometric(8, 60.0, 100.0, seed)
        w = solve_tsp_exact(g)
        assert_closed_cover(g, w)
        assert w.total_time == pytest.approx(brute_tsp(g), abs=1e-6)

    def test_single_node(self):
        w = solve_tsp_exact(build_grid(1, 1, 1.0))
        assert w == Walk((0,), 0.0)

    def test_too_large(self):
        with pytest.raises(ValueError):
            solve_tsp_exact(build_grid(4, 4, 1.0))


class TestHeuristic:
    def test_deterministic(self):
        g = build_random_geometric(30, 35.0, 100.0, 4)
        assert solve_tsp_heuristic(g, 3) == solve_tsp_heuristic(g, 3)

    def test_grid2_optimal(self, grid2):
        assert solve_tsp_heuristic(grid2, 0).total_time == 4000.0

    def test_6x6_lower_bound(self):
        g = build_grid(6, 6, 400.0)
        w = solve_tsp_heuristic(g, 0)
        assert_closed_cover(g, w)
        assert w.total_time >= 36 * 400.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 9), st.integers(0, 5000), st.integers(0, 50))
    def test_never_beats_exact(self, n, gseed, seed):
        g = build_random_geometric(n, 70.0, 100.0, gseed)
        h = solve_tsp_heuristic(g, seed)
        assert_closed_cover(g, h)
        assert solve_tsp_exact(g).total_time <= h.total_time + 1e-9


class TestDistinct:
    def test_path_has_one_tour(self, p3):
        assert len(distinct_tours(p3, 5, 0)) == 1

    def test_grid6_many(self):
        ws = distinct_tours(build_grid(6, 6, 400.0), 20, 0)
        assert len(ws) >= 10
        assert len({canonical_form(w) for w in ws}) == len(ws)
        assert [w.total_time for w in ws] == sorted(w.total_time for w in ws)

    def test_n1_is_heuristic(self):
        g = build_random_geometric(25, 35.0, 100.0, 8)
        assert distinct_tours(g, 1, 5) == [solve_tsp_heuristic(g, 5)]

    def test_prefix_consistent(self):
        g = build_grid(6, 6, 400.0)
        small = {canonical_form(w) for w in distinct_tours(g, 5, 2)}
        big = {canonical_form(w) for w in distinct_tours(g, 20, 2)}
        assert small <= big

    def test_walks_valid(self):
        g = build_random_geometric(30, 35.0, 100.0, 11)
        for w in distinct_tours(g, 8, 1):
            assert_closed_cover(g, w)

    def test_bad_n(self, p3):
        with pytest.raises(ValueError):
            distinct_tours(p3, 0)


class TestCanonical:
    def test_rotation_and_reflection(self):
        a = Walk((0, 1, 2, 3, 0), 4.0)
        b = Walk((0, 3, 2, 1, 0), 4.0)
        assert canonical_form(a) == canonical_form(b) == (0, 1, 2, 3)

    def test_closure_symmetric(self):
        g = build_random_geometric(15, 40.0, 100.0, 2)
        D = metric_closure(g).D
        assert (abs(D - D.T) < 1e-9).all()
