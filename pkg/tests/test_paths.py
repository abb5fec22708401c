import itertools

import numpy as np
import pytest
from conftest import make_scenario
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dijkstra, enumerate_walks, pairwise_overlap

from mapfsel.grid import Grid, ScenarioError, bfs_distance, random_scenario
from mapfsel.paths import (canonical_path, heatmap_all_shortest_visits, heatmap_canonical_visits,
                           heatmap_pairwise_conflicts, occupancy, walk_counts)


def small_scenarios(max_side=4, max_agents=3):
    @st.composite
    def build(draw):
        h = draw(st.integers(1, max_side))
        w = draw(st.integers(2, max_side))
        mask = np.array(draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))).reshape(h, w)
        mask &= np.array(draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))).reshape(h, w)
        g = Grid(mask)
        if g.num_passable < 2:
            g = Grid.open(h, w)
        n = draw(st.integers(1, max_agents))
        rng = np.random.default_rng(draw(st.integers(0, 2 ** 32 - 1)))
        while True:
            try:
                return random_scenario(g, n, rng)
            except ScenarioError:
                n -= 1
    return build()


class TestCanonicalPath:
    def test_start_equals_goal(self):
        assert canonical_path(Grid.open(2, 2), (1, 1), (1, 1)).length == 0

    def test_corridor(self):
        assert canonical_path(Grid.open(1, 3), (0, 0), (0, 2)).cells == ((0, 0), (0, 1), (0, 2))

    def test_2x2_is_a_shortest_path_and_stable(self):
        g = Grid.open(2, 2)
        first = canonical_path(g, (0, 0), (1, 1)).cells
        assert all(canonical_path(g, (0, 0), (1, 1)).cells == first for _ in range(5))
        rows, cols = enumerate_walks(g.blocked, (0, 0), 2)
        shortest = {tuple(zip(r, c)) for r, c in zip(rows.tolist(), cols.tolist()) if (r[-1], c[-1]) == (1, 1)}
        assert first in shortest and len(shortest) == 2

    def test_unreachable(self):
        with pytest.raises(ValueError):
            canonical_path(Grid.from_rows([".@."]), (0, 0), (0, 2))

    @given(small_scenarios(6, 1))
    def test_is_shortest_and_valid(self, sc):
        a = sc.agents[0]
        p = canonical_path(sc.grid, a.start, a.goal)
        assert p.length == bfs_distance(sc.grid, a.start)[a.goal]
        for u, v in zip(p.cells, p.cells[1:]):
            assert abs(u[0] - v[0]) + abs(u[1] - v[1]) == 1 and sc.grid.passable(v)


class TestWalkCounts:
    def test_2x2_shortest(self):
        assert walk_counts(Grid.open(2, 2), (0, 0), (1, 1), 2).total == 2

    def test_2x2_one_extra_step(self):
        assert walk_counts(Grid.open(2, 2), (0, 0), (1, 1), 3).total == 6

    def test_zero_length(self):
        assert walk_counts(Grid.open(3, 3), (1, 1), (1, 1), 0).total == 1

    def test_too_short(self):
        with pytest.raises(ValueError):
            walk_counts(Grid.open(2, 2), (0, 0), (1, 1), 1)

    def test_start_cell_and_obstacles(self):
        g = Grid.from_rows(["..", "@."])
        wc = walk_counts(g, (0, 0), (1, 1), 3)
        assert wc.forward[0][(0, 0)] == 1
        assert not wc.forward[:, 1, 0].any() and not wc.backward[:, 1, 0].any()

    @given(small_scenarios(5, 1), st.integers(0, 1))
    def test_consistency_in_t(self, sc, extra):
        a = sc.agents[0]
        L = bfs_distance(sc.grid, a.start)[a.goal] + extra
        wc = walk_counts(sc.grid, a.start, a.goal, L)
        per_t = wc.through().sum(axis=(1, 2))
        assert np.all(per_t == wc.total)
        assert wc.forward[L][a.goal] == wc.total

    def test_matches_enumeration_5x5_sample(self, rng):
        for _ in range(30):
            mask = rng.random((5, 5)) < 0.2
            free = [tuple(map(int, c)) for c in np.argwhere(~mask)]
            s, g = (free[i] for i in rng.choice(len(free), 2, replace=False))
            d = int(dijkstra(mask, g)[s])
            if d < 0 or d > 5:
                continue
            for L in (d, d + 1):
                rows, cols = enumerate_walks(mask, s, L)
                keep = (rows[:, -1] == g[0]) & (cols[:, -1] == g[1])
                wc = walk_counts(Grid(mask), s, g, L)
                assert wc.total == keep.sum()
                through = np.zeros((L + 1, 5, 5))
                for t in range(L + 1):
                    np.add.at(through[t], (rows[keep, t], cols[keep, t]), 1)
                assert np.array_equal(wc.through(), through)


class TestHeatmaps:
    def test_canonical_corridor_swap(self, corridor_swap):
        assert heatmap_canonical_visits(corridor_swap).tolist() == [[2.0, 2.0, 2.0]]

    def test_canonical_start_is_goal(self):
        sc = make_scenario(["..", ".."], [((1, 0), (1, 0))])
        assert heatmap_canonical_visits(sc).tolist() == [[0, 0], [1, 0]]

    def test_canonical_empty(self):
        sc = make_scenario(["..", ".."], [])
        assert not heatmap_canonical_visits(sc).any()

    @given(small_scenarios(5, 3))
    def test_canonical_sum(self, sc):
        total = sum(bfs_distance(sc.grid, a.start)[a.goal] + 1 for a in sc.agents)
        assert heatmap_canonical_visits(sc).sum() == total

    def test_pairwise_corridor_swap(self, corridor_swap):
        assert heatmap_pairwise_conflicts(corridor_swap, False).tolist() == [[0.0, 1.0, 0.0]]

    def test_pairwise_single_agent(self):
        sc = make_scenario(["...", "..."], [((0, 0), (1, 2))])
        assert not heatmap_pairwise_conflicts(sc, True).any()

    def test_pairwise_disjoint_corridors(self):
        sc = make_scenario(["...", "@@@", "..."], [((0, 0), (0, 2)), ((2, 2), (2, 0))])
        assert not heatmap_pairwise_conflicts(sc, False).any()
        assert not heatmap_pairwise_conflicts(sc, True).any()

    def test_all_shortest_2x2(self):
        sc = make_scenario(["..", ".."], [((0, 0), (1, 1))])
        assert heatmap_all_shortest_visits(sc, normalize=False).tolist() == [[2, 1], [1, 2]]
        assert heatmap_all_shortest_visits(sc).tolist() == [[1, 0.5], [0.5, 1]]

    def test_all_shortest_unique_path(self):
        sc = make_scenario(["...", "@@."], [((0, 0), (1, 2))])
        raw = heatmap_all_shortest_visits(sc, normalize=False)
        assert np.array_equal(raw, heatmap_all_shortest_visits(sc))
        assert raw.tolist() == [[1, 1, 1], [0, 0, 1]]

    @settings(max_examples=40)
    @given(small_scenarios(4, 3), st.booleans())
    def test_pairwise_matches_enumeration(self, sc, sub):
        agents = [(a.start, a.goal) for a in sc.agents]
        expect = pairwise_overlap(sc.grid.blocked, agents, sub)
        assert np.allclose(heatmap_pairwise_conflicts(sc, sub), expect, rtol=0, atol=1e-9)

    @given(small_scenarios(5, 3))
    def test_zero_on_obstacles(self, sc):
        for h in (heatmap_canonical_visits(sc), heatmap_pairwise_conflicts(sc, False),
                  heatmap_pairwise_conflicts(sc, True), heatmap_all_shortest_visits(sc)):
            assert not h[sc.grid.blocked].any() and (h >= 0).all()

    @settings(max_examples=30)
    @given(small_scenarios(5, 3))
    def test_agent_permutation_invariance(self, sc):
        base = [heatmap_canonical_visits(sc), heatmap_pairwise_conflicts(sc, True), heatmap_all_shortest_visits(sc)]
        for perm in itertools.permutations(range(sc.agent_count)):
            other = type(sc)(sc.grid, tuple(sc.agents[i] for i in perm))
            again = [heatmap_canonical_visits(other), heatmap_pairwise_conflicts(other, True),
                     heatmap_all_shortest_visits(other)]
            for a, b in zip(base, again):
                assert np.allclose(a, b, atol=1e-12)

    def test_occupancy_overflow_safe_on_large_open_map(self):
        occ = occupancy(Grid.open(64, 64), (0, 0), (63, 63), (0, 1))
        assert np.isfinite(occ).all()
        assert np.allclose(occ.sum(axis=(1, 2))[:127], 1.0)
