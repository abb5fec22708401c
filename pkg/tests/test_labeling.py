import math

import pytest
from conftest import make_scenario
from hypothesis import given
from hypothesis import strategies as st

from mapfsel.grid import Grid
from mapfsel.harness import RunRecord
from mapfsel.labeling import (DroppedScenario, LabeledInstance, NormalizationContext, Objective,
                              compute_vbs_sbs, cost_bound, group_records, label_bound, label_dataset,
                              label_score, make_context, normalize, read_labels, score, write_labels)


def rec(solver, time, cost, success=True, n=10, scen="s"):
    return RunRecord("m", scen, n, solver, time, cost if success else None, success, 0)


def ctx(limit=120.0, bound=80, cmin=40):
    return NormalizationContext(limit, bound, cmin)


class TestObjective:
    def test_parse_and_format(self):
        o = Objective.parse("score:0.001")
        assert (o.family, o.value, str(o), o.task_prefix) == ("score", 0.001, "score:0.001", "Score-0.001")
        assert Objective.parse("bound:1.1").task_prefix == "Bound-1.1"

    @pytest.mark.parametrize("text", ["score", "score:-1", "bound:0.5", "speed:1", "score:abc", "bound:inf"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            Objective.parse(text)


class TestNormalize:
    def test_success(self):
        assert normalize(rec("a", 60, 40), ctx()) == (0.5, 0.5)

    def test_failure_penalty(self):
        assert normalize(rec("a", 120, None, False), ctx()) == (5, 2.5)

    def test_time_at_limit(self):
        assert normalize(rec("a", 120, 40), ctx())[0] == 1

    def test_zero_bound_dropped(self):
        with pytest.raises(DroppedScenario):
            normalize(rec("a", 1, 0), ctx(bound=0))

    def test_failure_without_any_success(self):
        with pytest.raises(DroppedScenario):
            normalize(rec("a", 1, None, False), ctx(cmin=None))

    def test_cost_bound(self):
        sc = make_scenario(Grid.open(3, 3), [((0, 0), (2, 2)), ((1, 1), (1, 1)), ((0, 2), (0, 1))])
        assert cost_bound(sc) == 5


class TestScore:
    def test_examples(self):
        assert score(0.5, 0.5, 0.001) == pytest.approx(0.5005, abs=1e-15)
        assert score(0.5, 0.5, 0) == 0.5
        assert score(5, 2.5, 1) == 7.5


class TestLabelScore:
    def records(self):
        # A -> (0.5, 0.5), B -> (0.4, 1.0) with limit 1 and bound 80
        return [rec("A", 0.5, 40), rec("B", 0.4, 80)]

    def test_small_w_prefers_fast(self):
        inst = label_score(self.records(), ctx(limit=1.0), 0.001)
        assert inst.solver_ids[inst.label] == "B"
        assert inst.scores == pytest.approx((0.5005, 0.401), abs=1e-15)

    def test_large_w_prefers_cheap(self):
        inst = label_score(self.records(), ctx(limit=1.0), 1.0)
        assert inst.solver_ids[inst.label] == "A"

    def test_tie_goes_to_lower_index(self):
        recs = [rec("A", 1.0, 50), rec("B", 1.0, 50)]
        assert label_score(recs, ctx(), 0.5, ["B", "A"]).label == 0

    def test_all_failed_dropped(self):
        recs = [rec("A", 1.0, None, False), rec("B", 1.0, None, False)]
        with pytest.raises(DroppedScenario):
            label_score(recs, make_context(recs, 120, 80), 0.001)

    def test_missing_solver_dropped(self):
        with pytest.raises(DroppedScenario):
            label_score([rec("A", 1, 40)], ctx(), 0.0, ["A", "B"])


class TestLabelBound:
    def records(self):
        return [rec("A", 10, 100), rec("B", 2, 105), rec("C", 1, 130)]

    def run(self, bound, recs=None):
        recs = recs or self.records()
        inst = label_bound(recs, make_context(recs, 120, 90), bound)
        return inst.solver_ids[inst.label]

    def test_bound_1_1(self):
        assert self.run(1.1) == "B"

    def test_bound_1_3(self):
        assert self.run(1.3) == "C"

    def test_single_success(self):
        recs = [rec("A", 100, None, False), rec("B", 50, 999), rec("C", 1, None, False)]
        assert self.run(1.0, recs) == "B" and self.run(3.0, recs) == "B"

    def test_scores_are_penalised_time(self):
        recs = self.records()
        inst = label_bound(recs, make_context(recs, 120, 90), 1.1)
        assert inst.scores == (10 / 120, 2 / 120, 5.0)


groups = st.lists(
    st.tuples(st.floats(0.001, 120.0), st.integers(10, 200), st.booleans()), min_size=1, max_size=6
).filter(lambda g: any(s for _, _, s in g))


def build(group, n=10):
    return [rec(f"s{i}", t, c, ok, n=n) for i, (t, c, ok) in enumerate(group)]


class TestProperties:
    @given(groups, st.floats(0, 10), st.integers(1, 300))
    def test_failed_never_label(self, group, w, bound):
        recs = build(group)
        c = make_context(recs, 120.0, bound)
        inst = label_score(recs, c, w)
        assert recs[inst.label].success
        assert inst.scores[inst.label] == min(inst.scores)

    @given(groups, st.floats(1, 3), st.integers(1, 300))
    def test_bound_feasible(self, group, b, bound):
        recs = build(group)
        c = make_context(recs, 120.0, bound)
        inst = label_bound(recs, c, b)
        chosen = recs[inst.label]
        assert chosen.success and chosen.cost <= b * c.cost_min + 1e-9
        assert inst.scores[inst.label] == min(inst.scores)

    @given(groups, st.floats(1, 2), st.floats(0, 1), st.integers(1, 300))
    def test_bound_monotone(self, group, b, extra, bound):
        recs = build(group)
        c = make_context(recs, 120.0, bound)
        t1 = recs[label_bound(recs, c, b).label].time
        t2 = recs[label_bound(recs, c, b + extra).label].time
        assert t2 <= t1

    @given(groups, st.integers(1, 300))
    def test_w0_is_fastest_success(self, group, bound):
        recs = build(group)
        inst = label_score(recs, make_context(recs, 120.0, bound), 0.0)
        assert recs[inst.label].time == min(r.time for r in recs if r.success)

    @given(groups, st.floats(0, 5), st.floats(0.1, 10), st.integers(1, 300))
    def test_time_rescaling_keeps_label(self, group, w, k, bound):
        recs = build(group)
        scaled = [RunRecord(r.map_name, r.scenario_id, r.agent_count, r.solver_id, r.time * k, r.cost,
                            r.success, r.seed) for r in recs]
        a = label_score(recs, make_context(recs, 120.0, bound), w)
        b = label_score(scaled, make_context(scaled, 120.0 * k, bound), w)
        assert a.label == b.label or math.isclose(a.scores[a.label], a.scores[b.label], rel_tol=1e-9)


def inst(scores, label, key=("m", "s", 10)):
    return LabeledInstance(key, ("A", "B"), (0, 0), (0, 0), tuple(scores), label, Objective("score", 1))


class TestBaselines:
    def test_single_winner(self):
        b = compute_vbs_sbs([inst((1, 2), 0), inst((0.5, 3), 0)])
        assert b.sbs_acc == b.sbs_gap == 0 and b.vbs == (0, 0)

    def test_acc_tie_by_index_gap_by_mean(self):
        b = compute_vbs_sbs([inst((1.0, 2.0), 0), inst((1.5, 1.0), 1)])
        assert b.sbs_acc == 0 and b.sbs_gap == 0

    def test_gap_solver_differs_from_acc_solver(self):
        b = compute_vbs_sbs([inst((1, 1.1), 0), inst((1, 1.1), 0), inst((50, 1), 1)])
        assert b.sbs_acc == 0 and b.sbs_gap == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            compute_vbs_sbs([])


class TestDatasetFiles:
    def test_label_dataset_and_round_trip(self, tmp_path, caplog):
        recs = [rec("A", 1, 10, scen="s1"), rec("B", 2, 10, scen="s1"),
                rec("A", 1, None, False, scen="s2"), rec("B", 1, None, False, scen="s2")]
        groups = group_records(recs)
        bounds = {k: 10 for k in groups}
        obj = Objective.parse("score:0.001")
        out = label_dataset(groups, bounds, obj, ["A", "B"], 120.0)
        assert [i.key for i in out] == [("m", "s1", 10)]
        path = tmp_path / "labels_score_0.001.csv"
        write_labels(out, path, obj, ["A", "B"])
        assert path.read_text().splitlines()[0] == "map,scenario,agents,objective,label,A,B"
        assert path.read_text().splitlines()[1].startswith("m,s1,10,score:0.001,A,")
        obj2, ids, back = read_labels(path)
        assert obj2 == obj and ids == ["A", "B"] and back[0].scores == out[0].scores
        assert back[0].label == out[0].label
