import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mapfsel.labeling import LabeledInstance, Objective, compute_vbs_sbs
from mapfsel.metrics import (ablation_table, accuracy, format_spec, frequency_svg, frequency_table, gap,
                             gap_from_means, gap_report, mean_score, write_ablation, write_frequency_csv,
                             write_metric_csv)

OBJ = Objective("score", 0.001)


def inst(scores, map_name="m", scen="s", n=10, ids=None):
    scores = tuple(float(s) for s in scores)
    ids = ids or tuple("ABCDEFG"[: len(scores)])
    label = int(np.argmin(scores))
    return LabeledInstance((map_name, scen, n), ids, (0,) * len(scores), (0,) * len(scores), scores, label, OBJ)


def counterexample():
    return [inst((1, 2), scen="1"), inst((1, 2), scen="2"), inst((20, 1), scen="3")]


class TestAccuracy:
    def test_examples(self):
        assert accuracy([0, 1, 1], [0, 1, 0]) == pytest.approx(2 / 3)
        assert accuracy([2], [2]) == 1

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy([], [])
        with pytest.raises(ValueError):
            accuracy([0], [0, 1])


class TestGap:
    def test_perfect_is_zero_and_sbs_is_one(self):
        data = counterexample()
        b = compute_vbs_sbs(data)
        assert gap([i.label for i in data], data, b.sbs_gap) == 0
        assert gap([b.sbs_gap] * 3, data, b.sbs_gap) == 1

    def test_halfway(self):
        assert gap_from_means(1.5, 1.0, 2.0) == 0.5

    def test_degenerate(self):
        assert gap_from_means(1.0, 1.0, 1.0) == 0
        assert gap_from_means(1.5, 1.0, 1.0) == math.inf

    def test_accuracy_and_gap_disagree(self):
        data = counterexample()
        b = compute_vbs_sbs(data)
        assert (b.sbs_acc, b.sbs_gap) == (0, 1)
        labels = [i.label for i in data]
        all_a, all_b = [0, 0, 0], [1, 1, 1]
        assert accuracy(all_a, labels) == pytest.approx(2 / 3) and gap(all_a, data, 1) == pytest.approx(9.5)
        assert accuracy(all_b, labels) == pytest.approx(1 / 3) and gap(all_b, data, 1) == pytest.approx(1.0)

    @given(st.lists(st.lists(st.floats(0, 10), min_size=3, max_size=3), min_size=1, max_size=12),
           st.integers(0, 2 ** 31), st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_invariance_and_nonnegative(self, table, seed, a, b):
        data = [inst(row, scen=str(i)) for i, row in enumerate(table)]
        moved = [inst([a * s + b for s in row], scen=str(i)) for i, row in enumerate(table)]
        preds = np.random.default_rng(seed).integers(0, 3, len(data)).tolist()
        base = compute_vbs_sbs(data)
        g1 = gap(preds, data, base.sbs_gap)
        g2 = gap(preds, moved, base.sbs_gap)
        assert g1 >= 0
        vbs = mean_score(data, [i.label for i in data])
        sbs = mean_score(data, [base.sbs_gap] * len(data))
        if sbs - vbs > 1e-6:
            assert g2 == pytest.approx(g1, rel=1e-6, abs=1e-6)


class TestReport:
    def test_report_rows_and_csv(self, tmp_path):
        data = counterexample()
        b = compute_vbs_sbs(data)
        rep = gap_report([1, 1, 1], data, b, fit_size=3, fit_split=data, fit_predictions=[0, 0, 1])
        assert rep.gap == 1 and rep.sbs_acc == "A" and rep.sbs_gap == "B" and not rep.degenerate
        assert rep.fit_split_gap == 0
        rows = dict(rep.rows())
        assert rows["objective"] == "score:0.001" and rows["degenerate"] == "false"
        write_metric_csv(tmp_path / "e.csv", rep.rows())
        assert (tmp_path / "e.csv").read_text().splitlines()[0] == "metric,value"

    def test_identical_solvers_give_zero_gap(self):
        data = [inst((1, 1)), inst((2, 2), scen="t")]
        b = compute_vbs_sbs(data)
        assert gap_report([0, 0], data, b, 2).gap == 0


class TestFrequency:
    def test_single_label(self):
        data = [inst((1, 2), scen=str(i)) for i in range(4)]
        maps, ids, counts = frequency_table(data)
        assert maps == ["m"] and ids == ["A", "B"] and counts == {"m": [4, 0]}

    def test_block_diagonal(self, tmp_path):
        data = [inst((1, 2, 3), "m1", str(i)) for i in range(3)] + [inst((3, 1, 2), "m2", str(i)) for i in range(2)]
        maps, _, counts = frequency_table(data)
        assert counts == {"m1": [3, 0, 0], "m2": [0, 2, 0]}
        write_frequency_csv(tmp_path / "f.csv", data)
        assert (tmp_path / "f.csv").read_text().splitlines() == ["map,A,B,C,total", "m1,3,0,0,3", "m2,0,2,0,2"]

    @given(st.lists(st.tuples(st.sampled_from(["a", "b", "c"]), st.lists(st.floats(0, 5), min_size=3, max_size=3)),
                    min_size=1, max_size=30))
    def test_rows_sum_to_instance_counts(self, rows):
        data = [inst(s, m, str(i)) for i, (m, s) in enumerate(rows)]
        _, _, counts = frequency_table(data)
        for m, c in counts.items():
            assert sum(c) == sum(1 for mm, _ in rows if mm == m)

    def test_svg_is_well_formed(self):
        data = [inst((1, 2), "m<1>", "1"), inst((2, 1), "m2", "2")]
        root = ET.fromstring(frequency_svg(data, "Score & stuff"))
        assert root.tag.endswith("svg")

    def test_empty(self):
        with pytest.raises(ValueError):
            frequency_table([])


class TestAblation:
    def test_best_row_flagged(self, tmp_path):
        rows = ablation_table([("ppppppp", 1.2, 0.3), ("ppprrrp", 0.911, 0.307), ("rrrrrrr", 1.0, 0.4)])
        assert [r.spec for r in rows] == ["ppprrrp", "rrrrrrr", "ppppppp"]
        assert [r.best for r in rows] == [True, False, False]
        text = write_ablation(rows, tmp_path / "a.csv", tmp_path / "a.txt")
        assert "ppp rrrp" in text and text.splitlines()[2].endswith("*")
        assert (tmp_path / "a.csv").read_text().splitlines()[0] == "spec,gap,accuracy,best_gap"

    def test_single_row(self):
        assert ablation_table([("ppppppp", 2.0, 0.1)])[0].best

    def test_equal_gap_prefers_accuracy_then_name(self):
        rows = ablation_table([("rrrrrrr", 1.0, 0.5), ("ppppppp", 1.0, 0.5), ("ppprrrp", 1.0, 0.6)])
        assert [r.spec for r in rows] == ["ppprrrp", "ppppppp", "rrrrrrr"]

    def test_format(self):
        assert format_spec("ppprrrp") == "ppp rrrp"
