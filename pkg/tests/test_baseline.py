from fractions import Fraction

import pytest

from regtile import baseline, dfg, stats


class TestNaiveCost:
    def test_toy(self, toy_instance):
        assert baseline.naive_cost(toy_instance.graph) == 5

    def test_all_states_zero(self):
        g = dfg.normalize_states(
            dfg.RawDependenceGraph((dfg.RawNode("A", 1), dfg.RawNode("B", 2)), ())
        )
        assert baseline.naive_cost(g) == 0

    def test_single_node(self):
        g = dfg.normalize_states(
            dfg.RawDependenceGraph(
                (dfg.RawNode("A", 1),), (dfg.RawEdge("s", "A", "A", 3, 1, "w"),)
            )
        )
        assert baseline.naive_cost(g) == 3


class TestRegisterPipelining:
    def test_toy_budget_one_promotes_b(self, toy_instance):
        report = baseline.register_pipelining(toy_instance.graph, 1)
        assert report.promoted == ("S1",)
        assert report.pipelined_loads == 4
        assert report.budget_used == 1

    def test_budget_zero_equals_naive(self, toy_instance):
        report = baseline.register_pipelining(toy_instance.graph, 0)
        assert report.pipelined_loads == baseline.naive_cost(toy_instance.graph)
        assert report.promoted == ()

    def test_budget_five_promotes_everything(self, toy_instance):
        report = baseline.register_pipelining(toy_instance.graph, 5)
        assert set(report.promoted) == {"S0", "S1", "S2"}
        assert report.pipelined_loads == 0
        assert report.budget_used == 5

    def test_non_increasing_in_budget(self):
        for inst in stats.generate_corpus(19, 20):
            last = None
            for budget in range(0, 8):
                loads = baseline.register_pipelining(inst.graph, budget).pipelined_loads
                if last is not None:
                    assert loads <= last
                last = loads

    def test_distance_aware_saving(self):
        # A carried value of distance 3 pins 3 registers but only saves one
        # load per iteration when promoted.
        g = dfg.normalize_states(
            dfg.RawDependenceGraph(
                (dfg.RawNode("A", 1), dfg.RawNode("B", 1)),
                (
                    dfg.RawEdge("s", "A", "A", 1, 3, "w"),
                    dfg.RawEdge("t", "B", "B", 1, 1, "v"),
                ),
            )
        )
        assert baseline.naive_cost(g) == 4
        report = baseline.register_pipelining(g, 3)
        # B's pipeline has the better saving-per-register ratio (1/1 vs 1/3).
        assert report.promoted == ("B",)
        assert report.pipelined_loads == 3
        both = baseline.register_pipelining(g, 4)
        assert set(both.promoted) == {"A", "B"}
        assert both.pipelined_loads == 2


class TestSavingsPercent:
    def test_formula(self):
        assert baseline.savings_percent(6, 4, 3) == Fraction(-100, 6)

    def test_clamps_when_not_better(self):
        assert baseline.savings_percent(6, 4, 5) == 0

    def test_zero_when_equal(self):
        assert baseline.savings_percent(3, 4, 4) == 0

    def test_rejects_zero_vars(self):
        with pytest.raises(ValueError):
            baseline.savings_percent(0, 4, 3)
