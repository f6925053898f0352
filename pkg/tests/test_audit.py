from fractions import Fraction

import pytest

from audit import (
    Deviation,
    agent_utility,
    audit_ic,
    budget_ratio,
    check_ir,
    check_non_deficit,
    efficiency_report,
    invitation_subsets,
    measure_budget_balance,
    run_audit,
    sampled_agents,
    valuation_grid,
)
from config import AuditSettings
from errors import InsufficientDataError
from mechanisms import MECHANISMS, Outcome, run_cavallo, run_nrm
from net_core import SocialNetwork, StrategyProfile, truthful_graph

F = Fraction


class TestUtility:

    def test_winner_utility(self, gap_graph):
        outcome = run_nrm(truthful_graph(gap_graph))
        assert agent_utility(outcome, "p", F(16)) == 2

    def test_rebated_sibling(self, tree16):
        outcome = run_nrm(truthful_graph(tree16))
        assert agent_utility(outcome, "a", F(2)) == F(5, 2)

    def test_non_participant(self):
        outcome = Outcome("nrm", None, {}, F(0), F(0))
        assert agent_utility(outcome, "z", F(7)) == 0


class TestNonDeficit:

    def test_cavallo_deficit(self, p1):
        assert not check_non_deficit(run_cavallo(truthful_graph(p1)))

    def test_nrm_no_deficit(self, tree16, gap_graph):
        assert check_non_deficit(run_nrm(truthful_graph(tree16)))
        assert check_non_deficit(run_nrm(truthful_graph(gap_graph)))

    def test_empty_payments(self):
        assert check_non_deficit(Outcome("nrm", None, {}, F(0), F(0)))


class TestIndividualRationality:

    def test_nrm_holds(self, gap_graph):
        verdict = check_ir(gap_graph, "nrm")
        assert verdict.holds
        assert verdict.witness_agent is None

    def test_cavallo_on_deficit_instance_still_holds(self, p1):
        assert check_ir(p1, "cavallo").holds

    def test_single_agent(self):
        network = SocialNetwork.from_declarations("o", [("a", 4, ["o"])])
        for mechanism in ("nrm", "cavallo", "cavallo-neighbours"):
            assert check_ir(network, mechanism).holds

    def test_witness_is_reported(self, line):
        def charge_everyone(network, profile):
            return Outcome("bad", None, {a: F(1) for a in network.agents}, F(2), F(0))

        verdict = check_ir(line, charge_everyone)
        assert not verdict.holds
        assert verdict.witness_agent == "a"
        assert verdict.witness_utility == -1


class TestIncentiveCompatibility:

    def test_cavallo_rewards_withholding_invitations(self, p2):
        violations = audit_ic(p2, "cavallo")
        found = {(v.deviation.agent, v.deviation.reported_valuation, v.deviation.invited): v
                 for v in violations}

        a = found[("a", F(2), ())]
        assert a.truthful_utility == F(3, 5)
        assert a.deviant_utility == F(3, 4)

        c = found[("c", F(4), ())]
        assert c.truthful_utility == F(7, 5)
        assert c.deviant_utility == F(3, 2)

    def test_every_violation_is_a_strict_gain(self, p2):
        violations = audit_ic(p2, "cavallo")
        assert violations
        assert all(v.gain > 0 for v in violations)
        assert list(violations) == sorted(violations, key=lambda v: v.deviation)

    def test_violations_replay(self, p2):
        violation = audit_ic(p2, "cavallo")[0]
        d = violation.deviation
        profile = StrategyProfile.truthful(p2).with_report(d.agent, d.report())
        outcome = MECHANISMS["cavallo"](p2, profile)
        assert agent_utility(outcome, d.agent, p2.valuations[d.agent]) == violation.deviant_utility

    @pytest.mark.parametrize("name", ["line", "p1", "p2"])
    def test_nrm_has_no_profitable_deviation(self, name, request):
        network = request.getfixturevalue(name)
        assert audit_ic(network, "nrm") == ()

    def test_nrm_depth_gap_overbid_pays_off(self, depth_gap):
        # a4 завышает оценку, становится предком первого шага вне дочерних
        # соседей владельца и получает собственную компенсацию R_a4
        violations = audit_ic(depth_gap, "nrm")
        found = {(v.deviation.agent, v.deviation.reported_valuation, v.deviation.invited): v.gain
                 for v in violations}
        assert found == {
            ("a4", F(8), ()): F(1, 2),
            ("a4", F(8), ("a1",)): F(1, 2),
            ("a4", F(8), ("a3",)): F(1),
            ("a4", F(8), ("a1", "a3")): F(1),
        }

    def test_nrm_depth_gap_deviation_outcome(self, depth_gap):
        honest = run_nrm(truthful_graph(depth_gap))
        assert agent_utility(honest, "a4", F(6)) == 0

        profile = StrategyProfile.truthful(depth_gap).with_report(
            "a4", Deviation("a4", F(8), ()).report())
        outcome = MECHANISMS["nrm"](depth_gap, profile)
        step = outcome.trace[0]
        assert outcome.winner == "a4"
        assert step.block == ("a1", "a2", "a4")
        assert step.rebates["a4"] == F(3, 2)
        assert agent_utility(outcome, "a4", F(6)) == F(1, 2)

    def test_worker_count_does_not_change_result(self, p2):
        serial = audit_ic(p2, "cavallo", AuditSettings(workers=1))
        parallel = audit_ic(p2, "cavallo", AuditSettings(workers=2))
        assert serial == parallel


class TestDeviationSpace:

    def test_valuation_grid(self, p2):
        assert valuation_grid(p2) == (0, 1, 2, F(5, 2), 3, F(7, 2), 4, 5)

    def test_grid_extras(self, line):
        assert F(1, 3) in valuation_grid(line, extras=["1/3"])

    def test_exhaustive_subsets_skip_owner(self, tree16):
        subsets, exhaustive = invitation_subsets(tree16, "b", AuditSettings())
        assert exhaustive
        assert len(subsets) == 8
        assert all("o" not in s for s in subsets)
        assert ("f", "g", "h") in subsets

    def test_sampled_above_degree_cap(self):
        network = SocialNetwork.from_declarations("o", [
            ("h", 1, ["o", "w", "x", "y", "z"]),
            ("w", 2, []), ("x", 3, []), ("y", 4, []), ("z", 5, []),
        ])
        settings = AuditSettings(degree_cap=2, subset_samples=16, seed=3)
        assert sampled_agents(network, settings) == ("h",)
        subsets, exhaustive = invitation_subsets(network, "h", settings)
        assert not exhaustive
        assert () in subsets
        assert ("w", "x", "y", "z") in subsets
        again, _ = invitation_subsets(network, "h", settings)
        assert subsets == again

    def test_deviation_report(self):
        report = Deviation("a", F(3), ("b",)).report()
        assert report.valuation == 3
        assert report.invited == {"b"}


class TestEfficiency:

    def test_tree(self, tree16):
        record = efficiency_report(tree16)
        assert (record.mechanism_sw, record.neighbour_baseline_sw, record.optimal_sw) == (18, 7, 18)
        assert record.baseline_holds

    def test_line_loses_efficiency(self, line):
        record = efficiency_report(line)
        assert (record.mechanism_sw, record.neighbour_baseline_sw, record.optimal_sw) == (1, 1, 10)
        assert record.ratio == F(1, 10)

    def test_owner_star_is_optimal(self):
        network = SocialNetwork.from_declarations(
            "o", [("a", 3, ["o"]), ("b", 9, ["o"]), ("c", 5, ["o"])]
        )
        record = efficiency_report(network)
        assert record.mechanism_sw == record.optimal_sw == 9


class TestBudgetBalance:

    def test_single_record_ratio(self):
        assert budget_ratio(F(3, 2), F(18)) == F(1, 12)
        assert budget_ratio(F(1), F(0)) == 0

    def test_trend(self):
        trend = measure_budget_balance([
            (10, F(2), F(10)), (10, F(0), F(10)),
            (50, F(1), F(20)),
        ])
        assert trend.buckets == ((10, F(1, 10), 2), (50, F(1, 20), 1))
        assert trend.strictly_decreasing
        assert trend.passes(F(1, 10))
        assert not trend.passes(F(1, 20))

    def test_fully_redistributed_family(self):
        trend = measure_budget_balance([(n, F(0), F(5)) for n in (10, 20, 40)])
        assert trend.ratios == (0, 0, 0)

    def test_needs_two_sizes(self):
        with pytest.raises(InsufficientDataError):
            measure_budget_balance([(10, F(1), F(2)), (10, F(0), F(3))])


class TestRunAudit:

    def test_nrm_report_is_clean(self, p2):
        report = run_audit(p2, "nrm")
        assert report.ir.holds
        assert report.nd_holds
        assert report.ic_violations == ()
        assert report.efficiency.baseline_holds
        assert report.budget_ratio == F(3, 20)
        assert report.clean

    def test_cavallo_report_flags_violations(self, p2):
        report = run_audit(p2, "cavallo")
        assert report.ic_violations
        assert not report.clean
