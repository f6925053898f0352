# src/golden.py
"""
Эталонные экземпляры с ожидаемыми значениями и их прогон.

Каждый файл в fixtures/ содержит экземпляр и список случаев: механизм,
необязательная стратегия и ожидаемые величины. replay() возвращает
расхождения; пустой список: всё совпало точно.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from audit import audit_ic, check_non_deficit, efficiency_report
from errors import ConfigError
from mechanisms import MECHANISMS
from money import format_money, to_money
from instance_io import parse_instance
from net_core import build_generated_graph

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@dataclass(frozen=True)
class GoldenCase:
    label: str
    mechanism: str
    expected: dict
    strategy: list | None = None


@dataclass(frozen=True)
class GoldenFixture:
    name: str
    description: str
    instance: dict
    cases: tuple = field(default_factory=tuple)
    path: Path | None = None


@dataclass(frozen=True)
class Mismatch:
    fixture: str
    case: str
    field: str
    expected: str
    actual: str

    def __str__(self) -> str:
        return f"{self.fixture}/{self.case}: {self.field} ожидалось {self.expected}, получено {self.actual}"


def _load(path: Path) -> GoldenFixture:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    return GoldenFixture(
        name=raw["name"],
        description=raw.get("description", ""),
        instance=raw["instance"],
        cases=tuple(
            GoldenCase(
                label=c["label"],
                mechanism=c["mechanism"],
                expected=c["expected"],
                strategy=c.get("strategy"),
            )
            for c in raw["cases"]
        ),
        path=path,
    )


def load_fixtures() -> dict:
    fixtures = {}
    for path in sorted(FIXTURE_DIR.glob("*.json")):
        fixture = _load(path)
        fixtures[fixture.name] = fixture
    return dict(sorted(fixtures.items()))


def list_fixtures() -> list:
    return list(load_fixtures())


def load_fixture(name: str) -> GoldenFixture:
    fixtures = load_fixtures()
    if name not in fixtures:
        raise ConfigError(f"Нет эталона {name!r}, доступны: {', '.join(fixtures)}")
    return fixtures[name]


def case_document(fixture: GoldenFixture, case: GoldenCase) -> str:
    """JSON-текст экземпляра с применённой стратегией случая"""
    document = dict(fixture.instance)
    if case.strategy is not None:
        document["strategy"] = case.strategy
    return json.dumps(document)


class _Checker:
    def __init__(self, fixture: GoldenFixture, case: GoldenCase):
        self.fixture = fixture.name
        self.case = case.label
        self.mismatches = []

    def money(self, name: str, expected, actual):
        if actual is None:
            self.equal(name, format_money(to_money(expected)), "нет значения")
        elif to_money(expected) != actual:
            self.mismatches.append(Mismatch(
                self.fixture, self.case, name,
                format_money(to_money(expected)), format_money(actual),
            ))

    def equal(self, name: str, expected, actual):
        if expected != actual:
            self.mismatches.append(Mismatch(self.fixture, self.case, name, str(expected), str(actual)))


def replay_case(fixture: GoldenFixture, case: GoldenCase) -> list:
    network, profile = parse_instance(case_document(fixture, case))
    outcome = MECHANISMS[case.mechanism](network, profile)
    expected = case.expected
    check = _Checker(fixture, case)

    if "absent" in expected:
        graph = build_generated_graph(network, profile)
        actual_absent = sorted(a for a in network.agents if a not in graph)
        check.equal("absent", sorted(expected["absent"]), actual_absent)
    if "winner" in expected:
        check.equal("winner", expected["winner"], outcome.winner)
    for agent, amount in expected.get("payments", {}).items():
        check.money(f"payment[{agent}]", amount, outcome.payment(agent))
    if "surplus" in expected:
        check.money("surplus", expected["surplus"], outcome.surplus)
    if "social_welfare" in expected:
        check.money("social_welfare", expected["social_welfare"], outcome.social_welfare)
    if "nd_holds" in expected:
        check.equal("nd_holds", expected["nd_holds"], check_non_deficit(outcome))

    if "efficiency" in expected:
        record = efficiency_report(network, case.mechanism)
        actual = (record.mechanism_sw, record.neighbour_baseline_sw, record.optimal_sw)
        for name, want, got in zip(("mechanism_sw", "baseline_sw", "optimal_sw"),
                                   expected["efficiency"], actual):
            check.money(f"efficiency.{name}", want, got)

    if "steps" in expected:
        check.equal("steps", len(expected["steps"]), len(outcome.trace))
        for index, (want, step) in enumerate(zip(expected["steps"], outcome.trace), start=1):
            prefix = f"step{index}"
            if "ancestor" in want:
                check.equal(f"{prefix}.ancestor", want["ancestor"], step.ancestor)
            if "required_payment" in want:
                check.money(f"{prefix}.p_auc", want["required_payment"], step.required_payment)
            if "block" in want:
                check.equal(f"{prefix}.block", tuple(want["block"]), step.block)
            for k, amount in want.get("counterfactual_surplus", {}).items():
                check.money(f"{prefix}.S_-{k}", amount, step.counterfactual_surplus.get(k))
            for k, amount in want.get("rebates", {}).items():
                check.money(f"{prefix}.R_{k}", amount, step.rebates.get(k))
            if "step_surplus" in want:
                check.money(f"{prefix}.surplus", want["step_surplus"], step.step_surplus)

    if "ic" in expected:
        found = {
            (v.deviation.agent, v.deviation.reported_valuation, v.deviation.invited): v.deviant_utility
            for v in audit_ic(network, case.mechanism)
        }
        for want in expected["ic"]:
            key = (want["agent"], to_money(want["reported_valuation"]), tuple(sorted(want["invited"])))
            label = f"ic[{want['agent']} invites {list(key[2])}]"
            if key not in found:
                check.equal(label, "violation", "none")
            else:
                check.money(label, want["deviant_utility"], found[key])

    return check.mismatches


def replay(name: str | None = None) -> dict:
    """Имя эталона -> список расхождений (по всем эталонам, если имя не задано)"""
    fixtures = load_fixtures()
    selected = [load_fixture(name)] if name else list(fixtures.values())
    results = {}
    for fixture in selected:
        mismatches = []
        for case in fixture.cases:
            mismatches.extend(replay_case(fixture, case))
        if mismatches:
            logger.warning("Эталон %s: %d расхождений", fixture.name, len(mismatches))
        results[fixture.name] = mismatches
    return results
