# src/audit.py
"""
Проверка свойств механизмов на конкретных экземплярах:
IR, ND, перебор отклонений для IC, эффективность и бюджетный баланс.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from multiprocessing import Pool
from typing import Callable, Iterable

import numpy as np

from config import AuditSettings
from errors import InsufficientDataError, StructuralError
from mechanisms import MECHANISMS, Outcome
from money import ZERO
from net_core import AgentId, Report, SocialNetwork, StrategyProfile

logger = logging.getLogger(__name__)

MechanismRef = str | Callable[[SocialNetwork, StrategyProfile], Outcome]


@dataclass(frozen=True, order=True)
class Deviation:
    agent: AgentId
    reported_valuation: Fraction
    invited: tuple

    def report(self) -> Report:
        return Report(self.reported_valuation, frozenset(self.invited))


@dataclass(frozen=True)
class ICViolation:
    deviation: Deviation
    truthful_utility: Fraction
    deviant_utility: Fraction

    @property
    def gain(self) -> Fraction:
        return self.deviant_utility - self.truthful_utility


@dataclass(frozen=True)
class IRVerdict:
    holds: bool
    witness_agent: AgentId | None = None
    witness_invited: tuple = ()
    witness_utility: Fraction | None = None
    sampled_agents: tuple = ()


@dataclass(frozen=True)
class EfficiencyRecord:
    mechanism_sw: Fraction
    neighbour_baseline_sw: Fraction
    optimal_sw: Fraction

    @property
    def ratio(self) -> Fraction:
        """Доля оптимума; без оценок считается 1"""
        if self.optimal_sw == 0:
            return Fraction(1)
        return self.mechanism_sw / self.optimal_sw

    @property
    def baseline_holds(self) -> bool:
        return self.mechanism_sw >= self.neighbour_baseline_sw


@dataclass(frozen=True)
class AuditReport:
    mechanism: str
    ir: IRVerdict
    nd_holds: bool
    ic_violations: tuple
    efficiency: EfficiencyRecord
    budget_ratio: Fraction
    sampled_agents: tuple = ()

    @property
    def clean(self) -> bool:
        baseline_ok = self.mechanism != "nrm" or self.efficiency.baseline_holds
        return self.ir.holds and self.nd_holds and not self.ic_violations and baseline_ok


@dataclass(frozen=True)
class BudgetTrend:
    """Средний surplus / welfare по корзинам n"""
    buckets: tuple = field(default_factory=tuple)  # (n, mean_ratio, count)

    @property
    def ratios(self) -> tuple:
        return tuple(ratio for _, ratio, _ in self.buckets)

    @property
    def final_ratio(self) -> Fraction:
        return self.buckets[-1][1]

    @property
    def strictly_decreasing(self) -> bool:
        ratios = self.ratios
        return all(a > b for a, b in zip(ratios, ratios[1:]))

    def passes(self, threshold: Fraction) -> bool:
        return self.strictly_decreasing and self.final_ratio < threshold


# =============================================================================
# Базовые предикаты
# =============================================================================

def _resolve(mechanism: MechanismRef) -> Callable:
    if callable(mechanism):
        return mechanism
    if mechanism not in MECHANISMS:
        raise StructuralError(f"Неизвестный механизм {mechanism!r}")
    return MECHANISMS[mechanism]


def agent_utility(outcome: Outcome, agent: AgentId, true_valuation: Fraction) -> Fraction:
    """π_i·v_i − p_i; неучастник получает 0"""
    won = true_valuation if outcome.winner == agent else ZERO
    return won - outcome.payment(agent)


def check_non_deficit(outcome: Outcome) -> bool:
    return outcome.surplus >= 0


def budget_ratio(surplus: Fraction, welfare: Fraction) -> Fraction:
    if welfare == 0:
        return ZERO
    return Fraction(surplus) / Fraction(welfare)


# =============================================================================
# Пространство отклонений
# =============================================================================

def valuation_grid(network: SocialNetwork, extras: Iterable = ()) -> tuple:
    """
    {0} ∪ истинные оценки ∪ середины между соседними ∪ {max + 1} ∪ extras.
    Исход одного предмета меняется только при смене порядка заявок,
    поэтому одной точки на каждый интервал достаточно.
    """
    values = sorted(set(network.valuations.values()))
    grid = {ZERO, *values}
    grid.update((a + b) / 2 for a, b in zip(values, values[1:]))
    grid.add((values[-1] if values else ZERO) + 1)
    grid.update(Fraction(x) for x in extras)
    return tuple(sorted(grid))


def invitation_subsets(network: SocialNetwork, agent: AgentId,
                       settings: AuditSettings) -> tuple:
    """
    Возвращает (подмножества соседей, перебор_полный).
    При степени выше degree_cap берётся subset_samples случайных подмножеств
    плюс пустое и полное.
    """
    candidates = sorted(network.neighbours_of(agent) - {network.owner})
    if len(candidates) <= settings.degree_cap:
        subsets = [
            combo
            for size in range(len(candidates) + 1)
            for combo in combinations(candidates, size)
        ]
        return tuple(subsets), True

    rng = np.random.default_rng([settings.seed, network.agents.index(agent)])
    picked = {(), tuple(candidates)}
    for _ in range(settings.subset_samples):
        mask = rng.integers(0, 2, size=len(candidates)).astype(bool)
        picked.add(tuple(c for c, keep in zip(candidates, mask) if keep))
    return tuple(sorted(picked, key=lambda s: (len(s), s))), False


def sampled_agents(network: SocialNetwork, settings: AuditSettings) -> tuple:
    """Агенты, для которых перебор приглашений не полный"""
    cap = settings.degree_cap
    return tuple(
        a for a in network.agents
        if len(network.neighbours_of(a) - {network.owner}) > cap
    )


# =============================================================================
# IR
# =============================================================================

def check_ir(network: SocialNetwork, mechanism: MechanismRef,
             settings: AuditSettings = AuditSettings()) -> IRVerdict:
    evaluate = _resolve(mechanism)
    truthful = StrategyProfile.truthful(network)

    for agent in network.agents:
        value = network.valuations[agent]
        subsets, _ = invitation_subsets(network, agent, settings)
        for invited in subsets:
            profile = truthful.with_report(agent, Report(value, frozenset(invited)))
            utility = agent_utility(evaluate(network, profile), agent, value)
            if utility < 0:
                logger.warning("IR нарушено: %s приглашает %s, полезность %s",
                               agent, invited, utility)
                return IRVerdict(
                    holds=False,
                    witness_agent=agent,
                    witness_invited=invited,
                    witness_utility=utility,
                    sampled_agents=sampled_agents(network, settings),
                )
    return IRVerdict(holds=True, sampled_agents=sampled_agents(network, settings))


# =============================================================================
# IC
# =============================================================================

def _audit_agent(task: tuple) -> list:
    """Перебор отклонений одного агента; остальные честны"""
    network, mechanism, agent, grid, subsets, truthful_utility = task
    evaluate = _resolve(mechanism)
    truthful = StrategyProfile.truthful(network)
    value = network.valuations[agent]

    found = []
    for reported in grid:
        for invited in subsets:
            deviation = Deviation(agent, reported, invited)
            outcome = evaluate(network, truthful.with_report(agent, deviation.report()))
            utility = agent_utility(outcome, agent, value)
            if utility > truthful_utility:
                found.append(ICViolation(deviation, truthful_utility, utility))
    return found


def audit_ic(network: SocialNetwork, mechanism: MechanismRef,
             settings: AuditSettings = AuditSettings()) -> tuple:
    """
    Все односторонние отклонения со строгим выигрышем.
    Граф пересобирается на каждое отклонение, так что отрезанные агенты
    выпадают из торгов. Результат отсортирован и не зависит от числа процессов.
    """
    evaluate = _resolve(mechanism)
    grid = valuation_grid(network, settings.grid_extras)
    truthful_outcome = evaluate(network, StrategyProfile.truthful(network))

    tasks = []
    for agent in network.agents:
        subsets, _ = invitation_subsets(network, agent, settings)
        baseline = agent_utility(truthful_outcome, agent, network.valuations[agent])
        tasks.append((network, mechanism, agent, grid, subsets, baseline))

    if settings.workers > 1 and len(tasks) > 1:
        logger.info("IC аудит: %d агентов на %d процессах", len(tasks), settings.workers)
        with Pool(processes=settings.workers) as pool:
            chunks = pool.map(_audit_agent, tasks)
    else:
        chunks = [_audit_agent(task) for task in tasks]

    violations = sorted(
        (v for chunk in chunks for v in chunk),
        key=lambda v: v.deviation,
    )
    if violations:
        logger.info("IC аудит: найдено %d выгодных отклонений", len(violations))
    return tuple(violations)


# =============================================================================
# Эффективность и бюджет
# =============================================================================

def efficiency_report(network: SocialNetwork, mechanism: MechanismRef = "nrm") -> EfficiencyRecord:
    truthful = StrategyProfile.truthful(network)
    achieved = _resolve(mechanism)(network, truthful).social_welfare
    baseline = MECHANISMS["cavallo-neighbours"](network, truthful).social_welfare
    optimal = max(network.valuations.values(), default=ZERO)
    record = EfficiencyRecord(achieved, baseline, optimal)
    if mechanism == "nrm" and not record.baseline_holds:
        logger.error("NRM уступает Cavallo среди соседей: %s < %s", achieved, baseline)
    return record


def measure_budget_balance(records: Iterable) -> BudgetTrend:
    """
    records: тройки (n, surplus, social_welfare) или записи свипа.
    Нужны минимум две корзины n.
    """
    buckets = {}
    for record in records:
        if isinstance(record, tuple):
            n, surplus, welfare = record
        else:
            n, surplus, welfare = record.n, record.surplus, record.social_welfare
        buckets.setdefault(n, []).append(budget_ratio(surplus, welfare))

    if len(buckets) < 2:
        raise InsufficientDataError(
            f"Для тренда нужно минимум 2 размера, получено {len(buckets)}"
        )
    return BudgetTrend(tuple(
        (n, sum(ratios, ZERO) / len(ratios), len(ratios))
        for n, ratios in sorted(buckets.items())
    ))


def run_audit(network: SocialNetwork, mechanism: str,
              settings: AuditSettings = AuditSettings()) -> AuditReport:
    """Полный отчёт по экземпляру: IR, ND, IC, эффективность, бюджет"""
    evaluate = _resolve(mechanism)
    outcome = evaluate(network, StrategyProfile.truthful(network))
    logger.info("Аудит %s: %d агентов", mechanism, len(network.valuations))

    return AuditReport(
        mechanism=mechanism,
        ir=check_ir(network, mechanism, settings),
        nd_holds=check_non_deficit(outcome),
        ic_violations=audit_ic(network, mechanism, settings),
        efficiency=efficiency_report(network, mechanism),
        budget_ratio=budget_ratio(outcome.surplus, outcome.social_welfare),
        sampled_agents=sampled_agents(network, settings),
    )
