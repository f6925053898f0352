# src/mechanisms.py
"""
Механизмы распределения одного предмета в сети приглашений.

- run_cavallo: механизм Cavallo поверх сгенерированного графа
- run_cavallo_neighbours: Cavallo только среди прямых соседей владельца
- run_nrm: сетевой механизм перераспределения (NRM) для графов
- run_nrm_tree: та же процедура через пути в дереве, без доминаторов

Все функции чистые: принимают неизменяемый граф и возвращают Outcome.
"""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping

from errors import EmptyInstanceError, StructuralError
from money import ZERO
from net_core import (
    AgentId,
    GeneratedGraph,
    SocialNetwork,
    StrategyProfile,
    ancestor_sequence,
    build_generated_graph,
    dominated_set,
    top_bid_excluding,
    truthful_graph,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepRecord:
    """Один шаг NRM: предок a_j, его блок и перераспределение"""
    index: int
    ancestor: AgentId
    required_payment: Fraction
    prev_required_payment: Fraction
    block: tuple
    block_sizes: Mapping[AgentId, int]
    counterfactual_surplus: Mapping[AgentId, Fraction]
    rebates: Mapping[AgentId, Fraction]
    step_surplus: Fraction
    allocated_here: bool


@dataclass(frozen=True)
class Outcome:
    """
    Результат механизма.
    payments: положительное значение: агент платит владельцу,
    отрицательное: получает от владельца.
    """
    mechanism: str
    winner: AgentId | None
    payments: Mapping[AgentId, Fraction]
    surplus: Fraction
    social_welfare: Fraction
    trace: tuple = field(default_factory=tuple)

    def payment(self, agent: AgentId) -> Fraction:
        return self.payments.get(agent, ZERO)

    def rebate(self, agent: AgentId) -> Fraction:
        """Сумма R_k по всем шагам трассы"""
        return sum((step.rebates.get(agent, ZERO) for step in self.trace), ZERO)


def _require_bidders(g: GeneratedGraph):
    if not g.bidders:
        raise EmptyInstanceError("В графе нет ни одного участника торгов")


# =============================================================================
# Cavallo
# =============================================================================

def efficient_social_welfare(g: GeneratedGraph) -> Fraction:
    """Оптимум при полной информации: максимальная заявленная оценка"""
    _require_bidders(g)
    value, _ = g.top_bidder()
    return value


def run_cavallo(g: GeneratedGraph) -> Outcome:
    """
    Cavallo в сети: VCG с учётом диффузии плюс скидка по порядковым статистикам.

    Удаление агента i убирает вместе с ним всё его множество V_i: без его
    приглашений эти агенты не участвуют. Скидка v̂_{m3}/n достаётся двум
    лучшим по рангу участникам, v̂_{m2}/n: остальным.
    """
    _require_bidders(g)
    values = g.reported_valuation
    welfare, winner = g.top_bidder()

    ranked = sorted(g.bidders, key=lambda b: (-values[b], b))
    m2 = values[ranked[1]] if len(ranked) >= 2 else ZERO
    m3 = values[ranked[2]] if len(ranked) >= 3 else ZERO
    top_two = set(ranked[:2])
    n = len(ranked)

    payments = {}
    for agent in g.bidders:
        welfare_without, _ = top_bid_excluding(g, dominated_set(g, agent))
        others_welfare = welfare - (values[agent] if agent == winner else ZERO)
        vcg = welfare_without - others_welfare
        rebate = (m3 if agent in top_two else m2) / n
        payments[agent] = vcg - rebate

    surplus = sum(payments.values(), ZERO)
    logger.debug("Cavallo: победитель %s, излишек %s", winner, surplus)
    return Outcome(
        mechanism="cavallo",
        winner=winner,
        payments=payments,
        surplus=surplus,
        social_welfare=welfare,
    )


def cavallo_neighbours_graph(g: GeneratedGraph) -> GeneratedGraph:
    """Подграф из владельца и его прямых соседей, без дальнейшей диффузии"""
    neighbours = sorted(g.child_neighbours[g.owner])
    return GeneratedGraph(
        g.owner,
        {v: g.reported_valuation[v] for v in neighbours},
        [(g.owner, v) for v in neighbours],
    )


def run_cavallo_neighbours(network: SocialNetwork) -> Outcome:
    if not network.owner_neighbours:
        raise EmptyInstanceError(f"У владельца {network.owner!r} нет соседей")
    outcome = run_cavallo(cavallo_neighbours_graph(truthful_graph(network)))
    return replace(outcome, mechanism="cavallo-neighbours")


# =============================================================================
# NRM
# =============================================================================

def step_block(g: GeneratedGraph, a_prev: AgentId, a_j: AgentId) -> tuple:
    """
    X = B_{a_j} ∪ {a_j}, где B_{a_j} = r^c_{a_{j-1}} \\ {a_j}.

    a_j может и не быть дочерним соседом a_{j-1}, если между ними в графе
    разрыв по глубине; блок тогда: все дочерние соседи a_{j-1} плюс a_j.
    """
    members = (g.child_neighbours[a_prev] - {a_j}) | {a_j}
    return tuple(sorted(members))


def counterfactual_block_surplus(g: GeneratedGraph, k: AgentId, j: int,
                                 a_prev: AgentId, p_prev: Fraction) -> Fraction:
    """
    S_{-k}: излишек шага j в графе без V_k.

    A' строится в уменьшенном графе. Позиция j-1 в A' должна совпасть с
    a_{j-1}, иначе шаг в этом сценарии не наступает и S_{-k} = 0.
    """
    reduced = g.without(dominated_set(g, k))
    _, h_alt = reduced.top_bidder()
    if h_alt is None:
        return ZERO

    sequence = (reduced.owner,) + ancestor_sequence(reduced, h_alt) + (h_alt,)
    if len(sequence) <= j or sequence[j - 1] != a_prev:
        return ZERO

    top, _ = top_bid_excluding(reduced, dominated_set(reduced, sequence[j]))
    return max(ZERO, top - p_prev)


def nrm_step(g: GeneratedGraph, a_j: AgentId, a_prev: AgentId, j: int,
             p_prev: Fraction) -> StepRecord:
    g.require(a_j)
    g.require(a_prev)
    view = g.domination()
    if a_j == g.owner or (a_prev != g.owner and a_j not in view.dominated[a_prev]):
        raise StructuralError(f"{a_prev!r} не предшествует {a_j!r} в цепочке предков")

    required, _ = top_bid_excluding(g, view.dominated[a_j])
    block = step_block(g, a_prev, a_j)
    sizes = {k: view.size[k] for k in block}
    total = sum(sizes.values())

    counterfactual = {k: counterfactual_block_surplus(g, k, j, a_prev, p_prev) for k in block}
    rebates = {k: Fraction(sizes[k], total) * counterfactual[k] for k in block}
    step_surplus = required - p_prev - sum(rebates.values(), ZERO)
    allocated = g.reported_valuation[a_j] >= required

    logger.debug("NRM шаг %d: %s, p_auc=%s, блок=%s, излишек=%s",
                 j, a_j, required, ",".join(block), step_surplus)
    return StepRecord(
        index=j,
        ancestor=a_j,
        required_payment=required,
        prev_required_payment=p_prev,
        block=block,
        block_sizes=sizes,
        counterfactual_surplus=counterfactual,
        rebates=rebates,
        step_surplus=step_surplus,
        allocated_here=allocated,
    )


def _settle(g: GeneratedGraph, steps: list) -> Outcome:
    """Сводит шаги в Outcome: блок получает -R_k, победитель платит p_auc - R"""
    payments = {b: ZERO for b in g.bidders}
    winner = None
    for step in steps:
        for k, rebate in step.rebates.items():
            payments[k] -= rebate
        if step.allocated_here:
            winner = step.ancestor
            payments[winner] += step.required_payment
    surplus = sum((step.step_surplus for step in steps), ZERO)
    welfare = g.reported_valuation[winner] if winner is not None else ZERO
    return Outcome(
        mechanism="nrm",
        winner=winner,
        payments=payments,
        surplus=surplus,
        social_welfare=welfare,
        trace=tuple(steps),
    )


def run_nrm(g: GeneratedGraph) -> Outcome:
    _require_bidders(g)
    _, highest = g.top_bidder()
    sequence = (g.owner,) + ancestor_sequence(g, highest) + (highest,)

    steps = []
    p_prev = ZERO
    for j in range(1, len(sequence)):
        step = nrm_step(g, sequence[j], sequence[j - 1], j, p_prev)
        steps.append(step)
        if step.allocated_here:
            break
        p_prev = step.required_payment

    outcome = _settle(g, steps)
    logger.debug("NRM: победитель %s, излишек %s, шагов %d",
                 outcome.winner, outcome.surplus, len(steps))
    return outcome


# =============================================================================
# NRM в деревьях напрямую
# =============================================================================

class _TreeView:
    """Родители, поддеревья и пути к корню для графа-дерева"""

    def __init__(self, g: GeneratedGraph):
        if not g.is_tree():
            raise StructuralError("Граф не является деревом")
        self.g = g
        self.parent = {}
        self.children = {v: [] for v in g.vertices}
        for u, v in g.edges:
            if g.depth[u] == g.depth[v] - 1:
                self.parent[v] = u
                self.children[u].append(v)
        self._subtree = {}

    def subtree(self, v: AgentId) -> frozenset:
        if v not in self._subtree:
            members = {v}
            stack = [v]
            while stack:
                node = stack.pop()
                for child in self.children[node]:
                    members.add(child)
                    stack.append(child)
            self._subtree[v] = frozenset(members)
        return self._subtree[v]

    def path(self, v: AgentId) -> tuple:
        """(o, a_1, ..., v)"""
        chain = [v]
        while chain[-1] != self.g.owner:
            chain.append(self.parent[chain[-1]])
        return tuple(reversed(chain))

    def best(self, excluded) -> tuple:
        values = self.g.reported_valuation
        candidates = [b for b in self.g.bidders if b not in excluded]
        if not candidates:
            return ZERO, None
        holder = min(candidates, key=lambda b: (-values[b], b))
        return values[holder], holder


def run_nrm_tree(g: GeneratedGraph) -> Outcome:
    """NRM через поддеревья и пути; на деревьях совпадает с run_nrm"""
    _require_bidders(g)
    tree = _TreeView(g)
    _, highest = tree.best(frozenset())
    path = tree.path(highest)

    steps = []
    p_prev = ZERO
    for j in range(1, len(path)):
        a_j, a_prev = path[j], path[j - 1]
        required, _ = tree.best(tree.subtree(a_j))
        block = tuple(sorted(tree.children[a_prev]))
        sizes = {k: len(tree.subtree(k)) for k in block}
        total = sum(sizes.values())

        counterfactual = {}
        for k in block:
            removed = tree.subtree(k)
            _, h_alt = tree.best(removed)
            alt_path = tree.path(h_alt) if h_alt is not None else ()
            if len(alt_path) > j and alt_path[j - 1] == a_prev:
                top, _ = tree.best(removed | tree.subtree(alt_path[j]))
                counterfactual[k] = max(ZERO, top - p_prev)
            else:
                counterfactual[k] = ZERO

        rebates = {k: Fraction(sizes[k], total) * counterfactual[k] for k in block}
        step = StepRecord(
            index=j,
            ancestor=a_j,
            required_payment=required,
            prev_required_payment=p_prev,
            block=block,
            block_sizes=sizes,
            counterfactual_surplus=counterfactual,
            rebates=rebates,
            step_surplus=required - p_prev - sum(rebates.values(), ZERO),
            allocated_here=g.reported_valuation[a_j] >= required,
        )
        steps.append(step)
        if step.allocated_here:
            break
        p_prev = required

    return _settle(g, steps)


# =============================================================================
# Выбор механизма
# =============================================================================

def _evaluate_nrm(network: SocialNetwork, profile: StrategyProfile) -> Outcome:
    return run_nrm(build_generated_graph(network, profile))


def _evaluate_cavallo(network: SocialNetwork, profile: StrategyProfile) -> Outcome:
    return run_cavallo(build_generated_graph(network, profile))


def _evaluate_cavallo_neighbours(network: SocialNetwork, profile: StrategyProfile) -> Outcome:
    graph = cavallo_neighbours_graph(build_generated_graph(network, profile))
    return replace(run_cavallo(graph), mechanism="cavallo-neighbours")


MECHANISMS: dict[str, Callable[[SocialNetwork, StrategyProfile], Outcome]] = {
    "nrm": _evaluate_nrm,
    "cavallo": _evaluate_cavallo,
    "cavallo-neighbours": _evaluate_cavallo_neighbours,
}


def evaluate(mechanism: str, network: SocialNetwork,
             profile: StrategyProfile | None = None) -> Outcome:
    """Запускает механизм по имени; без профиля: все честны"""
    if mechanism not in MECHANISMS:
        raise StructuralError(
            f"Неизвестный механизм {mechanism!r}, доступны: {', '.join(MECHANISMS)}"
        )
    if profile is None:
        profile = StrategyProfile.truthful(network)
    return MECHANISMS[mechanism](network, profile)
