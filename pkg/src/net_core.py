# src/net_core.py
"""
Модель социальной сети и сгенерированного графа приглашений.

Здесь строится граф G(θ̂) по отчётам агентов и считаются все структурные
величины, которые нужны механизмам: глубины, дочерние соседи, множества
доминируемых вершин V_i, последовательности предков A_i и блоки соседей.
Все объекты неизменяемы после создания и безопасно разделяются между
процессами.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import networkx as nx

from errors import MalformedInputError, MissingAgentError, StructuralError
from money import ZERO, to_money

logger = logging.getLogger(__name__)

AgentId = str


# =============================================================================
# Сеть и отчёты агентов
# =============================================================================

@dataclass(frozen=True)
class SocialNetwork:
    """
    Истинное состояние мира: владелец, оценки агентов и их соседи.

    neighbours содержит и владельца: neighbours[owner]: это его прямые соседи.
    Рёбра хранятся симметрично (объявления соседства неориентированные).
    """
    owner: AgentId
    valuations: Mapping[AgentId, Fraction]
    neighbours: Mapping[AgentId, frozenset]

    def __post_init__(self):
        object.__setattr__(self, "valuations", dict(self.valuations))
        object.__setattr__(
            self, "neighbours",
            {k: frozenset(v) for k, v in self.neighbours.items()},
        )
        self._validate()

    def _validate(self):
        if self.owner in self.valuations:
            raise MalformedInputError(
                f"Владелец {self.owner!r} не может быть участником торгов",
                code="E_OWNER_AS_AGENT",
            )
        known = set(self.valuations) | {self.owner}
        for agent, value in self.valuations.items():
            if value < 0:
                raise MalformedInputError(
                    f"Отрицательная оценка у агента {agent!r}: {value}",
                    code="E_NEGATIVE_VALUE", field=f"agents.{agent}.valuation",
                )
        for agent, nbrs in self.neighbours.items():
            if agent not in known:
                raise MalformedInputError(f"Неизвестный агент {agent!r}", code="E_UNKNOWN_ID")
            for other in nbrs:
                if other not in known:
                    raise MalformedInputError(
                        f"Агент {agent!r} ссылается на неизвестного соседа {other!r}",
                        code="E_UNKNOWN_ID", field=f"agents.{agent}.neighbours",
                    )
                if other == agent:
                    raise MalformedInputError(
                        f"Петля у агента {agent!r}", code="E_SELF_LOOP",
                        field=f"agents.{agent}.neighbours",
                    )
        graph = nx.Graph()
        graph.add_nodes_from(known)
        graph.add_edges_from((a, b) for a, nbrs in self.neighbours.items() for b in nbrs)
        reached = nx.node_connected_component(graph, self.owner)
        missing = sorted(known - reached)
        if missing:
            raise MalformedInputError(
                f"Агенты не связаны с владельцем: {', '.join(missing)}",
                code="E_DISCONNECTED",
            )

    @classmethod
    def from_declarations(cls, owner: AgentId,
                          declarations: Iterable[tuple]) -> "SocialNetwork":
        """
        Собирает сеть из объявлений (id, valuation, neighbours).
        Списки соседей считаются неориентированными и симметризуются.
        """
        valuations = {}
        adjacency = {owner: set()}
        for agent, valuation, nbrs in declarations:
            if agent in valuations:
                raise MalformedInputError(f"Повторный агент {agent!r}", code="E_DUPLICATE_ID")
            nbrs = list(nbrs)
            if len(set(nbrs)) != len(nbrs):
                raise MalformedInputError(
                    f"Повторяющиеся соседи у агента {agent!r}",
                    code="E_DUPLICATE_EDGE", field=f"agents.{agent}.neighbours",
                )
            valuations[agent] = to_money(valuation, field=f"agents.{agent}.valuation")
            adjacency.setdefault(agent, set())
            for other in nbrs:
                if other == agent:
                    raise MalformedInputError(
                        f"Петля у агента {agent!r}", code="E_SELF_LOOP",
                        field=f"agents.{agent}.neighbours",
                    )
                adjacency[agent].add(other)
                adjacency.setdefault(other, set()).add(agent)
        return cls(owner=owner, valuations=valuations, neighbours=adjacency)

    @property
    def agents(self) -> tuple:
        return tuple(sorted(self.valuations))

    @property
    def owner_neighbours(self) -> frozenset:
        return self.neighbours.get(self.owner, frozenset())

    def neighbours_of(self, agent: AgentId) -> frozenset:
        return self.neighbours.get(agent, frozenset())

    def with_valuations(self, valuations: Mapping[AgentId, Fraction]) -> "SocialNetwork":
        return SocialNetwork(owner=self.owner, valuations=valuations, neighbours=self.neighbours)

    def undirected_edges(self) -> list:
        """Список неориентированных рёбер, каждое один раз"""
        edges = set()
        for a, nbrs in self.neighbours.items():
            for b in nbrs:
                edges.add((a, b) if a < b else (b, a))
        return sorted(edges)


@dataclass(frozen=True)
class Report:
    """Отчёт агента θ̂_i = (v̂_i, r̂_i)"""
    valuation: Fraction
    invited: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "valuation", to_money(self.valuation))
        object.__setattr__(self, "invited", frozenset(self.invited))


@dataclass(frozen=True)
class StrategyProfile:
    """
    Профиль отчётов. Агент без записи: это ABSENT (θ̂_i = nil).
    """
    entries: Mapping[AgentId, Report]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    @classmethod
    def truthful(cls, network: SocialNetwork) -> "StrategyProfile":
        """Все честно сообщают оценку и приглашают всех соседей"""
        return cls({
            agent: Report(network.valuations[agent], network.neighbours_of(agent))
            for agent in network.agents
        })

    def get(self, agent: AgentId) -> Report | None:
        return self.entries.get(agent)

    def with_report(self, agent: AgentId, report: Report) -> "StrategyProfile":
        entries = dict(self.entries)
        entries[agent] = report
        return StrategyProfile(entries)

    def validate_against(self, network: SocialNetwork):
        for agent in sorted(self.entries):
            report = self.entries[agent]
            if agent not in network.valuations:
                raise MalformedInputError(
                    f"Профиль ссылается на неизвестного агента {agent!r}",
                    code="E_UNKNOWN_ID", field=f"strategy.{agent}",
                )
            if report.valuation < 0:
                raise MalformedInputError(
                    f"Отрицательная заявленная оценка у агента {agent!r}",
                    code="E_NEGATIVE_VALUE", field=f"strategy.{agent}.reported_valuation",
                )
            extra = report.invited - network.neighbours_of(agent)
            if extra:
                raise MalformedInputError(
                    f"Агент {agent!r} приглашает не-соседей: {', '.join(sorted(extra))}",
                    code="E_NOT_NEIGHBOUR", field=f"strategy.{agent}.invited",
                )


# =============================================================================
# Сгенерированный граф
# =============================================================================

@dataclass(frozen=True)
class DominationView:
    """V_i, n_i и A_i для всех вершин графа"""
    dominated: Mapping[AgentId, frozenset]
    size: Mapping[AgentId, int]
    ancestors: Mapping[AgentId, tuple]


class GeneratedGraph:
    """
    Граф G(θ̂): вершины, достижимые от владельца по приглашениям.

    Рёбра ориентированы (пригласивший -> приглашённый). Вершины, недостижимые
    от владельца по переданным рёбрам, отбрасываются при создании.
    """

    def __init__(self, owner: AgentId, reported_valuation: Mapping[AgentId, Fraction],
                 edges: Iterable[tuple]):
        digraph = nx.DiGraph()
        digraph.add_node(owner)
        digraph.add_nodes_from(reported_valuation)
        known = set(reported_valuation) | {owner}
        digraph.add_edges_from(
            (u, v) for u, v in edges if v != owner and u in known and v in known
        )

        depth = nx.single_source_shortest_path_length(digraph, owner)
        digraph.remove_nodes_from([v for v in list(digraph.nodes) if v not in depth])

        self._owner = owner
        self._digraph = digraph
        self._vertices = frozenset(depth)
        self._bidders = tuple(sorted(v for v in depth if v != owner))
        self._edges = frozenset(digraph.edges)
        self._valuation = {v: to_money(reported_valuation[v]) for v in self._bidders}
        self._depth = dict(depth)
        self._child_neighbours = {
            v: frozenset(u for u in digraph.successors(v) if depth[u] == depth[v] + 1)
            for v in depth
        }
        self._domination = _compute_domination(self)

    # --- свойства ---

    @property
    def owner(self) -> AgentId:
        return self._owner

    @property
    def vertices(self) -> frozenset:
        return self._vertices

    @property
    def bidders(self) -> tuple:
        """Вершины без владельца, по возрастанию id"""
        return self._bidders

    @property
    def edges(self) -> frozenset:
        return self._edges

    @property
    def reported_valuation(self) -> Mapping[AgentId, Fraction]:
        return self._valuation

    @property
    def depth(self) -> Mapping[AgentId, int]:
        return self._depth

    @property
    def child_neighbours(self) -> Mapping[AgentId, frozenset]:
        return self._child_neighbours

    def __contains__(self, agent) -> bool:
        return agent in self._vertices

    def __len__(self) -> int:
        return len(self._bidders)

    def __repr__(self) -> str:
        return f"GeneratedGraph(owner={self._owner!r}, bidders={len(self._bidders)}, edges={len(self._edges)})"

    def require(self, agent: AgentId):
        if agent not in self._vertices:
            raise MissingAgentError(f"Агент {agent!r} отсутствует в графе")

    # --- производные графы ---

    def without(self, removed: Iterable[AgentId]) -> "GeneratedGraph":
        """g ⊖ D: удаляет вершины D и всё, что стало недостижимым"""
        removed = frozenset(removed)
        if self._owner in removed:
            raise StructuralError("Нельзя удалить владельца из графа")
        return GeneratedGraph(
            self._owner,
            {v: w for v, w in self._valuation.items() if v not in removed},
            [(u, v) for u, v in self._edges if u not in removed and v not in removed],
        )

    def is_tree(self) -> bool:
        """Неориентированная основа графа: дерево"""
        return nx.is_tree(self._digraph.to_undirected(as_view=True))

    # --- доминирование ---

    def domination(self) -> DominationView:
        """V_i и A_i по дереву доминаторов, посчитанные при создании графа"""
        return self._domination

    def top_bidder(self) -> tuple:
        return top_bid_excluding(self, frozenset())


def _compute_domination(g: GeneratedGraph) -> DominationView:
    idom = nx.immediate_dominators(g._digraph, g.owner)

    children = {v: [] for v in g.vertices}
    for v in g.vertices:
        parent = idom.get(v, v)
        if v != g.owner and parent != v:
            children[parent].append(v)

    # Предки в дереве доминаторов, от владельца вниз
    ancestors = {g.owner: ()}
    order = [g.owner]
    queue = deque([g.owner])
    while queue:
        v = queue.popleft()
        for child in children[v]:
            chain = ancestors[v] + ((v,) if v != g.owner else ())
            ancestors[child] = chain
            order.append(child)
            queue.append(child)

    dominated = {}
    for v in reversed(order):
        members = {v}
        for child in children[v]:
            members |= dominated[child]
        dominated[v] = frozenset(members)

    return DominationView(
        dominated=dict(dominated),
        size={v: len(s) for v, s in dominated.items()},
        ancestors=dict(ancestors),
    )


# =============================================================================
# Операции
# =============================================================================

def build_generated_graph(network: SocialNetwork, profile: StrategyProfile) -> GeneratedGraph:
    """
    Замыкание приглашений от владельца.

    Владелец приглашает всех своих соседей. Агент, до которого дошло
    приглашение, но у которого нет записи в профиле, считается отказавшимся
    от участия и никого не приглашает.
    """
    profile.validate_against(network)

    def invited_by(agent):
        if agent == network.owner:
            return network.owner_neighbours
        return profile.get(agent).invited

    present = {network.owner}
    queue = deque([network.owner])
    while queue:
        agent = queue.popleft()
        for other in sorted(invited_by(agent)):
            if other == network.owner or other in present:
                continue
            if profile.get(other) is None:
                continue
            present.add(other)
            queue.append(other)

    edges = [
        (agent, other)
        for agent in present
        for other in invited_by(agent)
        if other in present and other != network.owner
    ]
    valuations = {a: profile.get(a).valuation for a in present if a != network.owner}
    graph = GeneratedGraph(network.owner, valuations, edges)
    logger.debug("Построен граф: %d участников из %d, %d рёбер",
                 len(graph), len(network.valuations), len(graph.edges))
    return graph


def truthful_graph(network: SocialNetwork) -> GeneratedGraph:
    return build_generated_graph(network, StrategyProfile.truthful(network))


def dominated_set(g: GeneratedGraph, i: AgentId) -> frozenset:
    """V_i: сам агент и все, кто недостижим от владельца без него"""
    g.require(i)
    if i == g.owner:
        raise StructuralError("Множество V_i не определено для владельца")
    return g.domination().dominated[i]


def ancestor_sequence(g: GeneratedGraph, i: AgentId) -> tuple:
    """A_i: все разрезающие вершины между владельцем и i по возрастанию глубины"""
    g.require(i)
    return g.domination().ancestors[i]


def sibling_block(g: GeneratedGraph, prev: AgentId, a: AgentId) -> frozenset:
    g.require(prev)
    g.require(a)
    block = g.child_neighbours[prev]
    if a not in block:
        raise StructuralError(f"Агент {a!r} не является дочерним соседом {prev!r}")
    return block - {a}


def top_bid_excluding(g: GeneratedGraph, excluded) -> tuple:
    """
    v̂^(1) по вершинам вне excluded.
    Ничья разрешается меньшим id; пустое множество даёт (0, None).
    """
    best = None
    for bidder in g.bidders:
        if bidder in excluded:
            continue
        if best is None or g.reported_valuation[bidder] > g.reported_valuation[best]:
            best = bidder
    if best is None:
        return ZERO, None
    return g.reported_valuation[best], best


def oracle_dominated_set(g: GeneratedGraph, i: AgentId) -> frozenset:
    # Наивная проверка: удалить i и посмотреть, кто остался достижим
    g.require(i)
    if i == g.owner:
        raise StructuralError("Множество V_i не определено для владельца")
    view = nx.restricted_view(g._digraph, [i], [])
    reached = nx.descendants(view, g.owner) | {g.owner}
    return frozenset(v for v in g.vertices if v not in reached)
