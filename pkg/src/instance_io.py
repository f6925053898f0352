# src/instance_io.py
"""
Файлы экземпляров (JSON) и детерминированный вывод результатов.

Формат экземпляра:
    {
      "owner": "o",
      "agents": [{"id": "a", "valuation": "2.5", "neighbours": ["o", "d"]}, ...],
      "strategy": [{"id": "b", "reported_valuation": 5, "invited": []}, ...]
    }

Блок strategy необязателен. Агенты, не упомянутые в нём, честны и приглашают
всех соседей; запись с "reported_valuation": null означает отказ от участия.
"""

import json
import logging

from errors import MalformedInputError
from mechanisms import Outcome
from money import format_money, to_money
from net_core import Report, SocialNetwork, StrategyProfile

logger = logging.getLogger(__name__)

NO_WINNER = "no winner"


# =============================================================================
# Разбор
# =============================================================================

def _require(obj: dict, key: str, kind, path: str):
    if key not in obj:
        raise MalformedInputError(f"Нет обязательного поля {key!r}", field=f"{path}.{key}".lstrip("."))
    value = obj[key]
    if not isinstance(value, kind):
        raise MalformedInputError(
            f"Поле {key!r} имеет неверный тип {type(value).__name__}",
            field=f"{path}.{key}".lstrip("."),
        )
    return value


def _id_list(values: list, path: str) -> list:
    for i, item in enumerate(values):
        if not isinstance(item, str):
            raise MalformedInputError(f"Ожидался id агента, получено {item!r}", field=f"{path}[{i}]")
    return values


def parse_instance(text: str) -> tuple:
    """Возвращает (SocialNetwork, StrategyProfile); ошибки несут строку или путь поля"""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedInputError(f"Некорректный JSON: {e.msg}, столбец {e.colno}", line=e.lineno)

    if not isinstance(document, dict):
        raise MalformedInputError("Документ должен быть JSON-объектом")

    owner = _require(document, "owner", str, "")
    agents = _require(document, "agents", list, "")

    declarations = []
    for index, entry in enumerate(agents):
        path = f"agents[{index}]"
        if not isinstance(entry, dict):
            raise MalformedInputError("Описание агента должно быть объектом", field=path)
        agent = _require(entry, "id", str, path)
        if "valuation" not in entry:
            raise MalformedInputError("Нет оценки агента", field=f"{path}.valuation")
        valuation = to_money(entry["valuation"], field=f"{path}.valuation")
        neighbours = _id_list(_require(entry, "neighbours", list, path), f"{path}.neighbours")
        declarations.append((agent, valuation, neighbours))

    network = SocialNetwork.from_declarations(owner, declarations)
    profile = StrategyProfile.truthful(network)

    seen = set()
    for index, entry in enumerate(document.get("strategy") or []):
        path = f"strategy[{index}]"
        if not isinstance(entry, dict):
            raise MalformedInputError("Запись стратегии должна быть объектом", field=path)
        agent = _require(entry, "id", str, path)
        if agent in seen:
            raise MalformedInputError(f"Повторная стратегия агента {agent!r}",
                                      code="E_DUPLICATE_ID", field=path)
        seen.add(agent)
        if agent not in network.valuations:
            raise MalformedInputError(f"Стратегия неизвестного агента {agent!r}",
                                      code="E_UNKNOWN_ID", field=path)

        if entry.get("reported_valuation", 0) is None:
            entries = dict(profile.entries)
            del entries[agent]
            profile = StrategyProfile(entries)
            continue

        reported = to_money(
            entry.get("reported_valuation", network.valuations[agent]),
            field=f"{path}.reported_valuation",
        )
        invited = entry.get("invited")
        if invited is None:
            invited = sorted(network.neighbours_of(agent))
        elif not isinstance(invited, list):
            raise MalformedInputError("invited должен быть списком", field=f"{path}.invited")
        invited = _id_list(invited, f"{path}.invited")
        profile = profile.with_report(agent, Report(reported, frozenset(invited)))

    profile.validate_against(network)
    logger.debug("Экземпляр разобран: владелец %s, %d агентов, %d отклонений от честной стратегии",
                 owner, len(network.valuations), len(seen))
    return network, profile


# =============================================================================
# Сериализация
# =============================================================================

def serialize_instance(network: SocialNetwork, profile: StrategyProfile | None = None) -> str:
    """Обратная к parse_instance: parse(serialize(x)) == x"""
    document = {
        "owner": network.owner,
        "agents": [
            {
                "id": agent,
                "valuation": format_money(network.valuations[agent]),
                "neighbours": sorted(network.neighbours_of(agent)),
            }
            for agent in network.agents
        ],
    }

    if profile is not None:
        truthful = StrategyProfile.truthful(network)
        strategy = []
        for agent in network.agents:
            report = profile.get(agent)
            if report is None:
                strategy.append({"id": agent, "reported_valuation": None})
            elif report != truthful.get(agent):
                strategy.append({
                    "id": agent,
                    "reported_valuation": format_money(report.valuation),
                    "invited": sorted(report.invited),
                })
        if strategy:
            document["strategy"] = strategy

    return json.dumps(document, ensure_ascii=False, indent=2) + "\n"


# =============================================================================
# Вывод результатов
# =============================================================================

def outcome_to_dict(outcome: Outcome) -> dict:
    return {
        "mechanism": outcome.mechanism,
        "winner": outcome.winner,
        "payments": {k: format_money(v) for k, v in sorted(outcome.payments.items())},
        "surplus": format_money(outcome.surplus),
        "social_welfare": format_money(outcome.social_welfare),
        "trace": [
            {
                "step": step.index,
                "ancestor": step.ancestor,
                "required_payment": format_money(step.required_payment),
                "prev_required_payment": format_money(step.prev_required_payment),
                "block": list(step.block),
                "block_sizes": {k: step.block_sizes[k] for k in step.block},
                "counterfactual_surplus": {
                    k: format_money(step.counterfactual_surplus[k]) for k in step.block
                },
                "rebates": {k: format_money(step.rebates[k]) for k in step.block},
                "step_surplus": format_money(step.step_surplus),
                "allocated_here": step.allocated_here,
            }
            for step in outcome.trace
        ],
    }


def format_outcome(outcome: Outcome, trace: bool = False) -> str:
    lines = [
        f"mechanism: {outcome.mechanism}",
        f"winner: {outcome.winner if outcome.winner is not None else NO_WINNER}",
        "payments:",
    ]
    for agent, amount in sorted(outcome.payments.items()):
        lines.append(f"  p_{agent} = {format_money(amount)}")
    lines.append(f"surplus = {format_money(outcome.surplus)}")
    lines.append(f"social_welfare = {format_money(outcome.social_welfare)}")

    if trace and outcome.trace:
        lines.append("trace:")
        for step in outcome.trace:
            lines.append(
                f"  step {step.index}: a_{step.index} = {step.ancestor}, "
                f"p_auc = {format_money(step.required_payment)}, "
                f"p_prev = {format_money(step.prev_required_payment)}"
            )
            lines.append(f"    block: {', '.join(step.block)}")
            for k in step.block:
                lines.append(
                    f"    n_{k} = {step.block_sizes[k]}, "
                    f"S_-{k} = {format_money(step.counterfactual_surplus[k])}, "
                    f"R_{k} = {format_money(step.rebates[k])}"
                )
            lines.append(f"    step_surplus = {format_money(step.step_surplus)}")
            if step.allocated_here:
                lines.append(f"    allocated to {step.ancestor}")
    return "\n".join(lines) + "\n"


def format_audit(report) -> str:
    """Текстовый отчёт аудита; report: audit.AuditReport"""
    ir = report.ir
    lines = [f"mechanism: {report.mechanism}"]
    if ir.holds:
        lines.append("IR: holds")
    else:
        lines.append(
            f"IR: violated by {ir.witness_agent} inviting [{', '.join(ir.witness_invited)}], "
            f"utility {format_money(ir.witness_utility)}"
        )
    lines.append(f"ND: {'holds' if report.nd_holds else 'violated'}")
    lines.append(f"IC violations: {len(report.ic_violations)}")
    for v in report.ic_violations:
        d = v.deviation
        lines.append(
            f"  {d.agent}: reports {format_money(d.reported_valuation)}, "
            f"invites [{', '.join(d.invited)}], utility "
            f"{format_money(v.truthful_utility)} -> {format_money(v.deviant_utility)}"
        )
    eff = report.efficiency
    lines.append(
        f"efficiency: mechanism {format_money(eff.mechanism_sw)}, "
        f"neighbour baseline {format_money(eff.neighbour_baseline_sw)}, "
        f"optimum {format_money(eff.optimal_sw)}, ratio {format_money(eff.ratio)}"
    )
    lines.append(f"budget_ratio = {format_money(report.budget_ratio)}")
    if report.sampled_agents:
        lines.append(f"sampled, not exhaustive: {', '.join(report.sampled_agents)}")
    return "\n".join(lines) + "\n"
