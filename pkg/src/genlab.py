# src/genlab.py
"""
Генерация случайных экземпляров и свипы для кривых ABB и эффективности.

Все генераторы: чистые функции от (параметры, seed). Под-сиды прогонов
выводятся из общего сида через splitmix64, поэтому порядок выполнения
и число процессов не влияют на выборки.
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from multiprocessing import Pool
from pathlib import Path

import numpy as np
import pandas as pd

from audit import budget_ratio
from errors import ConfigError, EmptyInstanceError, NrmError, SweepRunError
from mechanisms import MECHANISMS
from money import format_money, quantize_thousandths
from net_core import SocialNetwork, StrategyProfile, truthful_graph

logger = logging.getLogger(__name__)

OWNER = "o"
FAMILIES = ("tree", "graph")
CSV_COLUMNS = [
    "n", "trial", "mechanism", "surplus", "social_welfare",
    "optimal_welfare", "winner_depth", "runtime_ms",
]

_MASK64 = (1 << 64) - 1


# =============================================================================
# Сиды
# =============================================================================

def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, n: int, trial: int) -> int:
    """Под-сид прогона (n, trial); не зависит от порядка выполнения"""
    return _splitmix64(_splitmix64(_splitmix64(seed & _MASK64) ^ n) ^ trial)


# =============================================================================
# Законы распределения оценок
# =============================================================================

@dataclass(frozen=True)
class ValuationLaw:
    """uniform(lo, hi) или exponential(mean)"""
    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind == "uniform":
            if len(self.params) != 2:
                raise ConfigError("uniform требует два параметра: lo и hi")
            lo, hi = self.params
            if lo < 0 or hi < lo:
                raise ConfigError(f"Некорректные границы uniform: {lo}..{hi}")
        elif self.kind == "exponential":
            if len(self.params) != 1 or self.params[0] <= 0:
                raise ConfigError("exponential требует одно положительное среднее")
        else:
            raise ConfigError(f"Неизвестный закон распределения {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "ValuationLaw":
        """'uniform:0:100' или 'exponential:10'"""
        kind, *raw = text.strip().split(":")
        try:
            params = tuple(float(x) for x in raw)
        except ValueError:
            raise ConfigError(f"Не удалось разобрать закон {text!r}")
        return cls(kind.lower(), params)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            lo, hi = self.params
            return rng.uniform(lo, hi, size=size)
        return rng.exponential(self.params[0], size=size)

    def __str__(self) -> str:
        return ":".join([self.kind, *(f"{p:g}" for p in self.params)])


# =============================================================================
# Генераторы
# =============================================================================

def _agent_ids(n: int) -> list:
    width = max(4, len(str(n)))
    return [f"a{i:0{width}d}" for i in range(1, n + 1)]


def gen_tree(n: int, seed: int) -> SocialNetwork:
    """Случайное присоединение: каждый новый узел выбирает родителя равновероятно"""
    if n < 1:
        raise EmptyInstanceError("Размер дерева должен быть не меньше 1")
    rng = np.random.default_rng(seed)
    nodes = [OWNER, *_agent_ids(n)]
    neighbours = {v: set() for v in nodes}
    for i in range(1, n + 1):
        parent = nodes[int(rng.integers(0, i))]
        neighbours[parent].add(nodes[i])
        neighbours[nodes[i]].add(parent)
    return SocialNetwork(
        owner=OWNER,
        valuations={v: Fraction(0) for v in nodes[1:]},
        neighbours=neighbours,
    )


def gen_graph(n: int, extra_edge_factor, seed: int) -> SocialNetwork:
    """Остовное дерево из gen_tree плюс ⌊factor·n⌋ случайных рёбер без повторов"""
    factor = Fraction(str(extra_edge_factor))
    if factor < 0:
        raise ConfigError("Коэффициент дополнительных рёбер не может быть отрицательным")
    tree = gen_tree(n, seed)
    extra = math.floor(factor * n)
    if extra == 0:
        return tree

    rng = np.random.default_rng([seed, 1])
    nodes = [OWNER, *tree.agents]
    neighbours = {v: set(tree.neighbours_of(v)) for v in nodes}
    for _ in range(extra):
        i, j = rng.choice(len(nodes), size=2, replace=False)
        u, v = nodes[int(i)], nodes[int(j)]
        neighbours[u].add(v)
        neighbours[v].add(u)
    return SocialNetwork(owner=OWNER, valuations=tree.valuations, neighbours=neighbours)


def sample_valuations(network: SocialNetwork, law: ValuationLaw, seed: int) -> SocialNetwork:
    rng = np.random.default_rng(seed)
    draws = law.sample(rng, len(network.agents))
    return network.with_valuations({
        agent: quantize_thousandths(x) for agent, x in zip(network.agents, draws)
    })


# =============================================================================
# Свип
# =============================================================================

@dataclass(frozen=True)
class SweepConfig:
    family: str
    sizes: tuple
    law: ValuationLaw
    trials_per_size: int = 1
    seed: int = 42
    extra_edge_factor: Fraction = Fraction(0)
    mechanisms: tuple = ("nrm",)
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"Семейство должно быть одним из {FAMILIES}, получено {self.family!r}")
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or sizes[0] < 1 or any(a >= b for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"Размеры должны строго возрастать и быть >= 1: {sizes}")
        object.__setattr__(self, "sizes", sizes)
        if self.trials_per_size < 1:
            raise ConfigError("Число прогонов на размер должно быть >= 1")
        unknown = [m for m in self.mechanisms if m not in MECHANISMS]
        if unknown or not self.mechanisms:
            raise ConfigError(f"Неизвестные механизмы: {unknown}")
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        factor = Fraction(str(self.extra_edge_factor))
        if factor < 0:
            raise ConfigError("Коэффициент дополнительных рёбер не может быть отрицательным")
        object.__setattr__(self, "extra_edge_factor", factor)


@dataclass(frozen=True)
class SweepRecord:
    n: int
    trial: int
    mechanism: str
    surplus: Fraction
    social_welfare: Fraction
    optimal_welfare: Fraction
    winner_depth: int
    runtime_ms: float = 0

    @property
    def ratio(self) -> Fraction:
        return budget_ratio(self.surplus, self.social_welfare)


def generate_instance(config: SweepConfig, n: int, trial: int) -> SocialNetwork:
    sub_seed = derive_seed(config.seed, n, trial)
    if config.family == "tree":
        network = gen_tree(n, sub_seed)
    else:
        network = gen_graph(n, config.extra_edge_factor, sub_seed)
    return sample_valuations(network, config.law, _splitmix64(sub_seed))


def _run_trial(task: tuple) -> list:
    config, n, trial = task
    sub_seed = derive_seed(config.seed, n, trial)
    try:
        network = generate_instance(config, n, trial)
        graph = truthful_graph(network)
        profile = StrategyProfile.truthful(network)
        optimal = max(network.valuations.values())

        records = []
        for name in config.mechanisms:
            started = time.perf_counter()
            outcome = MECHANISMS[name](network, profile)
            elapsed = (time.perf_counter() - started) * 1000 if config.timing else 0
            depth = graph.depth[outcome.winner] if outcome.winner is not None else 0
            records.append(SweepRecord(
                n=n,
                trial=trial,
                mechanism=name,
                surplus=outcome.surplus,
                social_welfare=outcome.social_welfare,
                optimal_welfare=optimal,
                winner_depth=depth,
                runtime_ms=round(elapsed, 3),
            ))
        logger.debug("Прогон n=%d trial=%d (под-сид %d) готов", n, trial, sub_seed)
        return records
    except ConfigError:
        raise
    except (NrmError, ArithmeticError, KeyError, ValueError) as e:
        raise SweepRunError(f"Прогон n={n}, trial={trial} упал: {e}", sub_seed) from e


def run_sweep(config: SweepConfig) -> tuple:
    """Записи упорядочены по (n, trial, механизм) при любом числе процессов"""
    tasks = [(config, n, trial) for n in config.sizes for trial in range(config.trials_per_size)]
    logger.info("Свип %s: %d прогонов, механизмы %s",
                config.family, len(tasks), ",".join(config.mechanisms))

    if config.workers > 1 and len(tasks) > 1:
        with Pool(processes=config.workers) as pool:
            chunks = pool.map(_run_trial, tasks)
    else:
        chunks = [_run_trial(task) for task in tasks]
    return tuple(record for chunk in chunks for record in chunk)


# =============================================================================
# Сохранение и сводка
# =============================================================================

def records_to_frame(records) -> pd.DataFrame:
    rows = []
    for record in records:
        row = asdict(record)
        for key in ("surplus", "social_welfare", "optimal_welfare"):
            row[key] = format_money(row[key])
        rows.append(row)
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_records(records, path, fmt: str = "csv") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = records_to_frame(records)
    if fmt == "csv":
        df.to_csv(path, index=False)
    elif fmt == "json":
        path.write_text(
            json.dumps(df.to_dict(orient="records"), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
    else:
        raise ConfigError(f"Неизвестный формат вывода {fmt!r}")
    logger.info("Сохранено %d записей в %s", len(df), path)
    return path


def summarize(records) -> pd.DataFrame:
    """Средние по (n, механизм): surplus/welfare, welfare/optimum, глубина победителя"""
    rows = [
        {
            "n": r.n,
            "mechanism": r.mechanism,
            "ratio": float(r.ratio),
            "efficiency": float(r.social_welfare / r.optimal_welfare) if r.optimal_welfare else 1.0,
            "winner_depth": r.winner_depth,
        }
        for r in records
    ]
    df = pd.DataFrame(rows, columns=["n", "mechanism", "ratio", "efficiency", "winner_depth"])
    summary = df.groupby(["n", "mechanism"], sort=True).agg(
        trials=("ratio", "size"),
        mean_ratio=("ratio", "mean"),
        mean_efficiency=("efficiency", "mean"),
        mean_winner_depth=("winner_depth", "mean"),
    )
    return summary.reset_index()
