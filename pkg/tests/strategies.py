"""Стратегии hypothesis и профили настроек для свойств механизмов"""

from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from genlab import gen_graph, gen_tree

# Быстрые проверки структуры
QUICK_SETTINGS = settings(max_examples=30, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])

# Свойства механизмов на небольших экземплярах
STANDARD_SETTINGS = settings(max_examples=60, deadline=None, derandomize=True,
                             suppress_health_check=[HealthCheck.too_slow])

# Перебор отклонений: каждый пример: сотни запусков механизма
EXHAUSTIVE_SETTINGS = settings(max_examples=12, deadline=None, derandomize=True,
                               suppress_health_check=[HealthCheck.too_slow])


@st.composite
def integer_valuations(draw, network, max_value: int = 20):
    values = draw(st.lists(
        st.integers(min_value=0, max_value=max_value),
        min_size=len(network.agents), max_size=len(network.agents),
    ))
    return network.with_valuations({a: Fraction(v) for a, v in zip(network.agents, values)})


@st.composite
def tree_networks(draw, max_n: int = 12, max_value: int = 20):
    n = draw(st.integers(min_value=1, max_value=max_n))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return draw(integer_valuations(gen_tree(n, seed), max_value))


@st.composite
def graph_networks(draw, max_n: int = 12, max_value: int = 20):
    n = draw(st.integers(min_value=2, max_value=max_n))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    factor = draw(st.sampled_from(["0.25", "0.5", "1", "2"]))
    return draw(integer_valuations(gen_graph(n, factor, seed), max_value))


def any_networks(max_n: int = 12, max_value: int = 20):
    return st.one_of(tree_networks(max_n, max_value), graph_networks(max_n, max_value))
