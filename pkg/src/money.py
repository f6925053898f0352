# src/money.py
"""
Точная денежная арифметика.

Все суммы хранятся как Fraction: доли вида n_k / n_X дают бесконечные
десятичные дроби, и Decimal здесь не подходит. Входные числа разбираются
через Decimal, чтобы "2.5" и 2.5 давали одно и то же точное значение.
"""

from decimal import Decimal, InvalidOperation, ROUND_HALF_UP
from fractions import Fraction

from errors import MalformedInputError

ZERO = Fraction(0)
THREE_PLACES = Decimal("0.001")


def to_money(value, field: str | None = None) -> Fraction:
    """
    Конвертирует число из входного документа в точное значение.

    Принимает int, Decimal, Fraction, строки ("2.5", "2/5") и float
    (float идёт через repr, чтобы 0.1 не превратился в 3602879701896397/2**55).
    """
    if isinstance(value, bool):
        raise MalformedInputError(f"Ожидалось число, получено {value!r}", field=field)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    try:
        if isinstance(value, float):
            return Fraction(Decimal(repr(value)))
        if isinstance(value, Decimal):
            return Fraction(value)
        if isinstance(value, str):
            text = value.strip()
            if "/" in text:
                return Fraction(text)
            return Fraction(Decimal(text))
    except (InvalidOperation, ValueError, ZeroDivisionError):
        pass
    raise MalformedInputError(f"Не удалось разобрать сумму {value!r}", field=field)


def is_three_place(value: Fraction) -> bool:
    return (value * 1000).denominator == 1


def format_money(value: Fraction) -> str:
    """Фиксированные три знака, если значение в них укладывается, иначе точное p/q"""
    value = Fraction(value)
    if is_three_place(value):
        exact = Decimal(value.numerator) / Decimal(value.denominator)
        return str(exact.quantize(THREE_PLACES, rounding=ROUND_HALF_UP))
    return f"{value.numerator}/{value.denominator}"


def quantize_thousandths(value: float) -> Fraction:
    """Округление выборки до 1/1000 денежной единицы"""
    scaled = Decimal(repr(float(value))) * 1000
    return Fraction(int(scaled.quantize(Decimal(1), rounding=ROUND_HALF_UP)), 1000)
