"""
Иерархия исключений для механизмов перераспределения.
Каждая ошибка несёт стабильный код, по которому CLI выбирает код выхода.
"""


class NrmError(Exception):
    """Базовая ошибка проекта"""

    code = "E_INTERNAL"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"[{self.code}] {super().__str__()}"


class MalformedInputError(NrmError, ValueError):
    """Синтаксические и смысловые ошибки во входных данных"""

    code = "E_SYNTAX"

    def __init__(self, message: str, code: str | None = None,
                 line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"строка {line}")
        if field is not None:
            where.append(f"поле {field}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message, code)


class MissingAgentError(NrmError, LookupError):
    code = "E_MISSING_AGENT"


class StructuralError(NrmError, ValueError):
    code = "E_STRUCTURE"


class EmptyInstanceError(NrmError, ValueError):
    code = "E_EMPTY"


class ConfigError(NrmError, ValueError):
    code = "E_CONFIG"


class InsufficientDataError(NrmError, ValueError):
    code = "E_INSUFFICIENT_DATA"


class SweepRunError(NrmError, RuntimeError):
    """Падение отдельного прогона в свипе; хранит под-сид для воспроизведения"""

    code = "E_SWEEP_RUN"

    def __init__(self, message: str, sub_seed: int):
        self.sub_seed = sub_seed
        super().__init__(f"{message} (под-сид {sub_seed})")
