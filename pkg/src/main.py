"""
Командная строка: run / audit / sweep / golden.

stdout получает только детерминированный результат, статусы и логи идут в stderr.
Коды выхода: 0: успех, 2: ошибка входных данных, 3: найдено нарушение
или расхождение с эталоном, 1: внутренняя ошибка.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from audit import measure_budget_balance, run_audit
from config import load_settings
from errors import (
    ConfigError,
    EmptyInstanceError,
    MalformedInputError,
    MissingAgentError,
    NrmError,
    StructuralError,
)
from genlab import FAMILIES, SweepConfig, ValuationLaw, run_sweep, summarize, write_records
from golden import list_fixtures, load_fixture, replay
from instance_io import format_audit, format_outcome, outcome_to_dict, parse_instance
from mechanisms import MECHANISMS
from money import format_money

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_VIOLATION = 3

INPUT_ERRORS = (MalformedInputError, MissingAgentError, StructuralError, EmptyInstanceError, ConfigError)


def status(message: str):
    print(message, file=sys.stderr)


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _parse_sizes(raw: str) -> tuple:
    try:
        return tuple(int(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"--sizes должен быть списком целых через запятую: {raw!r}")


# =============================================================================
# Команды
# =============================================================================

def cmd_run(args, settings) -> int:
    network, profile = parse_instance(_read_input(args.input))
    outcome = MECHANISMS[args.mechanism](network, profile)
    if args.json:
        print(json.dumps(outcome_to_dict(outcome), ensure_ascii=False, indent=2))
    else:
        sys.stdout.write(format_outcome(outcome, trace=args.trace))
    status(f"✅ {args.mechanism}: победитель {outcome.winner or 'нет'}, "
           f"излишек {format_money(outcome.surplus)}")
    return EXIT_OK


def cmd_audit(args, settings) -> int:
    network, _ = parse_instance(_read_input(args.input))
    audit_settings = settings.audit
    if args.degree_cap is not None:
        audit_settings = replace(audit_settings, degree_cap=args.degree_cap)
    if args.samples is not None:
        audit_settings = replace(audit_settings, subset_samples=args.samples)

    status(f"🔍 Аудит {args.mechanism}: {len(network.valuations)} агентов, "
           f"полный перебор до степени {audit_settings.degree_cap}")
    report = run_audit(network, args.mechanism, audit_settings)
    sys.stdout.write(format_audit(report))
    if report.clean:
        status("✅ Нарушений не найдено")
        return EXIT_OK
    status("❌ Найдены нарушения")
    return EXIT_VIOLATION


def cmd_sweep(args, settings) -> int:
    config = SweepConfig(
        family=args.family,
        sizes=_parse_sizes(args.sizes),
        law=ValuationLaw.parse(args.law),
        trials_per_size=args.trials,
        seed=args.seed if args.seed is not None else settings.seed,
        extra_edge_factor=args.extra_edge_factor,
        mechanisms=tuple(m.strip() for m in args.mechanisms.split(",") if m.strip()),
        timing=args.timing,
        workers=args.workers or settings.workers,
    )
    status(f"🚀 Свип {config.family}: размеры {list(config.sizes)}, "
           f"{config.trials_per_size} прогонов, сид {config.seed}")
    records = run_sweep(config)
    path = write_records(records, args.out, args.format)
    status(f"📊 {len(records)} записей сохранено в {path}")

    if args.summary:
        print(summarize(records).to_string(index=False))

    if args.check_abb:
        nrm_records = [r for r in records if r.mechanism == "nrm"]
        trend = measure_budget_balance(nrm_records)
        for n, ratio, count in trend.buckets:
            status(f"   n={n}: средний surplus/welfare {float(ratio):.6f} ({count} прогонов)")
        if not trend.passes(settings.abb_threshold):
            status(f"❌ ABB: тренд не убывает или последний уровень >= {float(settings.abb_threshold)}")
            return EXIT_VIOLATION
        status("✅ ABB: тренд убывает и ниже порога")
    return EXIT_OK


def cmd_golden(args, settings) -> int:
    if args.list:
        for name in list_fixtures():
            print(f"{name}: {load_fixture(name).description}")
        return EXIT_OK

    results = replay(args.name)
    failed = 0
    for name, mismatches in results.items():
        if mismatches:
            failed += 1
            print(f"{name}: FAIL")
            for mismatch in mismatches:
                print(f"  {mismatch}")
        else:
            print(f"{name}: ok")
    if failed:
        status(f"❌ Расхождения в {failed} эталонах")
        return EXIT_VIOLATION
    status(f"✅ Все эталоны совпали ({len(results)})")
    return EXIT_OK


# =============================================================================
# Разбор аргументов
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nrm",
        description="Механизмы перераспределения в социальных сетях: запуск, аудит, свипы, эталоны",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Запустить механизм на экземпляре")
    run.add_argument("--input", required=True, help="JSON-файл экземпляра ('-' для stdin)")
    run.add_argument("--mechanism", choices=list(MECHANISMS), default="nrm")
    run.add_argument("--trace", action="store_true", help="Показать шаги NRM")
    run.add_argument("--json", action="store_true", help="Машиночитаемый вывод")
    run.set_defaults(handler=cmd_run)

    audit = sub.add_parser("audit", help="Проверить IR, ND, IC и эффективность")
    audit.add_argument("--input", required=True)
    audit.add_argument("--mechanism", choices=list(MECHANISMS), default="nrm")
    audit.add_argument("--degree-cap", type=int, default=None)
    audit.add_argument("--samples", type=int, default=None)
    audit.set_defaults(handler=cmd_audit)

    sweep = sub.add_parser("sweep", help="Серия случайных экземпляров с записью в CSV/JSON")
    sweep.add_argument("--family", choices=FAMILIES, default="tree")
    sweep.add_argument("--sizes", required=True, help="Размеры через запятую, например 10,50,200")
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=None, help="По умолчанию NRM_SEED")
    sweep.add_argument("--law", default="uniform:0:100", help="uniform:lo:hi или exponential:mean")
    sweep.add_argument("--extra-edge-factor", default="0", help="Для графов: доля дополнительных рёбер")
    sweep.add_argument("--mechanisms", default="nrm", help="Список через запятую")
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--format", choices=["csv", "json"], default="csv")
    sweep.add_argument("--timing", action="store_true", help="Записывать runtime_ms")
    sweep.add_argument("--summary", action="store_true", help="Сводка по размерам в stdout")
    sweep.add_argument("--check-abb", action="store_true", help="Проверить убывание surplus/welfare")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.set_defaults(handler=cmd_sweep)

    golden = sub.add_parser("golden", help="Прогнать эталонные экземпляры")
    group = golden.add_mutually_exclusive_group()
    group.add_argument("--list", action="store_true")
    group.add_argument("--name", default=None)
    golden.set_defaults(handler=cmd_golden)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    try:
        settings = load_settings()
    except ConfigError as e:
        status(f"❌ Ошибка конфигурации: {e}")
        return EXIT_INPUT

    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.WARNING),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.handler(args, settings)
    except INPUT_ERRORS as e:
        status(f"❌ Ошибка входных данных: {e}")
        return EXIT_INPUT
    except OSError as e:
        status(f"❌ Не удалось прочитать файл: {e}")
        return EXIT_INPUT
    except KeyboardInterrupt:
        status("\nПрограмма прервана пользователем.")
        return EXIT_INTERNAL
    except NrmError as e:
        status(f"❌ {e}")
        return EXIT_INTERNAL
    except Exception as e:
        logging.getLogger(__name__).exception("Внутренняя ошибка")
        status(f"❌ Внутренняя ошибка: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
