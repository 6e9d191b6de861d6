"""
Точка входа CLI.
Подкоманды: make-toy-data, train-encoder, eval-encoder, encode, train-gan,
generate, evaluate, gradcheck (реестр в json/commands.json).

Коды выхода: 0 — успех, 1 — ошибка домена, 2 — ошибка использования.
"""
import argparse
import os
import sys
from typing import Optional, Sequence

# app/ является корнем пакета, при запуске из app/ sys.path уже верный.
# При запуске через docker: WORKDIR /app, ENTRYPOINT ["python", "main.py"]

STRICT_FLAG = '--strict-determinism'
# Однопоточные BLAS-библиотеки; задаются до первого импорта numpy
SINGLE_THREAD_ENV = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS', 'VECLIB_MAXIMUM_THREADS')


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='Файл section.key = value')
    common.add_argument('--seed', type=int)
    common.add_argument('--mode', choices=['unconditional', 'conditional'])
    common.add_argument('--profile', choices=['desk', 'paper'], default='desk')
    common.add_argument('--out', metavar='DIR', default='runs')
    common.add_argument(STRICT_FLAG, action='store_true', dest='strict_determinism')
    common.add_argument('--log-dir', metavar='DIR', dest='log_dir')
    common.add_argument('--log-level', default='INFO', dest='log_level',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    common.add_argument('--progress', action='store_true', help='Показывать прогресс-бары')
    return common


def build_parser(manager) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='fastgan', description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND', required=True)
    common = _common_parser()
    for name in manager.get_available():
        command = manager.get(name)
        sub = subparsers.add_parser(name, parents=[common], help=command.get_help())
        command.add_arguments(sub)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)

    # ──────────────── 1. Окружение до импорта numpy ───────
    if STRICT_FLAG in argv:
        for key in SINGLE_THREAD_ENV:
            os.environ.setdefault(key, '1')

    from modules.errors import FastGanError
    from modules.logs import Logger, logger

    try:
        # ──────────────── 2. Реестр подкоманд ─────────────
        from modules.commands import commands_start
        manager = commands_start()

        # ──────────────── 3. Разбор аргументов ────────────
        try:
            args = build_parser(manager).parse_args(argv)
        except SystemExit as e:
            return 0 if e.code in (0, None) else 2

        Logger.configure(args.log_dir, args.log_level)
        command = manager.get(args.command)

        # ──────────────── 4. Конфигурация ─────────────────
        from modules.constants import Messages
        from modules.settings import resolve_config

        overrides = {
            'seed': args.seed,
            'train.mode': args.mode,
            'tensor.strict_determinism': True if args.strict_determinism else None,
        }
        overrides.update(command.overrides(args))
        config = resolve_config(args.profile, args.config, overrides)
        logger.info(Messages.RUN_DIGEST.format(profile=config.profile.value, digest=config.digest()))

        # ──────────────── 5. Выполнение ───────────────────
        return command.run(args, config)
    except FastGanError as e:
        logger.error(f"{type(e).__name__}: {e}", exc_info=True)
        return 1


def main():
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        print("Остановка.", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()
