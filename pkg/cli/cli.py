import argparse
import logging
import os
import shlex
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv

from solver.errors import (
    CapExceededError,
    GameParseError,
    GameValidationError,
    SolverError,
    UsageError,
    VerificationError,
)
from solver.models import MemorylessStrategy, RunReport, StochasticGame
from solver.services import ChainService, GameService, OracleService, SolveService
from solver.services.game_service import game_digest, parse_fraction
from solver.services.solve_service import MODELS, MODES, PIPELINES
from solver.utils.report_logger import format_config, format_region, format_report, log_run

load_dotenv()

EXIT_OK = 0
EXIT_REFUTED = 2
EXIT_CAP = 3
EXIT_USAGE = 64
EXIT_PARSE = 65
EXIT_VERIFICATION = 70

EXIT_CODES = (
    (UsageError, EXIT_USAGE),
    (GameParseError, EXIT_PARSE),
    (GameValidationError, EXIT_PARSE),
    (CapExceededError, EXIT_CAP),
    (VerificationError, EXIT_VERIFICATION),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class SolverCli:
    """Command-line front end: every subcommand prints a RunReport on stdout and returns an exit code."""

    def __init__(
        self,
        game_service: Optional[GameService] = None,
        solve_service: Optional[SolveService] = None,
        oracle_service: Optional[OracleService] = None,
        chain_service: Optional[ChainService] = None,
        stdout=None,
    ):
        self.game_service = game_service or GameService()
        self.solve_service = solve_service or SolveService()
        self.oracle_service = oracle_service or OracleService()
        self.chain_service = chain_service or ChainService()
        self.stdout = stdout
        self.logger = logging.getLogger(__name__)
        self.parser = self.setup_parser()

    @staticmethod
    def setup_logging():
        logging.basicConfig(
            level=os.getenv("SAS_LOG_LEVEL", "INFO").upper(),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

    def setup_parser(self) -> argparse.ArgumentParser:
        parser = _Parser(prog="sas-parity", description="Sure and almost-sure parity solver")
        commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

        solve = commands.add_parser("solve", help="Solve a game and emit winning strategies")
        solve.add_argument("--mode", choices=MODES, required=True)
        solve.add_argument("--model", choices=MODELS, default="auto")
        solve.add_argument("--input", required=True, help="Game file")
        solve.add_argument("--epsilon", help="Error bound num/den for --mode sls")
        solve.add_argument("--emit", help="Directory for strategy files")
        solve.add_argument("--timing", action="store_true", help="Report wall time")

        reduce = commands.add_parser("reduce", help="Run a reduction pipeline and emit every stage")
        reduce.add_argument("--pipeline", "--to", dest="pipeline", choices=PIPELINES, required=True)
        reduce.add_argument("--input", required=True, help="Game file")
        reduce.add_argument("--emit", help="Directory for stage game and map files")

        verify = commands.add_parser("verify", help="Check a Player-0 strategy against every Player-1 strategy")
        verify.add_argument("--game", required=True, help="Game file")
        verify.add_argument("--strategy", required=True, help="Strategy file")
        verify.add_argument("--start", type=int, action="append", help="Start config (repeatable, defaults to init)")

        oracle = commands.add_parser("oracle", help="Solve by exhaustive enumeration")
        oracle.add_argument("--input", required=True, help="Game file")
        oracle.add_argument("--mode", choices=("parity", "conj", "sas"), default="sas")
        oracle.add_argument("--mem-bound", type=int, default=1, help="Memory bound for --mode sas")

        simulate = commands.add_parser("simulate", help="Sample plays of the chain induced by a strategy")
        simulate.add_argument("--input", required=True, help="Game file")
        simulate.add_argument("--strategy", required=True, help="Player-0 strategy file")
        simulate.add_argument("--adversary", help="Memoryless Player-1 strategy file (first successor otherwise)")
        simulate.add_argument("--start", type=int, help="Start config (defaults to init)")
        simulate.add_argument("--steps", type=int, default=100)
        simulate.add_argument("--trials", type=int, default=1000)
        simulate.add_argument("--seed", type=int, default=0)
        return parser

    def run(self, argv: Sequence[str]) -> int:
        argv = list(argv)
        try:
            self._started = time.perf_counter()
            args = self.parser.parse_args(argv)
            report = RunReport(command=shlex.join(argv))
            handler = getattr(self, f"run_{args.command}")
            code = handler(args, report)
        except SolverError as e:
            code = self._exit_code(e)
            log_run(RunReport(command=shlex.join(argv)), status="error", error_message=str(e))
            return code
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else EXIT_USAGE
        self._write(format_report(report))
        log_run(report, status="success" if code == EXIT_OK else "refuted")
        return code

    @staticmethod
    def _exit_code(error: SolverError) -> int:
        for error_type, code in EXIT_CODES:
            if isinstance(error, error_type):
                return code
        return EXIT_VERIFICATION

    def _write(self, text: str):
        if self.stdout is not None:
            self.stdout.write(text)
        else:
            print(text, end="")

    @staticmethod
    def _read(path: str) -> str:
        try:
            return Path(path).read_text()
        except OSError as e:
            raise UsageError(f"cannot read {path}: {e.strerror}")

    def _load_game(self, path: str, report: RunReport, name: str = "game") -> StochasticGame:
        text = self._read(path)
        report.inputs[name] = game_digest(text)
        return self.game_service.parse_game(text)

    def _emit_dir(self, path: Optional[str]) -> Optional[Path]:
        if path is None:
            return None
        directory = Path(path)
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    # ------------------------------------------------------------------ subcommands

    def run_solve(self, args, report: RunReport) -> int:
        game = self._load_game(args.input, report)
        epsilon = None
        if args.epsilon is not None:
            try:
                epsilon = parse_fraction(args.epsilon)
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"--epsilon must be num/den, got {args.epsilon}")
        outcome = self.solve_service.solve(game, args.mode, model=args.model, epsilon=epsilon)
        report.fields += [("mode", outcome.mode), ("model", outcome.model)]
        report.fields += outcome.fields
        if outcome.memory is not None:
            report.fields.append(("memory", str(outcome.memory)))
        directory = self._emit_dir(args.emit)
        if directory is not None:
            for stem, strategy in sorted(outcome.strategies.items()):
                path = directory / f"{stem}.strat"
                path.write_text(self.game_service.serialize_strategy(strategy))
                report.fields.append((f"strategy.{stem}", str(path)))
        if args.timing:
            report.timing = time.perf_counter() - self._started
        return EXIT_OK

    def run_reduce(self, args, report: RunReport) -> int:
        game = self._load_game(args.input, report)
        stages = self.solve_service.reduce(game, args.pipeline)
        report.fields.append(("pipeline", args.pipeline))
        directory = self._emit_dir(args.emit)
        for position, stage in enumerate(stages, start=1):
            report.fields.append((f"stage.{stage.name}", str(stage.game.n)))
            if directory is None:
                continue
            stem = f"{position:02d}-{stage.name}"
            (directory / f"{stem}.game").write_text(self.game_service.serialize_game(stage.game))
            (directory / f"{stem}.map").write_text(self.solve_service.format_map(stage))
            report.fields.append((f"file.{stage.name}", str(directory / f"{stem}.game")))
        return EXIT_OK

    def run_verify(self, args, report: RunReport) -> int:
        game = self._load_game(args.game, report)
        text = self._read(args.strategy)
        report.inputs["strategy"] = game_digest(text)
        strategy = self.game_service.ensure_valid_strategy(game, self.game_service.parse_strategy(text))
        starts = args.start
        if starts is None and game.init is None:
            raise UsageError(f"game {game.name} has no init; pass --start")
        try:
            verified = self.oracle_service.verify_sas_strategy(game, strategy, starts=starts)
        except ValueError as e:
            self.logger.warning(f"Strategy {strategy.name} is not total on the reachable part: {e}")
            verified = False
        report.fields.append(("verified", "yes" if verified else "no"))
        return EXIT_OK if verified else EXIT_REFUTED

    def run_oracle(self, args, report: RunReport) -> int:
        game = self._load_game(args.input, report)
        report.fields.append(("mode", args.mode))
        if args.mode == "parity":
            if game.sure is None or not game.is_non_stochastic:
                raise UsageError("oracle parity mode needs prio_sure and no random configs")
            w0, w1 = self.oracle_service.oracle_solve_parity(game, game.sure)
        elif args.mode == "conj":
            if game.sure is None or game.secondary is None or not game.is_non_stochastic:
                raise UsageError("oracle conj mode needs both priority columns and no random configs")
            w0, w1 = self.oracle_service.oracle_solve_conj(game, game.sure, game.secondary)
        else:
            if game.sure is None or game.secondary is None:
                raise UsageError("oracle sas mode needs prio_sure and prio_sec on every config")
            report.fields.append(("mem_bound", str(args.mem_bound)))
            try:
                w0 = self.oracle_service.oracle_solve_sas(game, args.mem_bound)
            except ValueError as e:
                raise UsageError(str(e))
            w1 = None
        report.fields.append(("region", format_region(game, w0)))
        if w1 is not None:
            report.fields.append(("region1", format_region(game, w1)))
        return EXIT_OK

    def run_simulate(self, args, report: RunReport) -> int:
        game = self._load_game(args.input, report)
        text = self._read(args.strategy)
        report.inputs["strategy"] = game_digest(text)
        sigma = self.game_service.ensure_valid_strategy(game, self.game_service.parse_strategy(text))
        pi = self._adversary(game, args.adversary, report)
        if args.steps < 0 or args.trials < 1:
            raise UsageError("--steps must be >= 0 and --trials >= 1")
        try:
            chain = self.game_service.product(game, sigma, pi, start=args.start)
        except ValueError as e:
            raise UsageError(str(e))
        result = self.chain_service.simulate(chain, args.steps, args.trials, args.seed)
        report.fields += [("seed", str(args.seed)), ("steps", str(args.steps)), ("trials", str(args.trials))]
        for v, share in result.visit_frequency.items():
            report.fields.append((f"visit.{format_config(game, v)}", f"{share:.4f}"))
        for v, share in result.final_frequency.items():
            report.fields.append((f"final.{format_config(game, v)}", f"{share:.4f}"))
        return EXIT_OK

    def _adversary(self, game: StochasticGame, path: Optional[str], report: RunReport) -> MemorylessStrategy:
        choice: dict[int, int] = {}
        if path is not None:
            text = self._read(path)
            report.inputs["adversary"] = game_digest(text)
            strategy = self.game_service.ensure_valid_strategy(game, self.game_service.parse_strategy(text))
            if strategy.memory != 1:
                raise UsageError("the adversary must be a memoryless strategy (memory=1)")
            choice = {v: w for (_, v), w in strategy.output.items()}
        return self.game_service.fill_memoryless(game, 1, choice, name="adversary")


def main(argv: Optional[Sequence[str]] = None) -> int:
    SolverCli.setup_logging()
    cli = SolverCli()
    return cli.run(sys.argv[1:] if argv is None else argv)
