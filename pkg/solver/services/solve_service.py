import logging
from fractions import Fraction
from typing import Optional

from solver.errors import UsageError
from solver.models import (
    CombinedObjective,
    ReductionStage,
    SolveOutcome,
    StochasticGame,
)
from solver.utils.report_logger import format_region

from .conjunction_service import ConjunctionService, iar_stage
from .game_service import GameService, format_fraction
from .parity_service import ParityService
from .sas_game_service import SasGameService
from .sas_mdp_service import SasMdpService
from .sls_service import SlsService

MODES = ("parity", "conj", "sas", "sls")
MODELS = ("auto", "mdp", "game")
PIPELINES = ("sas-mdp", "sas-game", "streett-parity")


class SolveService:
    """Dispatches a parsed game to the solver matching the requested mode."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.game_service = GameService()
        self.parity_service = ParityService()
        self.conjunction_service = ConjunctionService()
        self.sas_mdp_service = SasMdpService()
        self.sas_game_service = SasGameService()
        self.sls_service = SlsService()

    @staticmethod
    def _objective(game: StochasticGame, mode: str) -> CombinedObjective:
        if game.sure is None or game.secondary is None:
            raise UsageError(f"{mode} mode needs prio_sure and prio_sec on every config")
        return CombinedObjective(sure=game.sure, secondary=game.secondary)

    @staticmethod
    def _model(game: StochasticGame, model: str) -> str:
        if model not in MODELS:
            raise UsageError(f"unknown model {model}")
        if model == "auto":
            return "mdp" if game.is_mdp else "game"
        if model == "mdp" and not game.is_mdp:
            raise UsageError(f"{game.name} has Player-1 configs and cannot be solved as an MDP")
        return model

    def solve(self, game: StochasticGame, mode: str, model: str = "auto", epsilon: Optional[Fraction] = None) -> SolveOutcome:
        self.logger.info(f"Solving {game.name} in mode {mode}")
        if mode == "parity":
            return self._solve_parity(game)
        if mode == "conj":
            return self._solve_conj(game)
        if mode == "sas":
            return self._solve_sas(game, self._model(game, model))
        if mode == "sls":
            if epsilon is None:
                raise UsageError("sls mode needs --epsilon")
            if not 0 < epsilon < 1:
                raise UsageError(f"epsilon must lie strictly between 0 and 1, got {format_fraction(epsilon)}")
            return self._solve_sls(game, epsilon)
        raise UsageError(f"unknown mode {mode}; expected one of {', '.join(MODES)}")

    def _solve_parity(self, game: StochasticGame) -> SolveOutcome:
        if game.sure is None:
            raise UsageError("parity mode needs prio_sure on every config")
        if game.secondary is not None:
            raise UsageError("parity mode takes one objective but the game also carries prio_sec")
        if not game.is_non_stochastic:
            raise UsageError("parity mode needs a game without random configs")
        solution = self.parity_service.solve_parity(game, game.sure)
        return SolveOutcome(
            mode="parity",
            model="game",
            region=solution.w0,
            memory=1,
            fields=[("region", format_region(game, solution.w0)), ("region1", format_region(game, solution.w1))],
            strategies={
                "strategy0": self.game_service.as_finite_memory(solution.strat0),
                "strategy1": self.game_service.as_finite_memory(solution.strat1),
            },
        )

    def _solve_conj(self, game: StochasticGame) -> SolveOutcome:
        objective = self._objective(game, "conj")
        if not game.is_non_stochastic:
            raise UsageError("conj mode needs a game without random configs")
        solution = self.conjunction_service.solve_conj_parity(game, objective.sure, objective.secondary)
        return SolveOutcome(
            mode="conj",
            model="game",
            region=solution.w0,
            memory=solution.strat0.memory,
            fields=[("region", format_region(game, solution.w0)), ("region1", format_region(game, solution.w1))],
            strategies={
                "strategy0": solution.strat0,
                "strategy1": self.game_service.as_finite_memory(solution.strat1),
            },
        )

    def _solve_sas(self, game: StochasticGame, model: str) -> SolveOutcome:
        objective = self._objective(game, "sas")
        if model == "mdp":
            solution = self.sas_mdp_service.solve_sas_mdp_fm(game, objective)
            fields = [("region", format_region(game, solution.w0))]
            fields += [(f"stage.{name}", str(size)) for name, size in solution.trace.stage_sizes().items()]
            return SolveOutcome(
                mode="sas",
                model=model,
                region=solution.w0,
                memory=solution.strategy.memory,
                fields=fields,
                strategies={"strategy0": solution.strategy},
            )
        solution = self.sas_game_service.solve_sas_game_fm(game, objective)
        fields = [("region", format_region(game, solution.w0)), ("region1", format_region(game, solution.w1))]
        fields += [(f"stage.{name}", str(size)) for name, size in solution.trace.stage_sizes().items()]
        return SolveOutcome(
            mode="sas",
            model=model,
            region=solution.w0,
            memory=solution.strat0.memory,
            fields=fields,
            strategies={
                "strategy0": solution.strat0,
                "strategy1": self.game_service.as_finite_memory(solution.strat1),
            },
        )

    def _solve_sls(self, game: StochasticGame, epsilon: Fraction) -> SolveOutcome:
        objective = self._objective(game, "sls")
        solution = self.sls_service.solve_sls(game, objective)
        built = solution.strategy_builder(epsilon)
        return SolveOutcome(
            mode="sls",
            model="mdp" if game.is_mdp else "game",
            region=solution.z,
            memory=built.strategy.memory,
            fields=[
                ("region", format_region(game, solution.z)),
                ("sas_region", format_region(game, solution.sas_region)),
                ("sure_region", format_region(game, solution.sure_region)),
                ("epsilon", format_fraction(built.epsilon)),
                ("horizon", str(built.horizon)),
                ("guaranteed", format_fraction(built.guaranteed)),
                ("conservative", "yes" if built.conservative else "no"),
            ],
            strategies={"strategy0": built.strategy},
        )

    def reduce(self, game: StochasticGame, pipeline: str) -> list[ReductionStage]:
        if pipeline == "sas-mdp":
            stages, _ = self.sas_mdp_service.reduce(game, self._objective(game, pipeline))
            return stages
        if pipeline == "sas-game":
            objective = self._objective(game, pipeline)
            reduced, gadget_map, infos = self.sas_game_service.gadget_reduction(game, objective)
            iar = self.conjunction_service.streett_to_parity_iar(
                reduced, self.conjunction_service.conj_to_streett(reduced.sure, reduced.secondary)
            )
            return [
                ReductionStage(name="gadget", game=reduced, origin=gadget_map.origin, annotations=gadget_map.role, info=tuple(infos)),
                iar_stage(iar),
            ]
        if pipeline == "streett-parity":
            objective = self._objective(game, pipeline)
            if not game.is_non_stochastic:
                raise UsageError("the streett-parity pipeline needs a game without random configs")
            iar = self.conjunction_service.streett_to_parity_iar(
                game, self.conjunction_service.conj_to_streett(objective.sure, objective.secondary)
            )
            return [iar_stage(iar)]
        raise UsageError(f"unknown pipeline {pipeline}; expected one of {', '.join(PIPELINES)}")

    @staticmethod
    def format_map(stage: ReductionStage) -> str:
        lines = []
        for node, (origin, annotation) in enumerate(zip(stage.origin, stage.annotations)):
            source = "-" if origin is None else str(origin)
            lines.append(f"{node} <- {source} {annotation}".rstrip())
        return "\n".join(lines) + "\n"
