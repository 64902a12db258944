import logging
import math
import os
from fractions import Fraction
from typing import Optional

from dotenv import load_dotenv

from solver.errors import CapExceededError
from solver.models import (
    CombinedObjective,
    EpsilonStrategy,
    FiniteMemoryStrategy,
    MemorylessStrategy,
    Owner,
    SasGameSolution,
    SlsSolution,
    StochasticGame,
    TargetSet,
)

from .chain_service import ChainService
from .game_service import GameService
from .oracle_service import OracleService
from .parity_service import ParityService
from .sas_game_service import SasGameService

load_dotenv()

_EXACT_ROUNDS = 1024


class SlsService:
    """Sure and limit-sure parity: reach the SAS region with probability 1 - epsilon, surely safe meanwhile."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.max_horizon = int(os.getenv("SAS_SLS_MAX_HORIZON", "512"))
        self.max_memory = int(os.getenv("SAS_SLS_MAX_MEMORY", "100000"))
        self.game_service = GameService()
        self.parity_service = ParityService()
        self.chain_service = ChainService()
        self.oracle_service = OracleService()
        self.sas_game_service = SasGameService()

    def sure_winning_region(self, game: StochasticGame, objective=None) -> tuple[frozenset[int], MemorylessStrategy]:
        return self.parity_service.sure_winning_region(game, objective or game.sure)

    def almost_sure_reach(self, game: StochasticGame, target: TargetSet) -> tuple[frozenset[int], MemorylessStrategy]:
        return self.parity_service.almost_sure_reach(game, target)

    def solve_sls(self, game: StochasticGame, objective: Optional[CombinedObjective] = None) -> SlsSolution:
        objective = objective or game.objective()
        self.game_service.ensure_valid(game)
        sas = self.sas_game_service.solve_sas_game_fm(game, objective)
        a = sas.w0

        collapsed, kept = self.game_service.collapse(game.with_objectives(objective.sure, objective.secondary), a)
        sink = collapsed.n - 1
        x_collapsed, sure_strategy = self.sure_winning_region(collapsed, collapsed.sure)
        restricted, inside = self.game_service.subgame(collapsed, x_collapsed)
        sink_inside = inside.index(sink)
        z_restricted, reach_strategy = self.almost_sure_reach(restricted, TargetSet(members=frozenset({sink_inside})))

        x = frozenset(a) | frozenset(kept[v] for v in x_collapsed if v != sink)
        z = frozenset(a) | frozenset(kept[inside[v]] for v in z_restricted if inside[v] != sink)

        sure_moves = self._lift_choices(game, a, kept, sink, sure_strategy.choice)
        reach_moves = self._lift_choices(
            game, a, kept, sink, {inside[v]: inside[w] for v, w in reach_strategy.choice.items()}
        )
        self.logger.info(f"SLS on {game.name}: |A|={len(a)} |X|={len(x)} |Z|={len(z)}")

        def strategy_builder(epsilon: Fraction) -> EpsilonStrategy:
            return self._build_epsilon_strategy(game, objective, sas, z, sure_moves, reach_moves, Fraction(epsilon))

        return SlsSolution(z=z, sas_region=a, sure_region=x, strategy_builder=strategy_builder)

    @staticmethod
    def _lift_choices(
        game: StochasticGame, a: frozenset[int], kept: tuple[int, ...], sink: int, choice: dict[int, int]
    ) -> dict[int, int]:
        """Translate choices of the collapsed game back to original configs; the sink stands for any config of a."""
        lifted = {}
        for v, w in choice.items():
            if v == sink:
                continue
            original = kept[v]
            if w == sink:
                lifted[original] = next(t for t in game.edges[original] if t in a)
            else:
                lifted[original] = kept[w]
        return lifted

    def _counter_strategy(
        self,
        game: StochasticGame,
        sas: SasGameSolution,
        sure_moves: dict[int, int],
        reach_moves: dict[int, int],
        horizon: int,
    ) -> FiniteMemoryStrategy:
        """Memory 0 is the start, 1..horizon+1 count Player-0 decisions (horizon+1 means switched to the
        sure strategy), and the SAS strategy's memory m is shifted to horizon + 2 + m once play enters a."""
        a = sas.w0
        sas_strategy = sas.strat0
        offset = horizon + 2
        size = offset + sas_strategy.memory
        update: dict[tuple[int, int], int] = {}
        output: dict[tuple[int, int], int] = {}

        def counted(count: int, w: int) -> int:
            if w in a:
                return offset + sas_strategy.next_memory(sas_strategy.m0, w)
            if game.owner[w] == Owner.P0:
                return min(count + 1, horizon + 1)
            return count

        for w in game.configs:
            update[(0, w)] = counted(0, w)
        for count in range(1, horizon + 2):
            for w in game.configs:
                update[(count, w)] = counted(count, w)
            for v in game.owned_by(Owner.P0):
                moves = reach_moves if count <= horizon else sure_moves
                output[(count, v)] = moves.get(v, game.edges[v][0])
        for v in game.owned_by(Owner.P0):
            output[(0, v)] = game.edges[v][0]
        for m in range(sas_strategy.memory):
            for w in game.configs:
                if w in a:
                    update[(offset + m, w)] = offset + sas_strategy.next_memory(m, w)
                else:
                    update[(offset + m, w)] = horizon + 1
            for v in game.owned_by(Owner.P0):
                output[(offset + m, v)] = sas_strategy.choose(m, v) if v in a else sure_moves.get(v, game.edges[v][0])
        return FiniteMemoryStrategy(
            name=f"sls{horizon}", player=0, memory=size, m0=0, update=update, output=output
        )

    def _reach_guarantee(self, game: StochasticGame, strategy: FiniteMemoryStrategy, starts: list[int], a: frozenset[int]) -> Fraction:
        states, _, _ = self.game_service.memory_product(game, strategy, starts)
        p1_configs = {v for _, v in states if game.owner[v] == Owner.P1}
        worst = Fraction(1)
        for pi in self.oracle_service.enumerate_memoryless(game, 1, p1_configs):
            for v in starts:
                chain = self.game_service.product(game, strategy, pi, start=v)
                probs = self.chain_service.reach_probabilities(chain, TargetSet(members=a))
                worst = min(worst, probs[chain.init])
        return worst

    def _build_epsilon_strategy(
        self,
        game: StochasticGame,
        objective: CombinedObjective,
        sas: SasGameSolution,
        z: frozenset[int],
        sure_moves: dict[int, int],
        reach_moves: dict[int, int],
        epsilon: Fraction,
    ) -> EpsilonStrategy:
        if not 0 < epsilon < 1:
            raise ValueError(f"epsilon must lie strictly between 0 and 1, got {epsilon}")
        a = sas.w0
        if game.init is not None and game.init in z:
            starts = [] if game.init in a else [game.init]
        else:
            starts = sorted(z - a)
        if not starts:
            strategy = self._counter_strategy(game, sas, sure_moves, reach_moves, 0)
            return EpsilonStrategy(epsilon=epsilon, horizon=0, guaranteed=Fraction(1), strategy=strategy)

        try:
            for horizon in range(self.max_horizon + 1):
                strategy = self._counter_strategy(game, sas, sure_moves, reach_moves, horizon)
                guaranteed = self._reach_guarantee(game, strategy, starts, a)
                if guaranteed >= 1 - epsilon:
                    self.logger.info(f"Horizon {horizon} reaches the SAS region with probability {guaranteed}")
                    return EpsilonStrategy(epsilon=epsilon, horizon=horizon, guaranteed=guaranteed, strategy=strategy)
        except CapExceededError as e:
            self.logger.warning(f"Falling back to the closed-form horizon: {e}")

        horizon = self.conservative_horizon(game, epsilon)
        if horizon + 2 + sas.strat0.memory > self.max_memory:
            raise CapExceededError(
                f"conservative horizon {horizon} needs more than {self.max_memory} memory states"
            )
        strategy = self._counter_strategy(game, sas, sure_moves, reach_moves, horizon)
        return EpsilonStrategy(
            epsilon=epsilon, horizon=horizon, guaranteed=1 - epsilon, conservative=True, strategy=strategy
        )

    @staticmethod
    def conservative_horizon(game: StochasticGame, epsilon: Fraction) -> int:
        """n times the least r with (1 - p_min^n)^r <= epsilon.

        Within n decisions the reach strategy hits the target with probability at least p_min^n.
        """
        p_min = min((p for dist in game.prob.values() for p in dist.values()), default=Fraction(1))
        success = p_min ** game.n
        if success >= 1:
            return game.n
        log_epsilon = math.log(epsilon.numerator) - math.log(epsilon.denominator)
        estimate = float(success)
        if estimate > 0:
            rounds = max(math.ceil(log_epsilon / math.log1p(-estimate)), 1)
        else:
            # (1 - s)^r <= exp(-r * s) <= epsilon once r >= ln(1/epsilon) / s
            rounds = math.ceil(Fraction(-log_epsilon) / success) + 1
        if rounds <= _EXACT_ROUNDS:
            failure = 1 - success
            while failure ** rounds > epsilon:
                rounds += 1
        return game.n * rounds
