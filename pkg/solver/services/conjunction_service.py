import logging
import os
from collections import deque

from dotenv import load_dotenv

from solver.errors import CapExceededError, VerificationError
from solver.models import (
    ConjSolution,
    FiniteMemoryStrategy,
    IarProduct,
    MemorylessStrategy,
    NodeInfo,
    Owner,
    ParityObjective,
    ParitySolution,
    ReductionStage,
    StochasticGame,
    StreettPairs,
)

from .game_service import GameService
from .oracle_service import OracleService
from .parity_service import ParityService

load_dotenv()

Record = tuple[tuple[int, ...], int]


class ConjunctionService:
    """Conjunctions of two parity objectives, solved as Streett games through index appearance records."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.max_pairs = int(os.getenv("SAS_IAR_MAX_PAIRS", "6"))
        self.game_service = GameService()
        self.parity_service = ParityService()
        self.oracle_service = OracleService()

    @staticmethod
    def conj_to_streett(a: ParityObjective, b: ParityObjective) -> StreettPairs:
        """One pair per odd priority k of either objective: visiting k infinitely often demands an even j < k."""
        pairs = []
        for objective in (a, b):
            for k in objective.odd_priorities():
                request = frozenset(v for v, p in enumerate(objective.prio) if p == k)
                response = frozenset(v for v, p in enumerate(objective.prio) if p % 2 == 0 and p < k)
                pairs.append((request, response))
        return StreettPairs(pairs=tuple(pairs))

    # ------------------------------------------------------------------ index appearance records

    @staticmethod
    def iar_step(pairs: StreettPairs, perm: tuple[int, ...], w: int) -> Record:
        """Read w: responded indices move to the back, the pointer marks the first responded position."""
        responded = [j for j in perm if w in pairs.pairs[j][1]]
        if not responded:
            return perm, len(perm)
        moved = set(responded)
        h = perm.index(responded[0])
        return tuple(j for j in perm if j not in moved) + tuple(responded), h

    @staticmethod
    def iar_priority(pairs: StreettPairs, w: int, record: Record) -> int:
        perm, h = record
        for pos in range(h):
            request, response = pairs.pairs[perm[pos]]
            if w in request and w not in response:
                return 2 * pos + 1
        return 2 * h

    def streett_to_parity_iar(self, game: StochasticGame, pairs: StreettPairs) -> IarProduct:
        if len(pairs) > self.max_pairs:
            raise CapExceededError(f"{len(pairs)} Streett pairs exceed the record cap of {self.max_pairs}")
        if not game.is_non_stochastic:
            raise ValueError(f"game {game.name} has random configs")
        identity = tuple(range(len(pairs)))
        index: dict[tuple[int, Record], int] = {}
        states: list[tuple[int, Record]] = []
        queue: deque = deque()

        def visit(state: tuple[int, Record]) -> int:
            if state not in index:
                index[state] = len(states)
                states.append(state)
                queue.append(state)
            return index[state]

        entry = tuple(visit((v, self.iar_step(pairs, identity, v))) for v in game.configs)
        edges: dict[int, list[int]] = {}
        while queue:
            v, (perm, h) = queue.popleft()
            s = index[(v, (perm, h))]
            edges[s] = [visit((w, self.iar_step(pairs, perm, w))) for w in game.edges[v]]

        prio = tuple(self.iar_priority(pairs, v, record) for v, record in states)
        product = StochasticGame(
            name=f"{game.name}-iar",
            owner=tuple(game.owner[v] for v, _ in states),
            edges=tuple(tuple(edges[s]) for s in range(len(states))),
            labels=tuple(f"{game.label(v)}[{','.join(map(str, perm))}]@{h}" for v, (perm, h) in states),
            sure=ParityObjective(prio=prio),
        )
        self.logger.info(f"Record product of {game.name}: {len(states)} configs for {len(pairs)} pairs")
        return IarProduct(game=product, states=tuple(states), entry=entry, pairs=pairs)

    # ------------------------------------------------------------------ solving

    def solve_iar(self, game: StochasticGame, a: ParityObjective, b: ParityObjective) -> tuple[IarProduct, ParitySolution]:
        pairs = self.conj_to_streett(a, b)
        iar = self.streett_to_parity_iar(game, pairs)
        return iar, self.parity_service.solve_parity(iar.game, iar.game.sure)

    def solve_conj_parity(self, game: StochasticGame, a: ParityObjective, b: ParityObjective) -> ConjSolution:
        iar, solution = self.solve_iar(game, a, b)
        w0 = frozenset(v for v in game.configs if iar.entry[v] in solution.w0)
        w1 = frozenset(game.configs) - w0
        strat0 = self._record_strategy(game, iar, solution)
        strat1 = self.project_player1(game, iar, solution, w1, a, b)
        self.logger.info(f"Conjunction on {game.name}: |W0|={len(w0)} |W1|={len(w1)} memory={strat0.memory}")
        return ConjSolution(w0=w0, w1=w1, strat0=strat0, strat1=strat1)

    def _record_strategy(self, game: StochasticGame, iar: IarProduct, solution: ParitySolution) -> FiniteMemoryStrategy:
        """Player-0 strategy whose memory is the record; the record update depends only on the config read."""
        identity = tuple(range(len(iar.pairs)))
        records: list[Record] = [(identity, len(identity))]
        record_id = {records[0]: 0}
        for _, record in iar.states:
            if record not in record_id:
                record_id[record] = len(records)
                records.append(record)
        state_id = {state: s for s, state in enumerate(iar.states)}
        update = {}
        output = {}
        for m, (perm, h) in enumerate(records):
            for w in game.configs:
                nxt = self.iar_step(iar.pairs, perm, w)
                if nxt not in record_id:
                    record_id[nxt] = len(records)
                    records.append(nxt)
                update[(m, w)] = record_id[nxt]
        for m, record in enumerate(records):
            for v in game.owned_by(Owner.P0):
                s = state_id.get((v, record))
                if s is None:
                    output[(m, v)] = game.edges[v][0]
                else:
                    output[(m, v)] = iar.states[solution.strat0.choice[s]][0]
        return FiniteMemoryStrategy(name="conj0", player=0, memory=len(records), m0=0, update=update, output=output)

    def project_player1(
        self,
        game: StochasticGame,
        iar: IarProduct,
        solution: ParitySolution,
        w1: frozenset[int],
        a: ParityObjective,
        b: ParityObjective,
    ) -> MemorylessStrategy:
        seen = {iar.entry[v] for v in w1}
        queue = deque(seen)
        projected: dict[int, int] = {}
        functional = True
        while queue:
            s = queue.popleft()
            v = iar.states[s][0]
            if game.owner[v] == Owner.P1:
                t = solution.strat1.choice[s]
                w = iar.states[t][0]
                if projected.setdefault(v, w) != w:
                    functional = False
                    break
                targets = [t]
            else:
                targets = list(iar.game.edges[s])
            for t in targets:
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
        if functional:
            return self.game_service.fill_memoryless(game, 1, projected, name="conj1")

        self.logger.info(f"Projected Player-1 strategy on {game.name} needs memory, enumerating positional ones")
        owned = [v for v in game.owned_by(Owner.P1) if v in w1]
        for pi in self.oracle_service.enumerate_memoryless(game, 1, owned):
            if self.oracle_service.refutes(game, pi, w1, [a.prio, b.prio]):
                return MemorylessStrategy(name="conj1", player=1, choice=dict(pi.choice))
        raise VerificationError(f"no positional Player-1 strategy found on {game.name}")


def iar_stage(iar: IarProduct) -> ReductionStage:
    return ReductionStage(
        name="iar",
        game=iar.game,
        origin=tuple(config for config, _ in iar.states),
        annotations=tuple(f"{list(perm)}@{h}" for _, (perm, h) in iar.states),
        info=tuple(NodeInfo(origin=config, layer=(record,)) for config, record in iar.states),
    )
