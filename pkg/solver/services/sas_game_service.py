import logging
from typing import Optional

from solver.errors import CapExceededError, VerificationError
from solver.models import (
    CombinedObjective,
    GadgetMap,
    MemorylessStrategy,
    NodeInfo,
    NodeKind,
    Owner,
    ParityObjective,
    ReductionStage,
    ReductionTrace,
    SasGameSolution,
    StochasticGame,
)

from .conjunction_service import ConjunctionService
from .game_service import GameService
from .oracle_service import OracleService
from .strategy_service import StrategyService


class SasGameService:
    """Sure and almost-sure parity on stochastic games with finite-memory strategies.

    Each random config v with secondary priority p becomes a gadget: Player 1 moves from v_bar to
    some (v_tilde, 2i) with 2i <= p + 1; Player 0 then either accepts (v_hat, 2i) (if 2i <= p),
    where Player 1 picks the successor, or challenges with (v_hat, 2i - 1), where Player 0 picks
    it. Hats carry their index as secondary priority; every gadget config keeps the sure priority
    of v. The sure and secondary conditions are then solved together as a conjunction.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.game_service = GameService()
        self.conjunction_service = ConjunctionService()
        self.strategy_service = StrategyService()
        self.oracle_service = OracleService()

    def gadget_reduction(self, game: StochasticGame, objective: CombinedObjective) -> tuple[StochasticGame, GadgetMap, list[NodeInfo]]:
        sure_prio, sec_prio = objective.sure.prio, objective.secondary.prio
        layout: list[list[tuple[str, Optional[int]]]] = []
        node_of: dict[tuple[int, str, Optional[int]], int] = {}
        next_id = 0
        for v in game.configs:
            if game.owner[v] == Owner.RANDOM:
                p = sec_prio[v]
                parts = [("bar", None)]
                parts += [("tilde", 2 * i) for i in range((p + 1) // 2 + 1)]
                parts += [("hat", j) for j in range(p + 1)]
            else:
                parts = [("plain", None)]
            for kind, index in parts:
                node_of[(v, kind, index)] = next_id
                next_id += 1
            layout.append(parts)

        size = next_id
        entry = tuple(node_of[(v, "bar" if game.owner[v] == Owner.RANDOM else "plain", None)] for v in game.configs)
        owner: list[Owner] = [Owner.P0] * size
        edges: list[tuple[int, ...]] = [()] * size
        a = [0] * size
        b = [0] * size
        labels: list[str] = [""] * size
        origin = [0] * size
        role = [""] * size
        infos: list[NodeInfo] = [NodeInfo()] * size

        for v in game.configs:
            successors = tuple(entry[w] for w in game.edges[v])
            p = sec_prio[v]
            for kind, index in layout[v]:
                node = node_of[(v, kind, index)]
                origin[node] = v
                a[node] = sure_prio[v]
                b[node] = p
                if kind == "plain":
                    owner[node], edges[node], labels[node] = game.owner[v], successors, game.label(v)
                    infos[node] = NodeInfo(origin=v, kind=NodeKind.ANCHOR)
                    continue
                if kind == "bar":
                    owner[node] = Owner.P1
                    edges[node] = tuple(node_of[(v, "tilde", t)] for k, t in layout[v] if k == "tilde")
                    infos[node] = NodeInfo(origin=v, kind=NodeKind.BAR)
                    role[node], labels[node] = "bar", f"{game.label(v)}^bar"
                elif kind == "tilde":
                    owner[node] = Owner.P0
                    accept = (node_of[(v, "hat", index)],) if index <= p else ()
                    challenge = (node_of[(v, "hat", index - 1)],) if index >= 2 else ()
                    edges[node] = accept + challenge
                    infos[node] = NodeInfo(origin=v, kind=NodeKind.TILDE, index=index)
                    role[node], labels[node] = f"tilde{index}", f"{game.label(v)}^tilde{index}"
                else:
                    owner[node] = Owner.P1 if index % 2 == 0 else Owner.P0
                    edges[node] = successors
                    b[node] = index
                    infos[node] = NodeInfo(origin=v, kind=NodeKind.HAT, index=index)
                    role[node], labels[node] = f"hat{index}", f"{game.label(v)}^hat{index}"

        reduced = StochasticGame(
            name=f"{game.name}-gadget",
            owner=tuple(owner),
            edges=tuple(edges),
            labels=tuple(labels),
            init=entry[game.init] if game.init is not None else None,
            sure=ParityObjective(prio=tuple(a)),
            secondary=ParityObjective(prio=tuple(b)),
        )
        gadget_map = GadgetMap(
            entry=entry,
            bar={v: node_of[(v, "bar", None)] for v in game.owned_by(Owner.RANDOM)},
            tilde={(v, index): node for (v, kind, index), node in node_of.items() if kind == "tilde"},
            hat={(v, index): node for (v, kind, index), node in node_of.items() if kind == "hat"},
            origin=tuple(origin),
            role=tuple(role),
        )
        self.logger.info(f"Gadget reduction of {game.name}: {game.n} -> {size} configs")
        return reduced, gadget_map, infos

    def solve_sas_game_fm(self, game: StochasticGame, objective: Optional[CombinedObjective] = None) -> SasGameSolution:
        objective = objective or game.objective()
        self.game_service.ensure_valid(game)
        reduced, gadget_map, infos = self.gadget_reduction(game, objective)
        iar, solution = self.conjunction_service.solve_iar(reduced, reduced.sure, reduced.secondary)

        iar_infos = []
        for node, (config, record) in enumerate(iar.states):
            base = infos[config]
            iar_infos.append(NodeInfo(origin=base.origin, kind=base.kind, index=base.index, layer=(record,)))
        entry = {v: iar.entry[gadget_map.entry[v]] for v in game.configs}
        w0 = frozenset(v for v in game.configs if entry[v] in solution.w0)
        w1 = frozenset(game.configs) - w0

        pullback = self.strategy_service.pull_back(
            game, iar.game, iar_infos, solution.strat0, entry, sorted(w0), name="sas0"
        )
        reduced_w1 = frozenset(x for x in reduced.configs if iar.entry[x] not in solution.w0)
        reduced_strat1 = self.conjunction_service.project_player1(
            reduced, iar, solution, reduced_w1, reduced.sure, reduced.secondary
        )
        strat1 = MemorylessStrategy(
            name="sas1",
            player=1,
            choice={v: gadget_map.origin[reduced_strat1.choice[gadget_map.entry[v]]] for v in game.owned_by(Owner.P1)},
        )
        self._verify(game, pullback.strategy, w0, objective)

        stages = [
            ReductionStage(
                name="gadget",
                game=reduced,
                origin=gadget_map.origin,
                annotations=gadget_map.role,
                info=tuple(infos),
            ),
            ReductionStage(
                name="iar",
                game=iar.game,
                origin=tuple(config for config, _ in iar.states),
                annotations=tuple(f"{list(perm)}@{h}" for _, (perm, h) in iar.states),
                info=tuple(iar_infos),
            ),
        ]
        self.logger.info(
            f"SAS region of {game.name}: {sorted(w0)} with {pullback.strategy.memory} memory states"
        )
        return SasGameSolution(
            w0=w0,
            w1=w1,
            strat0=pullback.strategy,
            strat1=strat1,
            gadget_map=gadget_map,
            trace=ReductionTrace(stages=stages),
            members=pullback.members,
            reduced=iar.game,
            reduced_secondary=ParityObjective(prio=tuple(reduced.secondary.prio[config] for config, _ in iar.states)),
            tau=solution.strat0,
        )

    def _verify(self, game: StochasticGame, strategy, w0: frozenset[int], objective: CombinedObjective) -> None:
        try:
            verified = self.oracle_service.verify_sas_strategy(game, strategy, sorted(w0), objective)
        except CapExceededError as e:
            self.logger.warning(f"Skipping verification of {strategy.name}: {e}")
            return
        if not verified:
            raise VerificationError(f"pulled-back strategy on {game.name} fails the combined objective")
