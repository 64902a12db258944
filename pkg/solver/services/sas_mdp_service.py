import logging
from collections import deque
from fractions import Fraction
from typing import Hashable, Iterable, Optional, Sequence

from solver.errors import CapExceededError, UsageError, VerificationError
from solver.models import (
    CombinedObjective,
    FiniteMemoryStrategy,
    NodeInfo,
    NodeKind,
    Owner,
    ParityObjective,
    ReductionStage,
    ReductionTrace,
    SasMdpSolution,
    StochasticGame,
    TargetSet,
)

from .game_service import GameService
from .oracle_service import OracleService
from .parity_service import ParityService
from .strategy_service import StrategyService


def _identity_infos(game: StochasticGame) -> list[NodeInfo]:
    return [
        NodeInfo(origin=v, kind=NodeKind.BAR if owner == Owner.RANDOM else NodeKind.ANCHOR)
        for v, owner in enumerate(game.owner)
    ]


def _no_key(info: NodeInfo) -> tuple:
    return ()


def _monitor_level(info: NodeInfo) -> Hashable:
    return info.layer[-1][1] if info.layer else None


def _monitor_state(info: NodeInfo) -> Hashable:
    return info.layer[-1] if info.layer else None


def _full_layer(info: NodeInfo) -> Hashable:
    return info.layer


_MONITOR_SEEDS = (_no_key, _monitor_level, _monitor_state, _full_layer)


class SasMdpService:
    """Sure and almost-sure parity on MDPs: Büchi copies, random gadgets, then a parity monitor.

    The secondary parity condition becomes Büchi by letting Player 0 commit, from a tilde copy,
    to an even priority 2i: the copy indexed 2i only survives while priorities stay at least 2i
    and is Büchi exactly on priority 2i. Random configurations of the Büchi MDP are then replaced
    by Player-1 gadgets, and the Büchi condition is folded into the sure parity objective by a
    small deterministic monitor.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.game_service = GameService()
        self.parity_service = ParityService()
        self.strategy_service = StrategyService()
        self.oracle_service = OracleService()

    # ------------------------------------------------------------------ secondary parity to Büchi

    def as_parity_to_buchi(self, mdp: StochasticGame, objective: CombinedObjective) -> ReductionStage:
        if not mdp.is_mdp:
            raise UsageError(f"{mdp.name} has Player-1 configs; the MDP pipeline needs an MDP")
        n = mdp.n
        alpha_s, alpha_as = objective.sure.prio, objective.secondary.prio
        copies = list(range(0, objective.secondary.index + 1, 2))

        def tilde(v: int) -> int:
            return n + v

        copy_id = {(v, c): 2 * n + k * n + v for k, c in enumerate(copies) for v in mdp.configs}
        bottom = 2 * n + len(copies) * n
        size = bottom + 1

        owner: list[Owner] = [Owner.P0] * size
        edges: list[tuple[int, ...]] = [()] * size
        prob: dict[int, dict[int, Fraction]] = {}
        sure = [0] * size
        labels: list[str] = [""] * size
        origin: list[Optional[int]] = [None] * size
        annotations: list[str] = [""] * size
        info: list[NodeInfo] = [NodeInfo(kind=NodeKind.SINK)] * size
        buchi = set()

        for v in mdp.configs:
            label = mdp.label(v)
            owner[v] = mdp.owner[v]
            edges[v] = tuple(tilde(w) for w in mdp.edges[v])
            if mdp.owner[v] == Owner.RANDOM:
                prob[v] = {tilde(w): p for w, p in mdp.prob[v].items()}
            sure[v], labels[v], origin[v] = alpha_s[v], label, v
            info[v] = NodeInfo(origin=v, kind=NodeKind.ANCHOR, layer=("orig",))

            t = tilde(v)
            edges[t] = (v,) + tuple(copy_id[(v, c)] for c in copies) + (bottom,)
            sure[t], labels[t], origin[t], annotations[t] = alpha_s[v], f"{label}~", v, "~"
            info[t] = NodeInfo(origin=v, kind=NodeKind.RELAY, layer=("orig",))

            for c in copies:
                x = copy_id[(v, c)]
                owner[x] = mdp.owner[v]
                if alpha_as[v] >= c:
                    edges[x] = tuple(copy_id[(w, c)] for w in mdp.edges[v])
                    if mdp.owner[v] == Owner.RANDOM:
                        prob[x] = {copy_id[(w, c)]: p for w, p in mdp.prob[v].items()}
                else:
                    edges[x] = (bottom,)
                    if mdp.owner[v] == Owner.RANDOM:
                        prob[x] = {bottom: Fraction(1)}
                if alpha_as[v] == c:
                    buchi.add(x)
                sure[x], labels[x], origin[x], annotations[x] = alpha_s[v], f"{label}.{c}", v, f"#{c}"
                info[x] = NodeInfo(origin=v, kind=NodeKind.ANCHOR, layer=("copy", c))

        edges[bottom] = (bottom,)
        sure[bottom], labels[bottom], annotations[bottom] = 1, "_bot_", "bot"

        game = StochasticGame(
            name=f"{mdp.name}-buchi",
            owner=tuple(owner),
            edges=tuple(edges),
            prob=prob,
            labels=tuple(labels),
            init=mdp.init,
            sure=ParityObjective(prio=tuple(sure)),
            secondary=ParityObjective.buchi(size, buchi),
        )
        self.logger.info(f"Büchi copies of {mdp.name}: {size} configs, {len(buchi)} Büchi configs")
        return ReductionStage(
            name="buchi",
            game=game,
            origin=tuple(origin),
            annotations=tuple(annotations),
            info=tuple(info),
            buchi=TargetSet(members=frozenset(buchi)),
        )

    # ------------------------------------------------------------------ random configs to gadgets

    def buchi_mdp_to_conj_game(
        self,
        mdp: StochasticGame,
        buchi: TargetSet,
        info: Optional[Sequence[NodeInfo]] = None,
    ) -> ReductionStage:
        """Replace each random config by a Player-1 gadget; the result has no random configs.

        A random v gets v_bar (Player 1) -> (v_tilde,0) -> (v_hat,0), where Player 1 picks the successor and
        the Büchi set is visited; if v is not Büchi, also v_bar -> (v_tilde,2) -> (v_hat,1), where Player 0 picks.
        """
        if not mdp.is_mdp:
            raise UsageError(f"{mdp.name} has Player-1 configs")
        if mdp.sure is None:
            raise ValueError(f"{mdp.name} carries no sure objective")
        info = list(info) if info is not None else _identity_infos(mdp)
        alpha = mdp.sure.prio

        blocks: list[list[tuple]] = []
        entry: dict[int, int] = {}
        next_id = 0
        for u in mdp.configs:
            if mdp.owner[u] == Owner.RANDOM:
                parts = [("bar", None), ("tilde", 0), ("hat", 0)]
                if u not in buchi:
                    parts += [("tilde", 2), ("hat", 1)]
            else:
                parts = [("plain", None)]
            block = []
            for kind, index in parts:
                block.append((kind, index, next_id))
                next_id += 1
            entry[u] = block[0][2]
            blocks.append(block)

        size = next_id
        owner: list[Owner] = [Owner.P0] * size
        edges: list[tuple[int, ...]] = [()] * size
        sure = [0] * size
        labels: list[str] = [""] * size
        origin: list[Optional[int]] = [None] * size
        annotations: list[str] = [""] * size
        infos: list[NodeInfo] = [NodeInfo(kind=NodeKind.SINK)] * size
        new_buchi = set()

        for u, block in zip(mdp.configs, blocks):
            ids = {(kind, index): node for kind, index, node in block}
            successors = tuple(entry[w] for w in mdp.edges[u])
            label = mdp.label(u)
            base = info[u]
            for kind, index, node in block:
                sure[node], origin[node] = alpha[u], u
                if kind == "plain":
                    owner[node], edges[node], labels[node] = Owner.P0, successors, label
                    infos[node] = base
                    if u in buchi:
                        new_buchi.add(node)
                    continue
                if kind == "bar":
                    owner[node] = Owner.P1
                    edges[node] = (ids[("tilde", 0)],) + ((ids[("tilde", 2)],) if ("tilde", 2) in ids else ())
                    infos[node] = NodeInfo(origin=base.origin, kind=NodeKind.BAR, layer=base.layer)
                elif kind == "tilde":
                    owner[node] = Owner.P0
                    edges[node] = (ids[("hat", 0 if index == 0 else 1)],)
                    infos[node] = NodeInfo(origin=base.origin, kind=NodeKind.TILDE, index=index, layer=base.layer)
                else:
                    owner[node] = Owner.P1 if index == 0 else Owner.P0
                    edges[node] = successors
                    infos[node] = NodeInfo(origin=base.origin, kind=NodeKind.HAT, index=index, layer=base.layer)
                    if index == 0:
                        new_buchi.add(node)
                suffix = "bar" if kind == "bar" else f"{kind}{index}"
                labels[node], annotations[node] = f"{label}^{suffix}", suffix

        game = StochasticGame(
            name=f"{mdp.name}-gadget",
            owner=tuple(owner),
            edges=tuple(edges),
            labels=tuple(labels),
            init=entry[mdp.init] if mdp.init is not None else None,
            sure=ParityObjective(prio=tuple(sure)),
            secondary=ParityObjective.buchi(size, new_buchi),
        )
        self.logger.info(f"Gadget game of {mdp.name}: {size} configs")
        return ReductionStage(
            name="gadget",
            game=game,
            origin=tuple(origin),
            annotations=tuple(annotations),
            info=tuple(infos),
            buchi=TargetSet(members=frozenset(new_buchi)),
        )

    # ------------------------------------------------------------------ Büchi and parity to parity

    def buchi_and_parity_to_parity(
        self,
        game: StochasticGame,
        buchi: TargetSet,
        alpha: ParityObjective,
        info: Optional[Sequence[NodeInfo]] = None,
        starts: Optional[Iterable[int]] = None,
    ) -> tuple[ReductionStage, dict[int, int]]:
        """Product with a monitor (i, refreshed) that remembers the last refreshing priority.

        Reading v refreshes the monitor to (alpha(v), True) when v is Büchi or alpha(v) is below i,
        otherwise it moves to (i, False). Refreshed states emit i, the others emit i rounded up to odd.
        """
        if not game.is_non_stochastic:
            raise ValueError(f"{game.name} has random configs")
        info = list(info) if info is not None else _identity_infos(game)
        top = alpha.index if alpha.index % 2 == 1 else alpha.index + 1
        prio = alpha.prio

        def read(state: tuple[int, bool], v: int) -> tuple[int, bool]:
            i, _ = state
            if v in buchi.members or prio[v] < i:
                return prio[v], True
            return i, False

        def emit(state: tuple[int, bool]) -> int:
            i, refreshed = state
            return i if refreshed or i % 2 == 1 else i + 1

        index: dict[tuple[int, tuple[int, bool]], int] = {}
        states: list[tuple[int, tuple[int, bool]]] = []
        queue: deque = deque()

        def visit(state) -> int:
            if state not in index:
                index[state] = len(states)
                states.append(state)
                queue.append(state)
            return index[state]

        starts = list(game.configs) if starts is None else list(starts)
        entry = {v: visit((v, read((top, False), v))) for v in starts}
        edges: dict[int, tuple[int, ...]] = {}
        while queue:
            v, q = queue.popleft()
            edges[index[(v, q)]] = tuple(visit((w, read(q, w))) for w in game.edges[v])

        def marker(q: tuple[int, bool]) -> str:
            return f"[{q[0]}{'+' if q[1] else '-'}]"

        product = StochasticGame(
            name=f"{game.name}-monitor",
            owner=tuple(game.owner[v] for v, _ in states),
            edges=tuple(edges[s] for s in range(len(states))),
            labels=tuple(f"{game.label(v)}{marker(q)}" for v, q in states),
            init=entry.get(game.init) if game.init is not None else None,
            sure=ParityObjective(prio=tuple(emit(q) for _, q in states)),
        )
        stage = ReductionStage(
            name="monitor",
            game=product,
            origin=tuple(v for v, _ in states),
            annotations=tuple(marker(q) for _, q in states),
            info=tuple(
                NodeInfo(
                    origin=info[v].origin,
                    kind=info[v].kind,
                    index=info[v].index,
                    layer=info[v].layer + (("mon",) + q,),
                )
                for v, q in states
            ),
        )
        self.logger.info(f"Monitor product of {game.name}: {len(states)} configs, index {product.sure.index}")
        return stage, entry

    # ------------------------------------------------------------------ pipeline

    def reduce(self, mdp: StochasticGame, objective: CombinedObjective) -> tuple[list[ReductionStage], dict[int, int]]:
        """All three stages, and the monitor-product config standing for each original config."""
        buchi_stage = self.as_parity_to_buchi(mdp, objective)
        gadget_stage = self.buchi_mdp_to_conj_game(buchi_stage.game, buchi_stage.buchi, buchi_stage.info)
        gadget_entry: dict[int, int] = {}
        for node, u in enumerate(gadget_stage.origin):
            gadget_entry.setdefault(u, node)
        monitor_stage, monitor_entry = self.buchi_and_parity_to_parity(
            gadget_stage.game,
            gadget_stage.buchi,
            gadget_stage.game.sure,
            gadget_stage.info,
            starts=[gadget_entry[v] for v in mdp.configs],
        )
        entry = {v: monitor_entry[gadget_entry[v]] for v in mdp.configs}
        return [buchi_stage, gadget_stage, monitor_stage], entry

    def solve_sas_mdp_fm(self, mdp: StochasticGame, objective: Optional[CombinedObjective] = None) -> SasMdpSolution:
        objective = objective or mdp.objective()
        self.game_service.ensure_valid(mdp)
        stages, entry = self.reduce(mdp, objective)
        monitor_stage = stages[-1]
        solution = self.parity_service.solve_parity(monitor_stage.game, monitor_stage.game.sure)
        w0 = frozenset(v for v in mdp.configs if entry[v] in solution.w0)

        pullback = self.strategy_service.pull_back(
            mdp.with_objectives(objective.sure, objective.secondary),
            monitor_stage.game,
            monitor_stage.info,
            solution.strat0,
            entry,
            sorted(w0),
            name="sas0",
            seeds=_MONITOR_SEEDS,
            shared_origins=True,
        )
        self._verify(mdp, pullback.strategy, w0, objective)
        strategy = self._within_bound(mdp, pullback.strategy, w0, objective)
        self.logger.info(f"SAS region of MDP {mdp.name}: {sorted(w0)} with {strategy.memory} memory states")
        trace = ReductionTrace(stages=stages)
        return SasMdpSolution(w0=w0, strategy=strategy, trace=trace)

    def _within_bound(
        self, mdp: StochasticGame, strategy: FiniteMemoryStrategy, w0: frozenset[int], objective: CombinedObjective
    ) -> FiniteMemoryStrategy:
        """Strategy with at most d_s + 1 memory states; searched for when minimization leaves more."""
        bound = objective.sure.index + 1
        if strategy.memory <= bound:
            return strategy
        self.logger.info(f"Strategy {strategy.name} keeps {strategy.memory} memory states, searching within {bound}")
        try:
            compact = self.oracle_service.find_sas_strategy(mdp, bound, sorted(w0), objective)
        except CapExceededError as e:
            self.logger.warning(f"Keeping {strategy.memory} memory states for {strategy.name}: {e}")
            return strategy
        if compact is None:
            raise VerificationError(f"no strategy with {bound} memory states wins all of the SAS region of {mdp.name}")
        return compact

    def _verify(self, mdp: StochasticGame, strategy, w0: frozenset[int], objective: CombinedObjective) -> None:
        try:
            verified = self.oracle_service.verify_sas_strategy(mdp, strategy, sorted(w0), objective)
        except CapExceededError as e:
            self.logger.warning(f"Skipping verification of {strategy.name}: {e}")
            return
        if not verified:
            raise VerificationError(f"pulled-back strategy on {mdp.name} fails the combined objective")
