import logging
from collections import deque
from typing import Optional

from solver.models import MemorylessStrategy, Owner, ParityObjective, ParitySolution, StochasticGame, TargetSet

from .game_service import GameService


class _Arena:
    """Plain-Python view of a non-stochastic game used inside the solver loops."""

    def __init__(self, game: StochasticGame, player_of: Optional[list[int]] = None):
        self.n = game.n
        self.succ = [list(s) for s in game.edges]
        self.pred = game.predecessors()
        if player_of is None:
            player_of = []
            for v, owner in enumerate(game.owner):
                if owner == Owner.RANDOM:
                    raise ValueError(f"config {v} of game {game.name} is random; parity solving needs a non-stochastic game")
                player_of.append(0 if owner == Owner.P0 else 1)
        self.player = player_of

    def attractor(self, nodes: set[int], player: int, target: set[int]) -> tuple[set[int], dict[int, int]]:
        """Attractor of target for player inside nodes, with a witness move for each attracted player node."""
        attr = set(target)
        choice: dict[int, int] = {}
        count = {}
        for v in nodes:
            if v not in attr and self.player[v] != player:
                count[v] = sum(1 for w in self.succ[v] if w in nodes)
        queue = deque(sorted(target))
        while queue:
            w = queue.popleft()
            for v in self.pred[w]:
                if v not in nodes or v in attr:
                    continue
                if self.player[v] == player:
                    attr.add(v)
                    choice[v] = w
                    queue.append(v)
                else:
                    count[v] -= 1
                    if count[v] == 0:
                        attr.add(v)
                        queue.append(v)
        return attr, choice


class ParityService:
    """Zielonka's recursive algorithm on min-even parity games, with positional strategies."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.game_service = GameService()

    def attractor(self, game: StochasticGame, player: int, target: TargetSet) -> tuple[frozenset[int], MemorylessStrategy]:
        arena = _Arena(game)
        attr, choice = arena.attractor(set(game.configs), player, set(target.members))
        return frozenset(attr), MemorylessStrategy(name=f"attr{player}", player=player, choice=choice)

    def solve_parity(self, game: StochasticGame, objective: ParityObjective, player_of: Optional[list[int]] = None) -> ParitySolution:
        if len(objective.prio) != game.n:
            raise ValueError(f"objective has {len(objective.prio)} priorities for {game.n} configs")
        arena = _Arena(game, player_of)
        win, strat = self._zielonka(arena, objective.prio, set(game.configs))
        self.logger.debug(f"Solved parity game {game.name}: |W0|={len(win[0])} |W1|={len(win[1])}")
        choices = []
        for player in (0, 1):
            total = {}
            for v in game.configs:
                if arena.player[v] == player:
                    total[v] = strat[player].get(v, arena.succ[v][0])
            choices.append(total)
        return ParitySolution(
            w0=frozenset(win[0]),
            w1=frozenset(win[1]),
            strat0=MemorylessStrategy(name="parity0", player=0, choice=choices[0]),
            strat1=MemorylessStrategy(name="parity1", player=1, choice=choices[1]),
        )

    def _zielonka(self, arena: _Arena, prio: tuple[int, ...], nodes: set[int]) -> tuple[list[set[int]], list[dict[int, int]]]:
        win: list[set[int]] = [set(), set()]
        strat: list[dict[int, int]] = [{}, {}]
        current = set(nodes)
        while current:
            d = min(prio[v] for v in current)
            p = d % 2
            top = {v for v in current if prio[v] == d}
            attr, attr_choice = arena.attractor(current, p, top)
            sub_win, sub_strat = self._zielonka(arena, prio, current - attr)
            if not sub_win[1 - p]:
                win[p] |= current
                strat[p].update(sub_strat[p])
                strat[p].update(attr_choice)
                for v in sorted(top):
                    if arena.player[v] == p:
                        strat[p][v] = next(w for w in arena.succ[v] if w in current)
                return win, strat
            lost, lost_choice = arena.attractor(current, 1 - p, sub_win[1 - p])
            win[1 - p] |= lost
            strat[1 - p].update({v: w for v, w in sub_strat[1 - p].items() if v in sub_win[1 - p]})
            strat[1 - p].update(lost_choice)
            current -= lost
        return win, strat

    def sure_winning_region(self, game: StochasticGame, objective: ParityObjective) -> tuple[frozenset[int], MemorylessStrategy]:
        """Sure winning: random configurations are resolved adversarially."""
        player_of = [0 if owner == Owner.P0 else 1 for owner in game.owner]
        solution = self.solve_parity(game, objective, player_of=player_of)
        choice = {v: w for v, w in solution.strat0.choice.items()}
        return solution.w0, MemorylessStrategy(name="sure", player=0, choice=choice)

    def almost_sure_reach(self, game: StochasticGame, target: TargetSet) -> tuple[frozenset[int], MemorylessStrategy]:
        """Configs from which Player 0 reaches target with probability 1, with a rank-decreasing strategy."""
        n = game.n
        outer = set(game.configs)
        while True:
            rank: dict[int, int] = {v: 0 for v in target.members if v in outer}
            level = 0
            changed = True
            while changed:
                changed = False
                level += 1
                added = []
                for v in game.configs:
                    if v in rank or v not in outer:
                        continue
                    succ = game.edges[v]
                    if game.owner[v] == Owner.P0:
                        ok = any(w in rank for w in succ)
                    elif game.owner[v] == Owner.P1:
                        ok = all(w in rank for w in succ)
                    else:
                        ok = all(w in outer for w in succ) and any(w in rank for w in succ)
                    if ok:
                        added.append(v)
                for v in added:
                    rank[v] = level
                    changed = True
            inner = set(rank)
            if inner == outer:
                break
            outer = inner
        choice = {}
        for v in game.owned_by(Owner.P0):
            if v in rank and rank[v] > 0:
                choice[v] = next(w for w in game.edges[v] if w in rank and rank[w] < rank[v])
        strategy = self.game_service.fill_memoryless(game, 0, choice, name="reach")
        self.logger.debug(f"Almost-sure reach region of size {len(outer)} out of {n}")
        return frozenset(outer), strategy
