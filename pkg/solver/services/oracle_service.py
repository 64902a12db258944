import itertools
import logging
import os
from collections import deque
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

import networkx as nx
from dotenv import load_dotenv

from solver.errors import CapExceededError
from solver.models import (
    CombinedObjective,
    FiniteMemoryStrategy,
    MarkovChain,
    MemorylessStrategy,
    Owner,
    ParityObjective,
    StochasticGame,
    TargetSet,
)

from .chain_service import ChainService
from .game_service import GameService
from .parity_service import ParityService

load_dotenv()


class _Search:
    """Mutable state of one bounded-memory strategy search."""

    def __init__(self, game: StochasticGame, objective: CombinedObjective, starts: Sequence[int], memory: int):
        self.game = game
        self.objective = objective
        self.starts = tuple(starts)
        self.memory = memory
        self.prune = game.is_mdp
        self.out: dict[tuple[int, int], int] = {}
        self.upd: dict[tuple[int, int], int] = {}


class OracleService:
    """Exhaustive reference solvers for small instances."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.enum_cap = int(os.getenv("SAS_ENUM_CAP", "4096"))
        self.oracle_cap = int(os.getenv("SAS_ORACLE_CAP", "200000"))
        self.game_service = GameService()
        self.chain_service = ChainService()
        self.parity_service = ParityService()
        self._visited = 0

    # ------------------------------------------------------------------ enumeration

    def enumerate_memoryless(
        self,
        game: StochasticGame,
        player: int,
        configs: Optional[Iterable[int]] = None,
    ) -> Iterator[MemorylessStrategy]:
        """All positional strategies of player in lexicographic order of their choices.

        Only the configs given are varied; the other owned configs play their first successor.
        """
        owner = Owner.P0 if player == 0 else Owner.P1
        owned = game.owned_by(owner)
        varied = owned if configs is None else sorted(set(configs) & set(owned))
        count = 1
        for v in varied:
            count *= len(game.edges[v])
        if count > self.enum_cap:
            raise CapExceededError(
                f"{count} memoryless strategies of player {player} exceed the enumeration cap {self.enum_cap}"
            )
        fixed = {v: game.edges[v][0] for v in owned}
        for picks in itertools.product(*(game.edges[v] for v in varied)):
            choice = dict(fixed)
            choice.update(zip(varied, picks))
            yield MemorylessStrategy.model_construct(name=f"enum{player}", player=player, choice=choice)

    # ------------------------------------------------------------------ one-player games

    def good_cycle_region(self, succ: Sequence[Sequence[int]], objectives: Sequence[Sequence[int]]) -> set[int]:
        """Vertices from which some path reaches a cycle whose minimal priorities are even in every objective."""
        n = len(succ)
        graph = nx.DiGraph()
        graph.add_nodes_from(range(n))
        for v in range(n):
            graph.add_edges_from((v, w) for w in succ[v])
        thresholds = [sorted({p for p in prio if p % 2 == 0}) for prio in objectives]
        good: set[int] = set()
        for combo in itertools.product(*thresholds):
            keep = [v for v in range(n) if all(prio[v] >= e for prio, e in zip(objectives, combo))]
            sub = graph.subgraph(keep)
            for component in nx.strongly_connected_components(sub):
                if len(component) == 1 and not sub.has_edge(*(next(iter(component)),) * 2):
                    continue
                if all(any(prio[v] == e for v in component) for prio, e in zip(objectives, combo)):
                    good |= component
        region = set(good)
        queue = deque(good)
        while queue:
            w = queue.popleft()
            for v in graph.predecessors(w):
                if v not in region:
                    region.add(v)
                    queue.append(v)
        return region

    def oracle_solve_parity(self, game: StochasticGame, objective: ParityObjective) -> tuple[frozenset[int], frozenset[int]]:
        return self._solve_by_enumeration(game, [objective.prio])

    def oracle_solve_conj(
        self, game: StochasticGame, a: ParityObjective, b: ParityObjective
    ) -> tuple[frozenset[int], frozenset[int]]:
        return self._solve_by_enumeration(game, [a.prio, b.prio])

    def _solve_by_enumeration(self, game: StochasticGame, objectives: list[tuple[int, ...]]) -> tuple[frozenset[int], frozenset[int]]:
        if not game.is_non_stochastic:
            raise ValueError(f"game {game.name} has random configs")
        configs = set(game.configs)
        w1: set[int] = set()
        for pi in self.enumerate_memoryless(game, 1):
            succ = [[pi.choice[v]] if game.owner[v] == Owner.P1 else list(game.edges[v]) for v in game.configs]
            w1 |= configs - self.good_cycle_region(succ, objectives)
        return frozenset(configs - w1), frozenset(w1)

    def refutes(self, game: StochasticGame, pi: MemorylessStrategy, region: Iterable[int], objectives: list[tuple[int, ...]]) -> bool:
        """True when Player 0 wins from no config of region once Player 1 is fixed to pi."""
        succ = [[pi.choice[v]] if game.owner[v] == Owner.P1 else list(game.edges[v]) for v in game.configs]
        return not (self.good_cycle_region(succ, objectives) & set(region))

    # ------------------------------------------------------------------ strategy verification

    def verify_sas_strategy(
        self,
        game: StochasticGame,
        sigma: FiniteMemoryStrategy,
        starts: Optional[Iterable[int]] = None,
        objective: Optional[CombinedObjective] = None,
    ) -> bool:
        """Check sure and almost-sure satisfaction against every memoryless Player-1 strategy.

        Player 1 ranges over positional strategies of the game itself, not of its product with the
        memory of sigma. A Player-1 strategy that reacts to sigma's memory is never tried, so a True
        result on games with Player-1 configs means sigma beats every positional opponent only.
        Moves of sigma must be edges of the game (GameValidationError otherwise).
        """
        objective = objective or game.objective()
        self.game_service.ensure_valid_strategy(game, sigma)
        if starts is None:
            if game.init is None:
                raise ValueError(f"game {game.name} has no initial configuration to verify from")
            starts = [game.init]
        starts = sorted(set(starts))
        if not starts:
            return True
        states, _, _ = self.game_service.memory_product(game, sigma, starts)
        p1_configs = {v for _, v in states if game.owner[v] == Owner.P1}
        for pi in self.enumerate_memoryless(game, 1, p1_configs):
            for v in starts:
                chain = self.game_service.product(game, sigma, pi, start=v)
                if not self.chain_service.chain_satisfies_sure(chain, objective.sure):
                    self.logger.info(f"Strategy {sigma.name} fails the sure objective from {v}")
                    return False
                if not self.chain_service.chain_satisfies_almost_sure(chain, objective.secondary):
                    self.logger.info(f"Strategy {sigma.name} fails the almost-sure objective from {v}")
                    return False
        return True

    # ------------------------------------------------------------------ bounded-memory search

    def oracle_solve_sas(
        self,
        game: StochasticGame,
        mem_bound: int,
        objective: Optional[CombinedObjective] = None,
    ) -> frozenset[int]:
        """Configs won by some Player-0 strategy with at most mem_bound memory states."""
        objective = objective or game.objective()
        if mem_bound < 1:
            raise ValueError("memory bound must be at least 1")
        sure_region, _ = self.parity_service.sure_winning_region(game, objective.sure)
        self._visited = 0
        region = set()
        for v in game.configs:
            if v not in sure_region:
                continue
            search = _Search(game, objective, [v], mem_bound)
            if self._search(search, used=1):
                region.add(v)
        self.logger.info(f"Bounded-memory search visited {self._visited} partial strategies")
        return frozenset(region)

    def find_sas_strategy(
        self,
        game: StochasticGame,
        mem_bound: int,
        starts: Iterable[int],
        objective: Optional[CombinedObjective] = None,
    ) -> Optional[FiniteMemoryStrategy]:
        """One Player-0 strategy with at most mem_bound memory states winning from every start, or None."""
        objective = objective or game.objective()
        if mem_bound < 1:
            raise ValueError("memory bound must be at least 1")
        self._visited = 0
        search = _Search(game, objective, sorted(set(starts)), mem_bound)
        found = self._search(search, used=1)
        self.logger.info(f"Joint bounded-memory search visited {self._visited} partial strategies")
        if not found:
            return None
        sigma = self._candidate(search)
        memory = range(sigma.memory)
        return FiniteMemoryStrategy(
            name="sas0",
            player=0,
            memory=sigma.memory,
            m0=0,
            update={(m, w): sigma.update.get((m, w), 0) for m in memory for w in game.configs},
            output={(m, v): sigma.output.get((m, v), game.edges[v][0]) for m in memory for v in game.owned_by(Owner.P0)},
        )

    def _search(self, search: _Search, used: int) -> bool:
        self._visited += 1
        if self._visited > self.oracle_cap:
            raise CapExceededError(f"bounded-memory search exceeded {self.oracle_cap} partial strategies")
        missing, expanded = self._explore(search)
        if missing is None:
            return self._accepts(search)
        if search.prune and (self._violates_sure(search, expanded) or self._violates_almost_sure(search, expanded)):
            return False
        kind, key = missing
        if kind == "out":
            for w in search.game.edges[key[1]]:
                search.out[key] = w
                if self._search(search, used):
                    return True
            del search.out[key]
            return False
        for m in range(min(search.memory, used + 1)):
            search.upd[key] = m
            if self._search(search, max(used, m + 1)):
                return True
        del search.upd[key]
        return False

    @staticmethod
    def _explore(search: _Search) -> tuple[Optional[tuple[str, tuple[int, int]]], dict[tuple[int, int], list[tuple[int, int]]]]:
        game = search.game
        expanded: dict[tuple[int, int], list[tuple[int, int]]] = {}
        seen = set()
        for start in search.starts:
            first = (0, start)
            if first not in search.upd:
                return ("upd", first), expanded
            seen.add((search.upd[first], start))
        queue = deque(sorted(seen))
        while queue:
            m, v = queue.popleft()
            if game.owner[v] == Owner.P0:
                if (m, v) not in search.out:
                    return ("out", (m, v)), expanded
                targets = [search.out[(m, v)]]
            else:
                targets = list(game.edges[v])
            succ = []
            for w in targets:
                if (m, w) not in search.upd:
                    return ("upd", (m, w)), expanded
                t = (search.upd[(m, w)], w)
                succ.append(t)
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
            expanded[(m, v)] = succ
        return None, expanded

    @staticmethod
    def _violates_sure(search: _Search, expanded: dict[tuple[int, int], list[tuple[int, int]]]) -> bool:
        prio = search.objective.sure.prio
        graph = nx.DiGraph()
        for s, succ in expanded.items():
            graph.add_edges_from((s, t) for t in succ)
        for k in search.objective.sure.odd_priorities():
            sub = graph.subgraph([s for s in graph.nodes if prio[s[1]] >= k])
            for component in nx.strongly_connected_components(sub):
                if not any(prio[s[1]] == k for s in component):
                    continue
                if len(component) > 1 or sub.has_edge(next(iter(component)), next(iter(component))):
                    return True
        return False

    @staticmethod
    def _violates_almost_sure(search: _Search, expanded: dict[tuple[int, int], list[tuple[int, int]]]) -> bool:
        """A fully expanded closed component with odd minimum is reached with positive probability in an MDP."""
        prio = search.objective.secondary.prio
        graph = nx.DiGraph()
        for s, succ in expanded.items():
            graph.add_edges_from((s, t) for t in succ)
        for component in nx.strongly_connected_components(graph):
            if not all(s in expanded and all(t in component for t in expanded[s]) for s in component):
                continue
            if min(prio[s[1]] for s in component) % 2 == 1:
                return True
        return False

    @staticmethod
    def _candidate(search: _Search) -> FiniteMemoryStrategy:
        return FiniteMemoryStrategy.model_construct(
            name="candidate",
            player=0,
            memory=max(search.upd.values(), default=0) + 1,
            m0=0,
            update=dict(search.upd),
            output=dict(search.out),
        )

    def _accepts(self, search: _Search) -> bool:
        try:
            return self.verify_sas_strategy(search.game, self._candidate(search), search.starts, search.objective)
        except ValueError:
            return False

    # ------------------------------------------------------------------ reachability

    def memoryless_chain(self, game: StochasticGame, sigma: MemorylessStrategy, pi: MemorylessStrategy) -> MarkovChain:
        """Chain over all configs (one state per config) under two positional strategies."""
        edges: dict[int, dict[int, Fraction]] = {}
        for v in game.configs:
            if game.owner[v] == Owner.P0:
                edges[v] = {sigma.choice[v]: Fraction(1)}
            elif game.owner[v] == Owner.P1:
                edges[v] = {pi.choice[v]: Fraction(1)}
            else:
                edges[v] = dict(game.prob[v])
        return MarkovChain.model_construct(states=tuple((0, v) for v in game.configs), edges=edges, init=0)

    def oracle_almost_sure_reach(self, game: StochasticGame, target: TargetSet) -> frozenset[int]:
        best = {v: Fraction(0) for v in game.configs}
        for sigma in self.enumerate_memoryless(game, 0):
            worst = {v: Fraction(1) for v in game.configs}
            for pi in self.enumerate_memoryless(game, 1):
                probs = self.chain_service.reach_probabilities(self.memoryless_chain(game, sigma, pi), target)
                for v in game.configs:
                    worst[v] = min(worst[v], probs[v])
            for v in game.configs:
                best[v] = max(best[v], worst[v])
        return frozenset(v for v in game.configs if best[v] == 1)
