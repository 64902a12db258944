import hashlib
import logging
import re
from collections import deque
from fractions import Fraction
from typing import Iterable, Optional, Union

from solver.errors import GameParseError, GameValidationError
from solver.models import (
    FiniteMemoryStrategy,
    MarkovChain,
    MemorylessStrategy,
    Owner,
    ParityObjective,
    StochasticGame,
)

_FRACTION = re.compile(r"^\d+(/\d+)?$")
_OWNERS = {o.value: o for o in Owner}


def parse_fraction(text: str) -> Fraction:
    if not _FRACTION.match(text):
        raise ValueError(f"not a rational of the form num/den: {text}")
    value = Fraction(text)
    return value


def format_fraction(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def game_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class GameService:
    """Parsing, validation and structural operations on stochastic games."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------ validation

    def validate(self, game: StochasticGame) -> list[str]:
        violations: list[str] = []
        n = game.n
        if len(game.edges) != n:
            violations.append(f"edge lists for {len(game.edges)} configs but {n} owners")
            return violations
        for v in game.configs:
            succ = game.edges[v]
            if not succ:
                violations.append(f"deadlock at {v}")
            if len(set(succ)) != len(succ):
                violations.append(f"duplicate edge at {v}")
            for w in succ:
                if not 0 <= w < n:
                    violations.append(f"edge to unknown config {w} at {v}")
            dist = game.prob.get(v, {})
            if game.owner[v] == Owner.RANDOM:
                for w, p in dist.items():
                    if w not in succ:
                        violations.append(f"prob on non-edge {v}->{w}")
                    if p <= 0 or p > 1:
                        violations.append(f"prob out of range at {v}")
                for w in succ:
                    if w not in dist:
                        violations.append(f"random edge without prob {v}->{w}")
                if sum(dist.values(), Fraction(0)) != 1:
                    violations.append(f"prob sum != 1 at {v}")
            elif dist:
                violations.append(f"prob on non-random source {v}")
        for v in game.prob:
            if not 0 <= v < n:
                violations.append(f"prob on unknown config {v}")
        if game.init is not None and not 0 <= game.init < n:
            violations.append(f"init {game.init} is not a config")
        if game.labels is not None and len(game.labels) != n:
            violations.append(f"{len(game.labels)} labels for {n} configs")
        for name, obj in (("sure", game.sure), ("secondary", game.secondary)):
            if obj is not None and len(obj.prio) != n:
                violations.append(f"{name} priorities for {len(obj.prio)} configs but game has {n}")
        return violations

    def ensure_valid(self, game: StochasticGame) -> StochasticGame:
        violations = self.validate(game)
        if violations:
            self.logger.error(f"Game {game.name} is invalid: {violations}")
            raise GameValidationError(violations)
        return game

    def validate_strategy(self, game: StochasticGame, strategy: FiniteMemoryStrategy) -> list[str]:
        """Moves must follow edges of the game and stay on configs the strategy's player owns."""
        owner = Owner.P0 if strategy.player == 0 else Owner.P1
        violations: list[str] = []
        for (m, v), w in sorted(strategy.output.items()):
            if not 0 <= v < game.n:
                violations.append(f"move at unknown config {v} in memory {m}")
            elif game.owner[v] != owner:
                violations.append(f"move at {v}, which player {strategy.player} does not own")
            elif w not in game.edges[v]:
                violations.append(f"move {v}->{w} in memory {m} is not an edge")
        for (m, w) in sorted(strategy.update):
            if not 0 <= w < game.n:
                violations.append(f"update on unknown config {w} in memory {m}")
        return violations

    def ensure_valid_strategy(self, game: StochasticGame, strategy: FiniteMemoryStrategy) -> FiniteMemoryStrategy:
        violations = self.validate_strategy(game, strategy)
        if violations:
            self.logger.error(f"Strategy {strategy.name} does not fit game {game.name}: {violations}")
            raise GameValidationError(violations)
        return strategy

    # ------------------------------------------------------------------ text format

    def parse_game(self, text: str) -> StochasticGame:
        name = "game"
        configs: dict[int, dict] = {}
        edges: dict[int, list[int]] = {}
        prob: dict[int, dict[int, Fraction]] = {}
        init: Optional[int] = None
        seen_game = False

        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            keyword, args = tokens[0], tokens[1:]
            if keyword == "game":
                if seen_game:
                    raise GameParseError("duplicate game header", line_no)
                if len(args) != 1:
                    raise GameParseError("game header takes exactly one name", line_no)
                name, seen_game = args[0], True
            elif keyword == "config":
                if not args:
                    raise GameParseError("config without id", line_no)
                v = self._parse_id(args[0], line_no)
                if v in configs:
                    raise GameParseError(f"config {v} declared twice", line_no)
                configs[v] = self._parse_config_attrs(args[1:], line_no)
                edges[v] = []
            elif keyword == "edge":
                if len(args) not in (2, 3):
                    raise GameParseError("edge takes a source, a target and an optional prob", line_no)
                v, w = self._parse_id(args[0], line_no), self._parse_id(args[1], line_no)
                if v not in configs:
                    raise GameParseError(f"edge from undeclared config {v}", line_no)
                if w in edges[v]:
                    raise GameParseError(f"duplicate edge {v}->{w}", line_no)
                edges[v].append(w)
                if len(args) == 3:
                    key, _, value = args[2].partition("=")
                    if key != "prob":
                        raise GameParseError(f"unknown edge attribute {key}", line_no)
                    if configs[v]["owner"] != Owner.RANDOM:
                        raise GameParseError(f"prob on non-random source {v}", line_no)
                    try:
                        prob.setdefault(v, {})[w] = parse_fraction(value)
                    except (ValueError, ZeroDivisionError) as e:
                        raise GameParseError(str(e), line_no)
            elif keyword == "init":
                if len(args) != 1:
                    raise GameParseError("init takes exactly one config", line_no)
                if init is not None:
                    raise GameParseError("duplicate init", line_no)
                init = self._parse_id(args[0], line_no)
            else:
                raise GameParseError(f"unknown keyword {keyword}", line_no)

        n = len(configs)
        if sorted(configs) != list(range(n)):
            raise GameParseError("config ids must be contiguous from 0")
        for v, succ in edges.items():
            for w in succ:
                if w not in configs:
                    raise GameParseError(f"edge to unknown config {w} at {v}")

        sure = self._collect_priorities(configs, "prio_sure")
        secondary = self._collect_priorities(configs, "prio_sec")
        game = StochasticGame(
            name=name,
            owner=tuple(configs[v]["owner"] for v in range(n)),
            edges=tuple(tuple(edges[v]) for v in range(n)),
            prob=prob,
            labels=tuple(configs[v].get("label") for v in range(n)),
            init=init,
            sure=sure,
            secondary=secondary,
        )
        self.logger.info(f"Parsed game {name} with {n} configs")
        return self.ensure_valid(game)

    @staticmethod
    def _parse_id(token: str, line_no: int) -> int:
        if not token.isdigit():
            raise GameParseError(f"config id must be a non-negative integer: {token}", line_no)
        return int(token)

    @staticmethod
    def _parse_config_attrs(tokens: list[str], line_no: int) -> dict:
        attrs: dict = {}
        for token in tokens:
            key, sep, value = token.partition("=")
            if not sep or not value:
                raise GameParseError(f"malformed attribute {token}", line_no)
            if key in attrs:
                raise GameParseError(f"attribute {key} given twice", line_no)
            if key == "owner":
                if value not in _OWNERS:
                    raise GameParseError(f"unknown owner {value}", line_no)
                attrs[key] = _OWNERS[value]
            elif key in ("prio_sure", "prio_sec"):
                if not value.isdigit():
                    raise GameParseError(f"{key} must be a non-negative integer", line_no)
                attrs[key] = int(value)
            elif key == "label":
                attrs[key] = value
            else:
                raise GameParseError(f"unknown config attribute {key}", line_no)
        if "owner" not in attrs:
            raise GameParseError("config without owner", line_no)
        return attrs

    @staticmethod
    def _collect_priorities(configs: dict[int, dict], key: str) -> Optional[ParityObjective]:
        present = [v for v in configs if key in configs[v]]
        if not present:
            return None
        if len(present) != len(configs):
            raise GameParseError(f"{key} given for some configs but not all")
        return ParityObjective(prio=tuple(configs[v][key] for v in range(len(configs))))

    def serialize_game(self, game: StochasticGame) -> str:
        lines = [f"game {game.name}"]
        for v in game.configs:
            parts = [f"config {v}", f"owner={game.owner[v].value}"]
            if game.sure is not None:
                parts.append(f"prio_sure={game.sure.prio[v]}")
            if game.secondary is not None:
                parts.append(f"prio_sec={game.secondary.prio[v]}")
            if game.labels is not None and game.labels[v] is not None:
                parts.append(f"label={game.labels[v]}")
            lines.append(" ".join(parts))
        for v in game.configs:
            dist = game.prob.get(v, {})
            for w in game.edges[v]:
                if w in dist:
                    lines.append(f"edge {v} {w} prob={format_fraction(dist[w])}")
                else:
                    lines.append(f"edge {v} {w}")
        if game.init is not None:
            lines.append(f"init {game.init}")
        return "\n".join(lines) + "\n"

    def parse_strategy(self, text: str) -> FiniteMemoryStrategy:
        header: Optional[dict] = None
        m0 = 0
        update: dict[tuple[int, int], int] = {}
        output: dict[tuple[int, int], int] = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                if tokens[0] == "strategy":
                    header = {"name": tokens[1]}
                    for token in tokens[2:]:
                        key, _, value = token.partition("=")
                        header[key] = int(value)
                elif tokens[0] == "initmem":
                    m0 = int(tokens[1])
                elif tokens[0] in ("out", "upd") and len(tokens) == 5 and tokens[3] == "->":
                    key = (int(tokens[1]), int(tokens[2]))
                    (output if tokens[0] == "out" else update)[key] = int(tokens[4])
                else:
                    raise GameParseError(f"unrecognised strategy line: {line}", line_no)
            except GameParseError:
                raise
            except (IndexError, ValueError):
                raise GameParseError(f"malformed strategy line: {line}", line_no)
        if header is None or "memory" not in header:
            raise GameParseError("strategy header with memory=<k> is missing")
        memory = header["memory"]
        for (m, _), target in list(update.items()):
            if not (0 <= m < memory and 0 <= target < memory):
                raise GameParseError(f"memory state out of range in update from {m}")
        return FiniteMemoryStrategy(
            name=header["name"],
            player=header.get("player", 0),
            memory=memory,
            m0=m0,
            update=update,
            output=output,
        )

    def serialize_strategy(self, strategy: Union[FiniteMemoryStrategy, MemorylessStrategy]) -> str:
        if isinstance(strategy, MemorylessStrategy):
            strategy = self.as_finite_memory(strategy)
        lines = [
            f"strategy {strategy.name} player={strategy.player} memory={strategy.memory}",
            f"initmem {strategy.m0}",
        ]
        for (m, v), w in sorted(strategy.output.items()):
            lines.append(f"out {m} {v} -> {w}")
        for (m, w), target in sorted(strategy.update.items()):
            lines.append(f"upd {m} {w} -> {target}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def as_finite_memory(strategy: MemorylessStrategy) -> FiniteMemoryStrategy:
        return FiniteMemoryStrategy(
            name=strategy.name,
            player=strategy.player,
            memory=1,
            m0=0,
            output={(0, v): w for v, w in strategy.choice.items()},
        )

    # ------------------------------------------------------------------ products

    def product(
        self,
        game: StochasticGame,
        sigma: Optional[Union[FiniteMemoryStrategy, MemorylessStrategy]] = None,
        pi: Optional[MemorylessStrategy] = None,
        start: Optional[int] = None,
    ) -> MarkovChain:
        """Markov chain induced by a Player-0 strategy and a memoryless Player-1 strategy.

        The chain starts in (update(m0, start), start); a step from (m, v) to w moves to (update(m, w), w).
        """
        start = game.init if start is None else start
        if start is None:
            raise ValueError(f"product of game {game.name} requires an initial configuration")
        if isinstance(sigma, MemorylessStrategy):
            sigma = self.as_finite_memory(sigma)

        def step(m: int, w: int) -> int:
            return sigma.next_memory(m, w) if sigma is not None else 0

        def moves(m: int, v: int) -> list[tuple[int, Fraction]]:
            owner = game.owner[v]
            if owner == Owner.RANDOM:
                return [(w, game.prob[v][w]) for w in game.edges[v]]
            if owner == Owner.P0:
                if sigma is None:
                    if len(game.edges[v]) != 1:
                        raise ValueError(f"no Player-0 strategy for config {v}")
                    return [(game.edges[v][0], Fraction(1))]
                return [(sigma.choose(m, v), Fraction(1))]
            if pi is None:
                if len(game.edges[v]) != 1:
                    raise ValueError(f"no Player-1 strategy for config {v}")
                return [(game.edges[v][0], Fraction(1))]
            return [(pi.choice[v], Fraction(1))]

        first = (step(sigma.m0 if sigma is not None else 0, start), start)
        index = {first: 0}
        states = [first]
        edges: dict[int, dict[int, Fraction]] = {}
        queue = deque([first])
        while queue:
            m, v = queue.popleft()
            s = index[(m, v)]
            out: dict[int, Fraction] = {}
            for w, p in moves(m, v):
                t = (step(m, w), w)
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                    queue.append(t)
                out[index[t]] = out.get(index[t], Fraction(0)) + p
            edges[s] = out
        return MarkovChain.model_construct(states=tuple(states), edges=edges, init=0)

    def strategy_game(
        self,
        game: StochasticGame,
        sigma: FiniteMemoryStrategy,
        starts: Iterable[int],
    ) -> StochasticGame:
        """Product of the game with the memory of sigma, Player-0 moves resolved, reachable part from starts.

        Configurations are labelled "memory:config" and keep the priorities of their config.
        """
        states, succ, prob = self.memory_product(game, sigma, starts)

        def lift(obj: Optional[ParityObjective]) -> Optional[ParityObjective]:
            return None if obj is None else ParityObjective(prio=tuple(obj.prio[v] for _, v in states))

        return StochasticGame(
            name=f"{game.name}x{sigma.name}",
            owner=tuple(game.owner[v] for _, v in states),
            edges=tuple(tuple(succ[s]) for s in range(len(states))),
            prob=prob,
            labels=tuple(f"{m}:{game.label(v)}" for m, v in states),
            init=0 if states else None,
            sure=lift(game.sure),
            secondary=lift(game.secondary),
        )

    def memory_product(
        self,
        game: StochasticGame,
        sigma: FiniteMemoryStrategy,
        starts: Iterable[int],
    ) -> tuple[list[tuple[int, int]], dict[int, list[int]], dict[int, dict[int, Fraction]]]:
        """Reachable (memory, config) states under sigma with every Player-1 and random move kept."""
        index: dict[tuple[int, int], int] = {}
        states: list[tuple[int, int]] = []
        queue: deque = deque()
        for v in starts:
            t = (sigma.next_memory(sigma.m0, v), v)
            if t not in index:
                index[t] = len(states)
                states.append(t)
                queue.append(t)
        succ: dict[int, list[int]] = {}
        prob: dict[int, dict[int, Fraction]] = {}
        while queue:
            m, v = queue.popleft()
            s = index[(m, v)]
            targets = [sigma.choose(m, v)] if game.owner[v] == Owner.P0 else list(game.edges[v])
            succ[s] = []
            for w in targets:
                t = (sigma.next_memory(m, w), w)
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                    queue.append(t)
                succ[s].append(index[t])
                if game.owner[v] == Owner.RANDOM:
                    prob.setdefault(s, {})[index[t]] = game.prob[v][w]
        return states, succ, prob

    # ------------------------------------------------------------------ restructuring

    def subgame(self, game: StochasticGame, keep: Iterable[int]) -> tuple[StochasticGame, tuple[int, ...]]:
        """Restriction to keep; Player-0 edges leaving keep are dropped, other configs must stay inside."""
        kept = sorted(set(keep))
        new_id = {v: i for i, v in enumerate(kept)}
        edges = []
        prob: dict[int, dict[int, Fraction]] = {}
        for v in kept:
            succ = [w for w in game.edges[v] if w in new_id]
            if game.owner[v] != Owner.P0 and len(succ) != len(game.edges[v]):
                raise ValueError(f"config {v} of {game.owner[v].value} leaves the kept set")
            if not succ:
                raise ValueError(f"config {v} has no successor inside the kept set")
            edges.append(tuple(new_id[w] for w in succ))
            if game.owner[v] == Owner.RANDOM:
                prob[new_id[v]] = {new_id[w]: game.prob[v][w] for w in succ}

        def restrict(obj: Optional[ParityObjective]) -> Optional[ParityObjective]:
            return None if obj is None else ParityObjective(prio=tuple(obj.prio[v] for v in kept))

        sub = StochasticGame(
            name=game.name,
            owner=tuple(game.owner[v] for v in kept),
            edges=tuple(edges),
            prob=prob,
            labels=tuple(game.label(v) for v in kept) if game.labels is not None else None,
            init=new_id.get(game.init) if game.init is not None else None,
            sure=restrict(game.sure),
            secondary=restrict(game.secondary),
        )
        return sub, tuple(kept)

    def collapse(self, game: StochasticGame, region: Iterable[int], label: str = "T") -> tuple[StochasticGame, tuple[int, ...]]:
        """Replace region by one absorbing Player-0 config (last id) with priorities 0 in both objectives.

        Returns the new game and, per new config, its original config (-1 for the absorbing one).
        """
        region = set(region)
        outside = [v for v in game.configs if v not in region]
        new_id = {v: i for i, v in enumerate(outside)}
        sink = len(outside)

        def target(w: int) -> int:
            return sink if w in region else new_id[w]

        edges = []
        prob: dict[int, dict[int, Fraction]] = {}
        for v in outside:
            succ: list[int] = []
            for w in game.edges[v]:
                t = target(w)
                if t not in succ:
                    succ.append(t)
                if game.owner[v] == Owner.RANDOM:
                    dist = prob.setdefault(new_id[v], {})
                    dist[t] = dist.get(t, Fraction(0)) + game.prob[v][w]
            edges.append(tuple(succ))
        edges.append((sink,))

        def lift(obj: Optional[ParityObjective]) -> Optional[ParityObjective]:
            return None if obj is None else ParityObjective(prio=tuple(obj.prio[v] for v in outside) + (0,))

        init = None
        if game.init is not None:
            init = target(game.init)
        collapsed = StochasticGame(
            name=game.name,
            owner=tuple(game.owner[v] for v in outside) + (Owner.P0,),
            edges=tuple(edges),
            prob=prob,
            labels=tuple(game.label(v) for v in outside) + (label,),
            init=init,
            sure=lift(game.sure),
            secondary=lift(game.secondary),
        )
        return collapsed, tuple(outside) + (-1,)

    @staticmethod
    def fill_memoryless(game: StochasticGame, player: int, choice: dict[int, int], name: str = "strategy") -> MemorylessStrategy:
        """Complete a partial positional choice with the first successor on every owned config."""
        owner = Owner.P0 if player == 0 else Owner.P1
        total = {v: choice.get(v, game.edges[v][0]) for v in game.owned_by(owner)}
        return MemorylessStrategy(name=name, player=player, choice=total)
