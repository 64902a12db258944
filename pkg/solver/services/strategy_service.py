import logging
from collections import deque
from typing import Callable, Hashable, Iterable, Optional, Sequence

from solver.errors import VerificationError
from solver.models import (
    FiniteMemoryStrategy,
    MemorylessStrategy,
    NodeInfo,
    NodeKind,
    Owner,
    PullBack,
    StochasticGame,
)

_ANCHORS = (NodeKind.ANCHOR, NodeKind.BAR)


class _Reduced:
    """Reduced game, its node descriptions and the solved positional strategy, as plain lists."""

    def __init__(self, original: StochasticGame, reduced: StochasticGame, infos: Sequence[NodeInfo], tau: MemorylessStrategy):
        self.original = original
        self.succ = reduced.edges
        self.infos = infos
        self.tau = tau.choice

    def move(self, x: int) -> int:
        try:
            return self.tau[x]
        except KeyError:
            raise VerificationError(f"solved strategy has no move at reduced config {x}")

    def successor_from(self, x: int, w: int) -> int:
        for y in self.succ[x]:
            if self.infos[y].origin == w:
                return y
        raise VerificationError(f"reduced config {x} has no successor standing for config {w}")


class StrategyService:
    """Turns a positional strategy of a reduced game into a finite-memory strategy of the original game.

    A memory state is a reduced anchor: the reduced configuration standing for the current original
    configuration. Gadgets replacing random configurations are crossed with the commitment rule: find
    the least 2i whose tilde copy drops to the odd hat; if the observed successor is the one chosen
    there, the play went through that odd hat, otherwise through the even hat just below.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def _through_gadget(self, red: _Reduced, x: int, w: int) -> int:
        tildes = {red.infos[t].index: t for t in red.succ[x]}
        for idx in sorted(tildes):
            if idx < 2:
                continue
            hat = red.move(tildes[idx])
            if red.infos[hat].index == idx - 1:
                committed = red.move(hat)
                if red.infos[committed].origin == w:
                    return committed
                return red.successor_from(red.move(tildes[idx - 2]), w)
        return red.successor_from(red.move(tildes[max(tildes)]), w)

    def _walk(self, red: _Reduced, x: int, w: int) -> int:
        info = red.infos[x]
        if info.kind == NodeKind.BAR:
            y = self._through_gadget(red, x, w)
        elif red.original.owner[info.origin] == Owner.P0:
            y = red.move(x)
        else:
            y = red.successor_from(x, w)
        while red.infos[y].kind == NodeKind.RELAY:
            y = red.move(y)
        if red.infos[y].kind not in _ANCHORS or red.infos[y].origin != w:
            raise VerificationError(f"pull-back from reduced config {x} left the original game at {y}")
        return y

    def pull_back(
        self,
        original: StochasticGame,
        reduced: StochasticGame,
        infos: Sequence[NodeInfo],
        tau: MemorylessStrategy,
        entry: dict[int, int],
        starts: Iterable[int],
        name: str = "sas0",
        seeds: Sequence[Callable[[NodeInfo], Hashable]] = (),
        shared_origins: bool = False,
    ) -> PullBack:
        red = _Reduced(original, reduced, infos, tau)
        update: dict[tuple[int, int], int] = {}
        output: dict[int, int] = {}
        anchors = sorted({entry[v] for v in starts})
        seen = set(anchors)
        queue = deque(anchors)
        while queue:
            x = queue.popleft()
            v = infos[x].origin
            if original.owner[v] == Owner.P0:
                first = red.move(x)
                output[x] = infos[first].origin
                successors = [output[x]]
            else:
                successors = list(original.edges[v])
            for w in successors:
                y = self._walk(red, x, w)
                update[(x, w)] = y
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        self.logger.info(f"Pulled back {len(seen)} anchors from {reduced.name}")
        return self.minimize(original, sorted(seen), infos, update, output, entry, name, seeds, shared_origins)

    def minimize(
        self,
        original: StochasticGame,
        anchors: list[int],
        infos: Sequence[NodeInfo],
        update: dict[tuple[int, int], int],
        output: dict[int, int],
        entry: dict[int, int],
        name: str,
        seeds: Sequence[Callable[[NodeInfo], Hashable]] = (),
        shared_origins: bool = False,
    ) -> PullBack:
        """Merge anchors into memory states, keeping the smallest partition over the seed keys.

        Every seed starts a partition refinement that splits classes until updates agree; with
        shared_origins, anchors of one original config may share a class when their moves agree.
        """
        best: Optional[dict[int, int]] = None
        for seed in seeds or (_layer_key,):
            cls = self._refine(original, anchors, infos, update, output, seed, shared_origins)
            if best is None or len(set(cls.values())) < len(set(best.values())):
                best = cls
        return self._assemble(original, anchors, infos, update, output, entry, name, best)

    def _refine(
        self,
        original: StochasticGame,
        anchors: list[int],
        infos: Sequence[NodeInfo],
        update: dict[tuple[int, int], int],
        output: dict[int, int],
        seed: Callable[[NodeInfo], Hashable],
        shared_origins: bool,
    ) -> dict[int, int]:
        keys: dict[Hashable, int] = {}
        cls = {x: keys.setdefault(seed(infos[x]), len(keys)) for x in anchors}
        count = len(keys)
        while True:
            movers = self._conflict(original, anchors, infos, update, output, cls, shared_origins)
            if movers is None:
                return cls
            for bucket in movers:
                for x in bucket:
                    cls[x] = count
                count += 1

    @staticmethod
    def _conflict(
        original: StochasticGame,
        anchors: list[int],
        infos: Sequence[NodeInfo],
        update: dict[tuple[int, int], int],
        output: dict[int, int],
        cls: dict[int, int],
        shared_origins: bool,
    ) -> Optional[list[list[int]]]:
        """Buckets to move out of the first inconsistent class; the bucket holding the least anchor stays."""
        groups: dict[int, list[int]] = {}
        for x in anchors:
            groups.setdefault(cls[x], []).append(x)
        for c in sorted(groups):
            members = groups[c]
            by_origin: dict[int, dict[Hashable, list[int]]] = {}
            for x in members:
                move = output.get(x) if shared_origins else x
                by_origin.setdefault(infos[x].origin, {}).setdefault(move, []).append(x)
            candidates = [list(moves.values()) for moves in by_origin.values() if len(moves) > 1]
            for w in original.configs:
                buckets: dict[int, list[int]] = {}
                for x in members:
                    if (x, w) in update:
                        buckets.setdefault(cls[update[(x, w)]], []).append(x)
                candidates.append(list(buckets.values()))
            for buckets in candidates:
                if len(buckets) > 1:
                    keep = min(buckets, key=min)
                    return [bucket for bucket in buckets if bucket is not keep]
        return None

    def _assemble(
        self,
        original: StochasticGame,
        anchors: list[int],
        infos: Sequence[NodeInfo],
        update: dict[tuple[int, int], int],
        output: dict[int, int],
        entry: dict[int, int],
        name: str,
        cls: dict[int, int],
    ) -> PullBack:
        order = sorted(set(cls.values()), key=lambda c: min(x for x in anchors if cls[x] == c))
        starts = {w: cls[entry[w]] for w in original.configs if entry.get(w) in cls}

        # the initial memory may coincide with a class whose updates already lead to the start classes
        shared = next(
            (
                c for c in order
                if all(
                    cls[update[(x, w)]] == starts[w]
                    for x in anchors if cls[x] == c
                    for w in starts if (x, w) in update
                )
            ),
            None,
        )
        if shared is not None:
            memory_of = {c: i for i, c in enumerate(order)}
            m0 = memory_of[shared]
        else:
            memory_of = {c: i + 1 for i, c in enumerate(order)}
            m0 = 0
        size = len(order) + (0 if shared is not None else 1)

        members: dict[int, dict[int, int]] = {memory_of[c]: {} for c in order}
        for x in anchors:
            members[memory_of[cls[x]]].setdefault(infos[x].origin, x)

        def fresh(w: int) -> int:
            return memory_of[starts[w]] if w in starts else m0

        mem_update: dict[tuple[int, int], int] = {}
        mem_output: dict[tuple[int, int], int] = {}
        for m, by_origin in members.items():
            targets = {}
            for x in by_origin.values():
                for w in original.configs:
                    if (x, w) in update:
                        targets[w] = memory_of[cls[update[(x, w)]]]
            for w in original.configs:
                mem_update[(m, w)] = targets.get(w, fresh(w))
            for v in original.owned_by(Owner.P0):
                x = by_origin.get(v)
                mem_output[(m, v)] = output[x] if x is not None and x in output else original.edges[v][0]
        if shared is None:
            for w in original.configs:
                mem_update[(0, w)] = fresh(w)
            for v in original.owned_by(Owner.P0):
                mem_output[(0, v)] = original.edges[v][0]

        strategy = FiniteMemoryStrategy(
            name=name,
            player=0,
            memory=size,
            m0=m0,
            update=mem_update,
            output=mem_output,
        )
        self.logger.info(f"Strategy {name}: {len(anchors)} anchors merged into {size} memory states")
        return PullBack(strategy=strategy, members=members)


def _layer_key(info: NodeInfo) -> Hashable:
    return info.layer
