import logging
from collections import deque
from fractions import Fraction
from typing import Optional

from solver.models import Owner, ParityObjective, Ranking, SasGameSolution, StochasticGame

from .game_service import GameService

Vector = Optional[tuple[int, ...]]


def prefix_length(k: int) -> int:
    """Number of rank components compared by the order indexed k (odd priorities up to k rounded down to odd)."""
    k_odd = k if k % 2 == 1 else k - 1
    return max((k_odd + 1) // 2, 0)


def rank_le(x: Vector, y: Vector, k: int) -> bool:
    if y is None:
        return True
    if x is None:
        return False
    c = prefix_length(k)
    return x[:c] <= y[:c]


def rank_lt(x: Vector, y: Vector, k: int) -> bool:
    if x is None:
        return False
    if y is None:
        return True
    c = prefix_length(k)
    return x[:c] < y[:c]


def _vector_key(x: Vector) -> tuple:
    return (1,) if x is None else (0,) + x


class RankingService:
    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.game_service = GameService()

    def check_almost_sure_ranking(self, game: StochasticGame, ranking: Ranking, objective: ParityObjective) -> bool:
        length = ranking.length
        if length < (objective.index + 1) // 2:
            raise ValueError(f"ranking has {length} components, objective needs {(objective.index + 1) // 2}")
        for v, vec in ranking.vectors.items():
            if vec is not None and len(vec) != length:
                raise ValueError(f"rank of config {v} has {len(vec)} components, expected {length}")
        epsilon = min((p for dist in game.prob.values() for p in dist.values()), default=Fraction(1))

        def rank(v: int) -> Vector:
            return ranking.vectors.get(v)

        for v in game.configs:
            r = rank(v)
            if r is None:
                continue
            p = objective.prio[v]
            succ = game.edges[v]

            def progress(w: int) -> bool:
                if p % 2 == 1:
                    return rank_lt(rank(w), r, p)
                return rank_le(rank(w), r, p)

            if game.owner[v] == Owner.P0:
                ok = any(progress(w) for w in succ)
            elif game.owner[v] == Owner.P1:
                ok = all(progress(w) for w in succ)
            else:
                dist = game.prob[v]

                def mass(pred) -> Fraction:
                    return sum((dist[w] for w in succ if pred(rank(w))), Fraction(0))

                ok = any(
                    mass(lambda x: rank_le(x, r, j - 2)) == 1 and mass(lambda x: rank_lt(x, r, j)) >= epsilon
                    for j in range(1, p + 1, 2)
                )
                if p % 2 == 0 and not ok:
                    ok = mass(lambda x: rank_le(x, r, p - 1)) == 1
            if not ok:
                self.logger.info(f"Ranking condition fails at config {v}")
                return False
        return True

    def progress_measure(self, game: StochasticGame, objective: ParityObjective, length: int) -> dict[int, Vector]:
        """Least progress measure of a one-player game where every config is universal (Player 0 has no choice).

        Components correspond to odd priorities 1, 3, ...; component t is bounded by the number of
        configs with priority 2t + 1, and exceeding the bound yields infinity (None).
        """
        bounds = [sum(1 for p in objective.prio if p == 2 * t + 1) for t in range(length)]
        rho: dict[int, Vector] = {v: (0,) * length for v in game.configs}
        pred = game.predecessors()

        def lift(v: int, w: int) -> Vector:
            m = rho[w]
            if m is None:
                return None
            p = objective.prio[v]
            c = prefix_length(p)
            head = list(m[:c])
            if p % 2 == 1:
                pos = c - 1
                while pos >= 0:
                    if head[pos] < bounds[pos]:
                        head[pos] += 1
                        break
                    head[pos] = 0
                    pos -= 1
                if pos < 0:
                    return None
            return tuple(head) + (0,) * (length - c)

        queue = deque(game.configs)
        queued = set(game.configs)
        while queue:
            v = queue.popleft()
            queued.discard(v)
            best = max((lift(v, w) for w in game.edges[v]), key=_vector_key)
            if _vector_key(best) > _vector_key(rho[v]):
                rho[v] = best
                for u in pred[v]:
                    if u not in queued:
                        queued.add(u)
                        queue.append(u)
        return rho

    def extract_almost_sure_ranking(
        self, game: StochasticGame, objective: ParityObjective, solution: SasGameSolution
    ) -> tuple[StochasticGame, Ranking]:
        """Rank the product of the game with the strategy's memory, transported from the solved reduced game."""
        states, _, _ = self.game_service.memory_product(game, solution.strat0, sorted(solution.w0))
        product = self.game_service.strategy_game(game, solution.strat0, sorted(solution.w0))
        anchors = [solution.members[m][v] for m, v in states]

        reduced, tau = solution.reduced, solution.tau.choice
        seen = set(anchors)
        queue = deque(sorted(seen))
        while queue:
            x = queue.popleft()
            targets = [tau[x]] if reduced.owner[x] == Owner.P0 else list(reduced.edges[x])
            for y in targets:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        order = sorted(seen)
        local = {x: i for i, x in enumerate(order)}
        restricted = StochasticGame.model_construct(
            name=f"{reduced.name}-tau",
            owner=tuple(Owner.P1 for _ in order),
            edges=tuple(
                (local[tau[x]],) if reduced.owner[x] == Owner.P0 else tuple(local[y] for y in reduced.edges[x])
                for x in order
            ),
            prob={},
            labels=None,
            init=None,
            sure=None,
            secondary=None,
        )
        length = (objective.index + 1) // 2
        secondary = ParityObjective(prio=tuple(solution.reduced_secondary.prio[x] for x in order))
        rho = self.progress_measure(restricted, secondary, length)

        vectors = {s: rho[local[x]] for s, x in enumerate(anchors)}
        epsilon = min((p for dist in product.prob.values() for p in dist.values()), default=Fraction(1))
        self.logger.info(f"Extracted ranking over {len(vectors)} product configs from {len(order)} reduced configs")
        return product, Ranking(vectors=vectors, length=length, epsilon=epsilon)
