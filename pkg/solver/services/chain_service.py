import logging
import random
from fractions import Fraction

import networkx as nx

from solver.models import MarkovChain, ParityObjective, SimulationResult, TargetSet


def solve_linear_system(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact Gauss-Jordan elimination with partial pivoting on a non-singular square system."""
    size = len(rhs)
    rows = [list(matrix[i]) + [rhs[i]] for i in range(size)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if rows[r][col] != 0), None)
        if pivot is None:
            raise ValueError("singular system")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        lead = rows[col][col]
        rows[col] = [x / lead for x in rows[col]]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
    return [rows[i][size] for i in range(size)]


def _nontrivial(graph: nx.DiGraph, component: set) -> bool:
    if len(component) > 1:
        return True
    v = next(iter(component))
    return graph.has_edge(v, v)


class ChainService:
    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @staticmethod
    def graph(chain: MarkovChain) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(chain.states)))
        for s, dist in chain.edges.items():
            graph.add_edges_from((s, t) for t, p in dist.items() if p > 0)
        return graph

    def reachable(self, chain: MarkovChain) -> set[int]:
        graph = self.graph(chain)
        return nx.descendants(graph, chain.init) | {chain.init}

    def bottom_sccs(self, chain: MarkovChain) -> list[frozenset[int]]:
        graph = self.graph(chain).subgraph(self.reachable(chain))
        condensed = nx.condensation(graph)
        bottoms = [
            frozenset(condensed.nodes[c]["members"])
            for c in condensed.nodes
            if condensed.out_degree(c) == 0
        ]
        return sorted(bottoms, key=min)

    def reach_probabilities(self, chain: MarkovChain, target: TargetSet) -> dict[int, Fraction]:
        """Probability of eventually visiting a state whose configuration lies in target, per chain state."""
        graph = self.graph(chain)
        goal = {s for s in graph.nodes if chain.config_of(s) in target.members}
        can_reach = set(goal)
        for s in goal:
            can_reach |= nx.ancestors(graph, s)
        unknown = sorted(can_reach - goal)
        position = {s: i for i, s in enumerate(unknown)}
        matrix = [[Fraction(0)] * len(unknown) for _ in unknown]
        rhs = [Fraction(0)] * len(unknown)
        for s in unknown:
            i = position[s]
            matrix[i][i] += 1
            for t, p in chain.edges.get(s, {}).items():
                if t in goal:
                    rhs[i] += p
                elif t in position:
                    matrix[i][position[t]] -= p
        values = solve_linear_system(matrix, rhs) if unknown else []
        result = {s: Fraction(0) for s in graph.nodes}
        result.update({s: Fraction(1) for s in goal})
        result.update({s: values[position[s]] for s in unknown})
        return result

    def chain_satisfies_sure(self, chain: MarkovChain, objective: ParityObjective) -> bool:
        """Every path from the initial state satisfies the objective: no reachable cycle has an odd minimum."""
        graph = self.graph(chain).subgraph(self.reachable(chain))
        prio = {s: objective.prio[chain.config_of(s)] for s in graph.nodes}
        for k in objective.odd_priorities():
            sub = graph.subgraph([s for s in graph.nodes if prio[s] >= k])
            for component in nx.strongly_connected_components(sub):
                if any(prio[s] == k for s in component) and _nontrivial(sub, component):
                    return False
        return True

    def chain_satisfies_almost_sure(self, chain: MarkovChain, objective: ParityObjective) -> bool:
        """Every bottom strongly connected component has an even minimal priority."""
        for component in self.bottom_sccs(chain):
            if min(objective.prio[chain.config_of(s)] for s in component) % 2 == 1:
                return False
        return True

    def simulate(self, chain: MarkovChain, steps: int, trials: int, seed: int) -> SimulationResult:
        visits: dict[int, int] = {}
        finals: dict[int, int] = {}
        for trial in range(trials):
            rng = random.Random(f"{seed}:{trial}")
            s = chain.init
            seen = {chain.config_of(s)}
            for _ in range(steps):
                s = self._sample(rng, chain.edges[s])
                seen.add(chain.config_of(s))
            for v in seen:
                visits[v] = visits.get(v, 0) + 1
            v = chain.config_of(s)
            finals[v] = finals.get(v, 0) + 1
        self.logger.info(f"Simulated {trials} runs of {steps} steps with seed {seed}")
        return SimulationResult(
            visit_frequency={v: count / trials for v, count in sorted(visits.items())},
            final_frequency={v: count / trials for v, count in sorted(finals.items())},
        )

    @staticmethod
    def _sample(rng: random.Random, dist: dict[int, Fraction]) -> int:
        r = rng.random()
        acc = 0.0
        last = None
        for t, p in dist.items():
            acc += float(p)
            last = t
            if r < acc:
                return t
        return last
