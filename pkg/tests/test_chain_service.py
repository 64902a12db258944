from fractions import Fraction

import pytest

from generators import C, L, P, R, counting_strategy
from solver.models import MarkovChain, ParityObjective, TargetSet
from solver.services import ChainService, GameService
from solver.services.chain_service import solve_linear_system


def chain(edges: dict[int, dict[int, Fraction]]) -> MarkovChain:
    return MarkovChain(states=tuple((0, s) for s in range(len(edges))), edges=edges, init=0)


@pytest.fixture
def chain_service() -> ChainService:
    return ChainService()


def test_linear_system():
    half = Fraction(1, 2)
    assert solve_linear_system([[Fraction(1), -half], [-half, Fraction(1)]], [half, Fraction(0)]) == [
        Fraction(2, 3),
        Fraction(1, 3),
    ]


def test_singular_system():
    with pytest.raises(ValueError):
        solve_linear_system([[Fraction(0)]], [Fraction(1)])


class TestBottomSccs:
    def test_single_absorbing_state(self, chain_service):
        assert chain_service.bottom_sccs(chain({0: {0: Fraction(1)}})) == [frozenset({0})]

    def test_two_state_cycle(self, chain_service):
        assert chain_service.bottom_sccs(chain({0: {1: Fraction(1)}, 1: {0: Fraction(1)}})) == [frozenset({0, 1})]

    def test_unreachable_states_are_ignored(self, chain_service):
        c = chain({0: {0: Fraction(1)}, 1: {1: Fraction(1)}})
        assert chain_service.bottom_sccs(c) == [frozenset({0})]


class TestReachProbabilities:
    def test_unreachable_target(self, chain_service):
        probs = chain_service.reach_probabilities(
            chain({0: {0: Fraction(1)}, 1: {1: Fraction(1)}}), TargetSet(members=frozenset({1}))
        )
        assert probs[0] == 0

    def test_deterministic_path(self, chain_service):
        probs = chain_service.reach_probabilities(
            chain({0: {1: Fraction(1)}, 1: {2: Fraction(1)}, 2: {2: Fraction(1)}}), TargetSet(members=frozenset({2}))
        )
        assert probs[0] == 1

    def test_four_repetitions_give_fifteen_sixteenths(self, chain_service, retry):
        c = GameService().product(retry, counting_strategy(4))
        assert chain_service.reach_probabilities(c, TargetSet(members=frozenset({R})))[c.init] == Fraction(15, 16)


class TestObjectives:
    def test_odd_cycle_fails_sure_but_is_left_almost_surely(self, chain_service):
        # 0 <-> 1 with priority 1, escape to absorbing 2 with priority 0
        c = chain({0: {1: Fraction(1, 2), 2: Fraction(1, 2)}, 1: {0: Fraction(1)}, 2: {2: Fraction(1)}})
        objective = ParityObjective(prio=(1, 1, 0))
        assert not chain_service.chain_satisfies_sure(c, objective)
        assert chain_service.chain_satisfies_almost_sure(c, objective)

    def test_even_minimum_on_every_cycle(self, chain_service):
        c = chain({0: {1: Fraction(1)}, 1: {0: Fraction(1)}})
        assert chain_service.chain_satisfies_sure(c, ParityObjective(prio=(0, 1)))
        assert not chain_service.chain_satisfies_sure(c, ParityObjective(prio=(2, 1)))

    def test_odd_self_loop_fails_sure(self, chain_service):
        c = chain({0: {1: Fraction(1)}, 1: {0: Fraction(1, 2), 1: Fraction(1, 2)}})
        assert not chain_service.chain_satisfies_sure(c, ParityObjective(prio=(0, 1)))
        assert chain_service.chain_satisfies_almost_sure(c, ParityObjective(prio=(0, 1)))

    def test_odd_bottom_component_fails_almost_sure(self, chain_service, alternate):
        sigma = GameService.fill_memoryless(alternate, 0, {C: R})
        c = GameService().product(alternate, sigma)
        assert chain_service.chain_satisfies_sure(c, alternate.sure)
        assert not chain_service.chain_satisfies_almost_sure(c, alternate.secondary)


class TestSimulation:
    def test_frequency_close_to_exact_value(self, chain_service, retry):
        c = GameService().product(retry, counting_strategy(4))
        result = chain_service.simulate(c, steps=40, trials=10000, seed=7)
        assert abs(result.final_frequency.get(R, 0.0) - 15 / 16) < 0.05

    def test_certain_edge_has_frequency_one(self, chain_service):
        result = chain_service.simulate(chain({0: {1: Fraction(1)}, 1: {1: Fraction(1)}}), steps=3, trials=50, seed=1)
        assert result.visit_frequency[1] == 1.0

    def test_seed_repeatability(self, chain_service, retry):
        c = GameService().product(retry, counting_strategy(2))
        first = chain_service.simulate(c, steps=20, trials=200, seed=3)
        second = chain_service.simulate(c, steps=20, trials=200, seed=3)
        assert first == second
        assert set(first.final_frequency) <= {L, R, C, P}
