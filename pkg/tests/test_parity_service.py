import pytest

from generators import C, random_games
from solver.models import ParityObjective, TargetSet
from solver.services import GameService, OracleService, ParityService, ChainService

SMALL = """
game small
config 0 owner=p0 prio_sure=1
config 1 owner=p1 prio_sure=0
config 2 owner=p1 prio_sure=1
edge 0 1
edge 0 2
edge 1 1
edge 2 2
"""


@pytest.fixture
def parity_service() -> ParityService:
    return ParityService()


def test_player0_picks_the_even_sink(parse, parity_service):
    game = parse(SMALL)
    solution = parity_service.solve_parity(game, game.sure)
    assert solution.w0 == frozenset({0, 1})
    assert solution.w1 == frozenset({2})
    assert solution.strat0.choice[0] == 1


def test_strategies_are_total(parse, parity_service):
    game = parse(SMALL)
    solution = parity_service.solve_parity(game, game.sure)
    assert set(solution.strat0.choice) == {0}
    assert set(solution.strat1.choice) == {1, 2}


def test_attractor(parse, parity_service):
    game = parse(SMALL)
    attr, witness = parity_service.attractor(game, 0, TargetSet(members=frozenset({1})))
    assert attr == frozenset({0, 1})
    assert witness.choice == {0: 1}
    attr, _ = parity_service.attractor(game, 1, TargetSet(members=frozenset({1})))
    assert attr == frozenset({1})


def test_random_configs_are_rejected(alternate, parity_service):
    with pytest.raises(ValueError, match="random"):
        parity_service.solve_parity(alternate, alternate.sure)


def test_sure_region_resolves_random_adversarially(parse, parity_service, retry):
    loop = parse("game loop\nconfig 0 owner=rand prio_sure=1\nedge 0 0 prob=1\n")
    region, _ = parity_service.sure_winning_region(loop, loop.sure)
    assert region == frozenset()
    region, strategy = parity_service.sure_winning_region(retry, retry.sure)
    assert region == frozenset(retry.configs)
    # c -> p could loop through the odd priorities forever
    assert strategy.choice[C] == 2


def test_almost_sure_reach_on_retry(parity_service, retry):
    region, strategy = parity_service.almost_sure_reach(retry, TargetSet(members=frozenset({3})))
    assert region == frozenset({0, 1, 3})
    assert strategy.choice[C] == 1


def test_index_is_the_largest_priority():
    assert ParityObjective(prio=(0, 3, 2)).index == 3
    assert ParityObjective(prio=(0, 3, 2, 1)).odd_priorities() == [1, 3]


@pytest.mark.parametrize(
    "seed, count, sizes, d_sure, max_out",
    [
        (1, 15, (2, 5), 3, 2),
        (2, 15, (2, 5), 3, 2),
        (3, 15, (2, 5), 3, 2),
        pytest.param(6, 500, (2, 7), 4, 3, marks=pytest.mark.slow),
    ],
)
def test_regions_match_the_oracle(seed, count, sizes, d_sure, max_out, parity_service):
    oracle = OracleService()
    game_service = GameService()
    chain_service = ChainService()
    for game in random_games(seed, count, sizes=sizes, stochastic=False, d_sure=d_sure, max_out=max_out):
        solution = parity_service.solve_parity(game, game.sure)
        w0, w1 = oracle.oracle_solve_parity(game, game.sure)
        assert solution.w0 == w0, game.name
        assert solution.w1 == w1, game.name
        for pi in oracle.enumerate_memoryless(game, 1):
            for v in solution.w0:
                chain = game_service.product(game, solution.strat0, pi, start=v)
                assert chain_service.chain_satisfies_sure(chain, game.sure), game.name


@pytest.mark.parametrize("seed, count", [(4, 15), (5, 15), pytest.param(7, 150, marks=pytest.mark.slow)])
def test_almost_sure_reach_matches_the_oracle(seed, count, parity_service):
    oracle = OracleService()
    for game in random_games(seed, count, sizes=(2, 4)):
        target = TargetSet(members=frozenset({game.n - 1}))
        region, _ = parity_service.almost_sure_reach(game, target)
        assert region == oracle.oracle_almost_sure_reach(game, target), game.name
