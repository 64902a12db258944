from fractions import Fraction

import pytest

from generators import C, L, P, R, random_games
from solver.errors import CapExceededError
from solver.models import TargetSet
from solver.services import ChainService, GameService, OracleService, SlsService


def coin_cycle(n: int) -> str:
    """n random configs in a ring; each one stays or moves on with a fair coin."""
    lines = ["game ring"]
    lines += [f"config {v} owner=rand prio_sure=0 prio_sec=0" for v in range(n)]
    for v in range(n):
        lines += [f"edge {v} {v} prob=1/2", f"edge {v} {(v + 1) % n} prob=1/2"]
    return "\n".join(lines) + "\n"


@pytest.fixture
def sls_service() -> SlsService:
    return SlsService()


class TestRegions:
    def test_limit_sure_is_strictly_stronger(self, sls_service, retry):
        solution = sls_service.solve_sls(retry)
        assert solution.sas_region == frozenset({R})
        assert solution.sure_region == frozenset({C, P, L, R})
        assert solution.z == frozenset({C, P, R})

    def test_odd_random_loop_is_lost(self, sls_service, parse):
        game = parse("game odd\nconfig 0 owner=rand prio_sure=1 prio_sec=1\nedge 0 0 prob=1\n")
        solution = sls_service.solve_sls(game)
        assert solution.z == frozenset()
        assert solution.sure_region == frozenset()

    def test_regions_are_nested(self, sls_service):
        for game in random_games(51, 10, sizes=(2, 4)):
            solution = sls_service.solve_sls(game)
            assert solution.sas_region <= solution.z <= solution.sure_region, game.name


class TestEpsilonStrategies:
    @pytest.mark.parametrize(
        ("epsilon", "horizon", "guaranteed"),
        [
            (Fraction(1, 16), 4, Fraction(15, 16)),
            (Fraction(1, 8), 3, Fraction(7, 8)),
            (Fraction(1, 2), 1, Fraction(1, 2)),
        ],
    )
    def test_horizons_on_the_limit_sure_instance(self, sls_service, retry, epsilon, horizon, guaranteed):
        result = sls_service.solve_sls(retry).strategy_builder(epsilon)
        assert result.horizon == horizon
        assert result.guaranteed == guaranteed
        assert not result.conservative

    def test_strategy_is_surely_safe_and_reaches_r(self, sls_service, retry):
        result = sls_service.solve_sls(retry).strategy_builder(Fraction(1, 16))
        chain = GameService().product(retry, result.strategy)
        chain_service = ChainService()
        assert chain_service.chain_satisfies_sure(chain, retry.sure)
        probs = chain_service.reach_probabilities(chain, TargetSet(members=frozenset({R})))
        assert probs[chain.init] == Fraction(15, 16)

    @pytest.mark.parametrize("epsilon", [Fraction(0), Fraction(1), Fraction(3, 2)])
    def test_epsilon_outside_the_open_interval(self, sls_service, retry, epsilon):
        solution = sls_service.solve_sls(retry)
        with pytest.raises(ValueError, match="epsilon"):
            solution.strategy_builder(epsilon)

    def test_random_strategies_are_surely_safe(self, sls_service):
        oracle = OracleService()
        game_service = GameService()
        chain_service = ChainService()
        for game in random_games(52, 8, sizes=(2, 3)):
            solution = sls_service.solve_sls(game)
            if game.init not in solution.z:
                continue
            result = solution.strategy_builder(Fraction(1, 4))
            assert result.guaranteed >= Fraction(3, 4), game.name
            for pi in oracle.enumerate_memoryless(game, 1):
                chain = game_service.product(game, result.strategy, pi)
                assert chain_service.chain_satisfies_sure(chain, game.sure), game.name


class TestConservativeHorizon:
    def test_closed_form_on_the_limit_sure_instance(self, retry):
        # success within four steps is at least 1/16, so 43 rounds push the failure below 1/16
        assert SlsService.conservative_horizon(retry, Fraction(1, 16)) == 4 * 43

    def test_deterministic_game_needs_one_round(self, parse):
        game = parse("game d\nconfig 0 owner=p0 prio_sure=0 prio_sec=0\nconfig 1 owner=p0 prio_sure=0 prio_sec=0\nedge 0 1\nedge 1 1\n")
        assert SlsService.conservative_horizon(game, Fraction(1, 100)) == 2

    def test_fallback_is_flagged(self, monkeypatch, retry):
        monkeypatch.setenv("SAS_SLS_MAX_HORIZON", "2")
        result = SlsService().solve_sls(retry).strategy_builder(Fraction(1, 16))
        assert result.conservative
        assert result.horizon == 4 * 43

    @pytest.mark.parametrize("n", [60, 1100])
    def test_long_rings_need_astronomical_horizons(self, parse, n):
        # a success chance of 2^-n per round; at n = 1100 it no longer fits a float
        horizon = SlsService.conservative_horizon(parse(coin_cycle(n)), Fraction(1, 16))
        assert horizon % n == 0
        assert horizon // n >= 2 ** n

    def test_fallback_strategy_reaches_the_sas_region(self, monkeypatch, retry):
        monkeypatch.setenv("SAS_SLS_MAX_HORIZON", "0")
        result = SlsService().solve_sls(retry).strategy_builder(Fraction(1, 2))
        assert result.conservative
        assert result.horizon == 4 * 11
        assert result.guaranteed == Fraction(1, 2)
        chain = GameService().product(retry, result.strategy)
        reached = ChainService().reach_probabilities(chain, TargetSet(members=frozenset({R})))[chain.init]
        assert reached == 1 - Fraction(1, 2) ** 44
        assert reached >= 1 - result.epsilon

    def test_fallback_respects_the_memory_cap(self, monkeypatch, retry):
        monkeypatch.setenv("SAS_SLS_MAX_HORIZON", "2")
        monkeypatch.setenv("SAS_SLS_MAX_MEMORY", "100")
        with pytest.raises(CapExceededError, match="memory"):
            SlsService().solve_sls(retry).strategy_builder(Fraction(1, 16))
