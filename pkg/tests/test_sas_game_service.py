import pytest

from generators import C, P, R, random_games
from solver.models import NodeKind, Owner, StochasticGame
from solver.services import OracleService, RankingService, SasGameService, SasMdpService

GUARD = """
game guard
config 0 owner=p1 prio_sure=0 prio_sec=0 label=g
config 1 owner=p0 prio_sure=0 prio_sec=0 label=win
config 2 owner=p0 prio_sure=1 prio_sec=0 label=lose
edge 0 1
edge 0 2
edge 1 1
edge 2 2
init 0
"""


def fix_player1(game: StochasticGame, choice: dict[int, int]) -> StochasticGame:
    """The MDP left for Player 0 once Player 1 plays the given positional strategy."""
    owner = tuple(Owner.P0 if o == Owner.P1 else o for o in game.owner)
    edges = tuple((choice[v],) if game.owner[v] == Owner.P1 else succ for v, succ in enumerate(game.edges))
    return game.model_copy(update={"owner": owner, "edges": edges})


@pytest.fixture
def sas_game_service() -> SasGameService:
    return SasGameService()


class TestGadget:
    def test_layout_for_even_secondary_priority(self, sas_game_service, alternate):
        reduced, gadget_map, infos = sas_game_service.gadget_reduction(alternate, alternate.objective())
        assert reduced.n == 3 + 6
        assert sorted(index for v, index in gadget_map.tilde if v == P) == [0, 2]
        assert sorted(index for v, index in gadget_map.hat if v == P) == [0, 1, 2]
        bar = gadget_map.bar[P]
        assert reduced.owner[bar] == Owner.P1
        assert reduced.edges[bar] == (gadget_map.tilde[(P, 0)], gadget_map.tilde[(P, 2)])
        assert reduced.edges[gadget_map.tilde[(P, 2)]] == (gadget_map.hat[(P, 2)], gadget_map.hat[(P, 1)])
        assert [reduced.owner[gadget_map.hat[(P, j)]] for j in range(3)] == [Owner.P1, Owner.P0, Owner.P1]
        assert infos[gadget_map.hat[(P, 1)]].kind == NodeKind.HAT

    def test_odd_priority_keeps_only_the_challenge(self, sas_game_service, retry):
        reduced, gadget_map, _ = sas_game_service.gadget_reduction(retry, retry.objective())
        assert reduced.edges[gadget_map.tilde[(P, 2)]] == (gadget_map.hat[(P, 1)],)

    def test_priorities(self, sas_game_service, alternate):
        reduced, gadget_map, _ = sas_game_service.gadget_reduction(alternate, alternate.objective())
        for x in reduced.configs:
            assert reduced.sure.prio[x] == alternate.sure.prio[gadget_map.origin[x]]
        for (v, j), hat in gadget_map.hat.items():
            assert reduced.secondary.prio[hat] == j
            assert reduced.edges[hat] == tuple(gadget_map.entry[w] for w in alternate.edges[v])
        assert reduced.is_non_stochastic


class TestSolve:
    def test_counterexample_and_limit_sure_instance(self, sas_game_service, alternate, retry):
        assert sas_game_service.solve_sas_game_fm(alternate).w0 == frozenset()
        solution = sas_game_service.solve_sas_game_fm(retry)
        assert solution.w0 == frozenset({R})
        assert solution.w1 == frozenset({C, P, 2})

    def test_dominated_guard_is_lost(self, sas_game_service, parse):
        game = parse(GUARD)
        solution = sas_game_service.solve_sas_game_fm(game)
        assert solution.w0 == frozenset({1})
        assert solution.strat1.choice[0] == 2

    def test_mdps_agree_with_the_mdp_pipeline(self, sas_game_service):
        sas_mdp_service = SasMdpService()
        for game in random_games(41, 10, sizes=(2, 3), p1=False):
            assert sas_game_service.solve_sas_game_fm(game).w0 == sas_mdp_service.solve_sas_mdp_fm(game).w0, game.name

    @pytest.mark.parametrize("seed, count", [(42, 10), (43, 10), pytest.param(46, 150, marks=pytest.mark.slow)])
    def test_regions_are_closed_and_refuted(self, seed, count, sas_game_service, monkeypatch):
        monkeypatch.setenv("SAS_ORACLE_CAP", "5000000")
        oracle = OracleService()
        for game in random_games(seed, count, sizes=(2, 3)):
            solution = sas_game_service.solve_sas_game_fm(game)
            assert solution.w0 | solution.w1 == frozenset(game.configs), game.name
            assert not solution.w0 & solution.w1, game.name
            for v in solution.w0:
                if game.owner[v] == Owner.P0:
                    assert any(w in solution.w0 for w in game.edges[v]), game.name
                else:
                    assert all(w in solution.w0 for w in game.edges[v]), game.name
            assert oracle.verify_sas_strategy(game, solution.strat0, starts=solution.w0), game.name
            fixed = fix_player1(game, solution.strat1.choice)
            assert not oracle.oracle_solve_sas(fixed, 3) & solution.w1, game.name

    @pytest.mark.parametrize("seed, count", [(44, 10), pytest.param(47, 150, marks=pytest.mark.slow)])
    def test_regions_match_the_bounded_memory_oracle(self, seed, count, sas_game_service, monkeypatch):
        monkeypatch.setenv("SAS_ORACLE_CAP", "5000000")
        oracle = OracleService()
        for game in random_games(seed, count, sizes=(2, 2)):
            solution = sas_game_service.solve_sas_game_fm(game)
            bounded = oracle.oracle_solve_sas(game, 3)
            assert bounded <= solution.w0, game.name
            # the oracle only faces positional opponents, so a strategy within the bound pins the region
            if solution.strat0.memory <= 3:
                assert bounded == solution.w0, game.name


class TestRanking:
    def test_extracted_ranking_checks_on_the_limit_sure_instance(self, sas_game_service, retry):
        ranking_service = RankingService()
        solution = sas_game_service.solve_sas_game_fm(retry)
        product, ranking = ranking_service.extract_almost_sure_ranking(retry, retry.secondary, solution)
        assert ranking.length == 1
        assert ranking_service.check_almost_sure_ranking(product, ranking, product.secondary)

    @pytest.mark.parametrize("seed, count", [(45, 10), pytest.param(48, 150, marks=pytest.mark.slow)])
    def test_extracted_rankings_check_on_random_games(self, seed, count, sas_game_service):
        ranking_service = RankingService()
        for game in random_games(seed, count, sizes=(2, 4)):
            solution = sas_game_service.solve_sas_game_fm(game)
            if not solution.w0:
                continue
            product, ranking = ranking_service.extract_almost_sure_ranking(game, game.secondary, solution)
            assert ranking_service.check_almost_sure_ranking(product, ranking, product.secondary), game.name
