import pytest

from generators import C, L, P, R, random_games
from solver.errors import UsageError
from solver.models import NodeKind, Owner, TargetSet
from solver.services import OracleService, ParityService, SasMdpService

GADGET = """
game flip
config 0 owner=rand prio_sure=1
config 1 owner=p0 prio_sure=0
edge 0 0 prob=1/2
edge 0 1 prob=1/2
edge 1 1
"""


# h -> a serves the sure objective only, h -> b the almost-sure one; the sure index is 1
ALTERNATION = """
game alternation
config 0 owner=p0 prio_sure=1 prio_sec=2 label=h
config 1 owner=p0 prio_sure=0 prio_sec=1 label=a
config 2 owner=p0 prio_sure=1 prio_sec=0 label=b
edge 0 1
edge 0 2
edge 1 0
edge 2 0
"""


@pytest.fixture
def sas_mdp_service() -> SasMdpService:
    return SasMdpService()


class TestBuchiCopies:
    def test_counterexample_copies(self, sas_mdp_service, alternate):
        stage = sas_mdp_service.as_parity_to_buchi(alternate, alternate.objective())
        assert stage.game.n == 4 + 4 + 2 * 4 + 1
        # copies 0 and 2 follow the tilde block; r has priority 1 and never enters the set
        assert stage.buchi.members == frozenset({12 + C, 12 + P, 12 + L})
        bottom = stage.game.n - 1
        assert stage.game.edges[12 + R] == (bottom,)
        assert stage.game.edges[bottom] == (bottom,)
        assert stage.game.sure.prio[bottom] == 1

    def test_relay_offers_every_copy(self, sas_mdp_service, alternate):
        stage = sas_mdp_service.as_parity_to_buchi(alternate, alternate.objective())
        relay = 4 + C
        assert stage.game.edges[relay] == (C, 8 + C, 12 + C, 16)
        assert stage.info[relay].kind == NodeKind.RELAY
        assert stage.game.sure.prio[relay] == alternate.sure.prio[C]

    def test_zero_index_has_a_single_copy(self, sas_mdp_service, parse):
        mdp = parse("game z\nconfig 0 owner=p0 prio_sure=1 prio_sec=0\nedge 0 0\n")
        stage = sas_mdp_service.as_parity_to_buchi(mdp, mdp.objective())
        assert stage.game.n == 1 + 1 + 1 + 1
        assert stage.buchi.members == frozenset({2})

    def test_player1_configs_are_refused(self, sas_mdp_service, parse):
        game = parse("game g\nconfig 0 owner=p1 prio_sure=0 prio_sec=0\nedge 0 0\n")
        with pytest.raises(UsageError):
            sas_mdp_service.as_parity_to_buchi(game, game.objective())


class TestGadgets:
    def test_random_config_outside_the_set_gets_both_branches(self, sas_mdp_service, parse):
        mdp = parse(GADGET)
        stage = sas_mdp_service.buchi_mdp_to_conj_game(mdp, TargetSet())
        game = stage.game
        gadget = [x for x in game.configs if stage.origin[x] == 0]
        assert len(gadget) == 5
        assert sum(len(game.edges[x]) for x in gadget) == 8
        assert game.is_non_stochastic
        kinds = [stage.info[x].kind for x in gadget]
        assert kinds == [NodeKind.BAR, NodeKind.TILDE, NodeKind.HAT, NodeKind.TILDE, NodeKind.HAT]
        assert [game.owner[x] for x in gadget] == [Owner.P1, Owner.P0, Owner.P1, Owner.P0, Owner.P0]
        assert stage.buchi.members == frozenset({2})

    def test_random_config_inside_the_set_keeps_the_fair_branch(self, sas_mdp_service, parse):
        mdp = parse(GADGET)
        stage = sas_mdp_service.buchi_mdp_to_conj_game(mdp, TargetSet(members=frozenset({0})))
        gadget = [x for x in stage.game.configs if stage.origin[x] == 0]
        assert len(gadget) == 3
        assert stage.game.edges[gadget[0]] == (gadget[1],)

    def test_sure_priorities_are_copied(self, sas_mdp_service, parse):
        mdp = parse(GADGET)
        stage = sas_mdp_service.buchi_mdp_to_conj_game(mdp, TargetSet())
        for x in stage.game.configs:
            assert stage.game.sure.prio[x] == mdp.sure.prio[stage.origin[x]]


class TestMonitor:
    def test_even_loop_without_buchi_visits_loses(self, sas_mdp_service, parse):
        game = parse("game loop\nconfig 0 owner=p0 prio_sure=0\nedge 0 0\n")
        stage, entry = sas_mdp_service.buchi_and_parity_to_parity(game, TargetSet(), game.sure)
        solution = ParityService().solve_parity(stage.game, stage.game.sure)
        assert entry[0] not in solution.w0
        stage, entry = sas_mdp_service.buchi_and_parity_to_parity(game, TargetSet(members=frozenset({0})), game.sure)
        solution = ParityService().solve_parity(stage.game, stage.game.sure)
        assert entry[0] in solution.w0

    def test_full_buchi_set_is_plain_parity(self, sas_mdp_service):
        parity_service = ParityService()
        for game in random_games(31, 15, sizes=(2, 5), stochastic=False, d_sure=3):
            everything = TargetSet(members=frozenset(game.configs))
            stage, entry = sas_mdp_service.buchi_and_parity_to_parity(game, everything, game.sure)
            product = parity_service.solve_parity(stage.game, stage.game.sure)
            plain = parity_service.solve_parity(game, game.sure)
            assert frozenset(v for v in game.configs if entry[v] in product.w0) == plain.w0, game.name

    def test_monitor_priorities_stay_below_the_rounded_index(self, sas_mdp_service):
        for game in random_games(32, 10, sizes=(2, 5), stochastic=False, d_sure=4):
            stage, _ = sas_mdp_service.buchi_and_parity_to_parity(game, TargetSet(), game.sure)
            assert stage.game.sure.index <= game.sure.index + 1, game.name


class TestSolve:
    def test_counterexample_has_no_finite_memory_winner(self, sas_mdp_service, alternate):
        solution = sas_mdp_service.solve_sas_mdp_fm(alternate)
        assert solution.w0 == frozenset()
        assert [stage.name for stage in solution.trace.stages] == ["buchi", "gadget", "monitor"]

    def test_limit_sure_instance_only_wins_at_r(self, sas_mdp_service, retry):
        assert sas_mdp_service.solve_sas_mdp_fm(retry).w0 == frozenset({R})

    def test_all_zero_priorities_win_everywhere_without_memory(self, sas_mdp_service):
        for game in random_games(33, 10, sizes=(2, 5), p1=False, d_sure=0, d_sec=0):
            solution = sas_mdp_service.solve_sas_mdp_fm(game)
            assert solution.w0 == frozenset(game.configs), game.name
            assert solution.strategy.memory == 1, game.name

    def test_alternation_fits_in_two_memory_states(self, sas_mdp_service, parse):
        game = parse(ALTERNATION)
        assert game.sure.index == 1
        assert OracleService().oracle_solve_sas(game, 1) == frozenset()
        solution = sas_mdp_service.solve_sas_mdp_fm(game)
        assert solution.w0 == frozenset({0, 1, 2})
        assert solution.strategy.memory == 2

    @pytest.mark.parametrize(
        "seed, count, sizes, d, max_out",
        [
            (34, 12, (2, 3), 2, 2),
            (35, 12, (2, 3), 2, 2),
            pytest.param(37, 200, (2, 6), 3, 3, marks=pytest.mark.slow),
        ],
    )
    def test_regions_match_the_bounded_memory_oracle(self, seed, count, sizes, d, max_out, monkeypatch):
        monkeypatch.setenv("SAS_ORACLE_CAP", "5000000")
        sas_mdp_service = SasMdpService()
        oracle = OracleService()
        for game in random_games(seed, count, sizes=sizes, p1=False, d_sure=d, d_sec=d, max_out=max_out):
            bound = game.sure.index + 1
            solution = sas_mdp_service.solve_sas_mdp_fm(game)
            assert solution.strategy.memory <= bound, game.name
            assert solution.w0 == oracle.oracle_solve_sas(game, bound), game.name
            assert oracle.verify_sas_strategy(game, solution.strategy, starts=solution.w0), game.name

    @pytest.mark.parametrize("seed, count", [(36, 10), pytest.param(38, 200, marks=pytest.mark.slow)])
    def test_final_game_size_is_bounded(self, seed, count, sas_mdp_service):
        for game in random_games(seed, count, sizes=(2, 6), p1=False, d_sure=3, d_sec=3, pin_index=True):
            stages, _ = sas_mdp_service.reduce(game, game.objective())
            final = stages[-1].game
            d_s, d_as = game.sure.index, game.secondary.index
            assert final.n <= 8 * game.n * (d_as + 1) * (d_s + 1), game.name
            assert final.sure.index <= d_s + 1, game.name
