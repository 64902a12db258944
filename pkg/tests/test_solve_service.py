from fractions import Fraction

import pytest

from solver.errors import UsageError
from solver.services import SolveService

PARITY = """
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
def solve_service() -> SolveService:
    return SolveService()


class TestSolve:
    def test_counterexample_mdp(self, solve_service, alternate):
        outcome = solve_service.solve(alternate, "sas")
        assert outcome.model == "mdp"
        assert outcome.region == frozenset()
        assert ("region", "[]") in outcome.fields
        assert ("stage.buchi", "17") in outcome.fields
        assert ("stage.gadget", "27") in outcome.fields
        assert "strategy0" in outcome.strategies

    def test_counterexample_as_a_game(self, solve_service, alternate):
        outcome = solve_service.solve(alternate, "sas", model="game")
        assert outcome.fields[:2] == [("region", "[]"), ("region1", "[0:c, 1:p, 2:l, 3:r]")]
        assert set(outcome.strategies) == {"strategy0", "strategy1"}

    def test_limit_sure_report(self, solve_service, retry):
        outcome = solve_service.solve(retry, "sls", epsilon=Fraction(1, 16))
        assert outcome.fields == [
            ("region", "[0:c, 1:p, 3:r]"),
            ("sas_region", "[3:r]"),
            ("sure_region", "[0:c, 1:p, 2:l, 3:r]"),
            ("epsilon", "1/16"),
            ("horizon", "4"),
            ("guaranteed", "15/16"),
            ("conservative", "no"),
        ]

    def test_parity_mode(self, solve_service, parse):
        outcome = solve_service.solve(parse(PARITY), "parity")
        assert outcome.region == frozenset({0, 1})
        assert outcome.fields == [("region", "[0, 1]"), ("region1", "[2]")]
        assert outcome.memory == 1


class TestUsage:
    def test_unknown_mode(self, solve_service, retry):
        with pytest.raises(UsageError, match="unknown mode"):
            solve_service.solve(retry, "quantitative")

    @pytest.mark.parametrize("epsilon", [None, Fraction(0), Fraction(1)])
    def test_sls_needs_an_epsilon_in_the_open_interval(self, solve_service, retry, epsilon):
        with pytest.raises(UsageError):
            solve_service.solve(retry, "sls", epsilon=epsilon)

    def test_parity_mode_refuses_two_objectives(self, solve_service, alternate):
        with pytest.raises(UsageError, match="prio_sec"):
            solve_service.solve(alternate, "parity")

    def test_conj_mode_refuses_random_configs(self, solve_service, retry):
        with pytest.raises(UsageError, match="random"):
            solve_service.solve(retry, "conj")

    def test_mdp_model_refuses_player1(self, solve_service, parse):
        game = parse("game g\nconfig 0 owner=p1 prio_sure=0 prio_sec=0\nedge 0 0\n")
        with pytest.raises(UsageError, match="Player-1"):
            solve_service.solve(game, "sas", model="mdp")

    def test_sas_needs_both_objectives(self, solve_service, parse):
        with pytest.raises(UsageError, match="prio_sec"):
            solve_service.solve(parse(PARITY), "sas")


class TestReduce:
    def test_pipelines_name_their_stages(self, solve_service, alternate):
        assert [s.name for s in solve_service.reduce(alternate, "sas-mdp")] == ["buchi", "gadget", "monitor"]
        assert [s.name for s in solve_service.reduce(alternate, "sas-game")] == ["gadget", "iar"]

    def test_streett_pipeline_needs_a_non_stochastic_game(self, solve_service, alternate):
        with pytest.raises(UsageError, match="random"):
            solve_service.reduce(alternate, "streett-parity")

    def test_unknown_pipeline(self, solve_service, alternate):
        with pytest.raises(UsageError, match="unknown pipeline"):
            solve_service.reduce(alternate, "rabin")

    def test_map_lines(self, solve_service, alternate):
        stage = solve_service.reduce(alternate, "sas-mdp")[0]
        lines = SolveService.format_map(stage).splitlines()
        assert len(lines) == stage.game.n
        assert lines[0] == "0 <- 0"
        assert lines[4] == "4 <- 0 ~"
        assert lines[12] == "12 <- 0 #2"
        assert lines[-1] == "16 <- - bot"
