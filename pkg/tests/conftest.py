from pathlib import Path

import pytest

from solver.models import StochasticGame
from solver.services import GameService

INSTANCES = Path(__file__).resolve().parent.parent / "instances"


@pytest.fixture(autouse=True)
def solver_env(monkeypatch):
    """Pin the caps so a local .env cannot change test outcomes."""
    monkeypatch.setenv("SAS_IAR_MAX_PAIRS", "6")
    monkeypatch.setenv("SAS_ENUM_CAP", "4096")
    monkeypatch.setenv("SAS_ORACLE_CAP", "200000")
    monkeypatch.setenv("SAS_SLS_MAX_HORIZON", "512")
    monkeypatch.setenv("SAS_SLS_MAX_MEMORY", "100000")


@pytest.fixture
def game_service() -> GameService:
    return GameService()


@pytest.fixture
def parse(game_service):
    def _parse(text: str) -> StochasticGame:
        return game_service.parse_game(text)

    return _parse


@pytest.fixture
def alternate_path() -> Path:
    return INSTANCES / "alternate.game"


@pytest.fixture
def retry_path() -> Path:
    return INSTANCES / "retry.game"


@pytest.fixture
def alternate(game_service, alternate_path) -> StochasticGame:
    return game_service.parse_game(alternate_path.read_text())


@pytest.fixture
def retry(game_service, retry_path) -> StochasticGame:
    return game_service.parse_game(retry_path.read_text())
