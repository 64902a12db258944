from .chain_service import ChainService
from .conjunction_service import ConjunctionService
from .game_service import GameService
from .oracle_service import OracleService
from .parity_service import ParityService
from .ranking_service import RankingService
from .sas_game_service import SasGameService
from .sas_mdp_service import SasMdpService
from .sls_service import SlsService
from .solve_service import SolveService
from .strategy_service import StrategyService

__all__ = [
    'ChainService',
    'ConjunctionService',
    'GameService',
    'OracleService',
    'ParityService',
    'RankingService',
    'SasGameService',
    'SasMdpService',
    'SlsService',
    'SolveService',
    'StrategyService',
]
