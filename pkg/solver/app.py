from fastapi import FastAPI, HTTPException, Depends, status, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.security import APIKeyHeader
from . import __version__
from .errors import CapExceededError, GameParseError, GameValidationError, SolverError, UsageError, VerificationError
from .services.game_service import GameService, parse_fraction
from .services.oracle_service import OracleService
from .services.solve_service import SolveService
from .models import (
    SolveRequest,
    SolveResponse,
    VerifyRequest,
    VerifyResponse,
    ErrorResponse,
    HealthResponse
)
import os
import time
from dotenv import load_dotenv
import logging
from typing import Annotated

load_dotenv()

VERSION = __version__

# Setup logging
logging.basicConfig(
    level=os.getenv("SAS_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

app = FastAPI(
    title="SAS Parity Solver API",
    description="API for sure and almost-sure parity objectives on MDPs and stochastic games",
    version=VERSION
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# API Key authentication
api_key_header = APIKeyHeader(name="X-API-Key")

async def get_api_key(api_key: Annotated[str, Depends(api_key_header)]):
    expected = os.getenv("API_KEY")
    if not expected or api_key != expected:
        raise HTTPException(
            status_code=status.HTTP_401_UNAUTHORIZED,
            detail="Invalid API key"
        )
    return api_key

game_service = GameService()
oracle_service = OracleService()
solve_service = SolveService()

startup_time = time.time()

ERROR_STATUS = (
    (GameParseError, status.HTTP_422_UNPROCESSABLE_ENTITY),
    (GameValidationError, status.HTTP_422_UNPROCESSABLE_ENTITY),
    (CapExceededError, status.HTTP_413_REQUEST_ENTITY_TOO_LARGE),
    (VerificationError, status.HTTP_500_INTERNAL_SERVER_ERROR),
    (UsageError, status.HTTP_400_BAD_REQUEST),
)


def _http_error(e: SolverError) -> HTTPException:
    for error_type, code in ERROR_STATUS:
        if isinstance(e, error_type):
            return HTTPException(status_code=code, detail=str(e))
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))


@app.middleware("http")
async def log_requests(request: Request, call_next):
    start_time = time.time()
    status_code = 500
    try:
        response = await call_next(request)
        status_code = response.status_code
        return response
    finally:
        processing_time = time.time() - start_time
        logger.info(f"{request.method} {request.url.path} {status_code} {processing_time:.3f}s")

@app.get("/health", response_model=HealthResponse)
async def health_check():
    return HealthResponse(
        status="healthy",
        version=VERSION,
        uptime=time.time() - startup_time
    )

@app.post("/api/solve", response_model=SolveResponse, responses={400: {"model": ErrorResponse}, 413: {"model": ErrorResponse}, 422: {"model": ErrorResponse}})
def solve(request: SolveRequest, api_key: str = Depends(get_api_key)):
    try:
        game = game_service.parse_game(request.game)
        epsilon = parse_fraction(request.epsilon) if request.epsilon is not None else None
        outcome = solve_service.solve(game, request.mode, epsilon=epsilon)
        strategy = outcome.strategies.get("strategy0")
        return SolveResponse(
            mode=outcome.mode,
            region=sorted(outcome.region),
            memory=outcome.memory,
            strategy=game_service.serialize_strategy(strategy) if strategy is not None else None,
            details={"model": outcome.model, **dict(outcome.fields)}
        )
    except SolverError as e:
        logger.error(f"Error solving in mode {request.mode}: {str(e)}")
        raise _http_error(e)
    except (ValueError, ZeroDivisionError) as e:
        logger.error(f"Error solving in mode {request.mode}: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))

@app.post("/api/verify", response_model=VerifyResponse, responses={400: {"model": ErrorResponse}, 413: {"model": ErrorResponse}, 422: {"model": ErrorResponse}})
def verify(request: VerifyRequest, api_key: str = Depends(get_api_key)):
    try:
        game = game_service.parse_game(request.game)
        strategy = game_service.parse_strategy(request.strategy)
        verified = oracle_service.verify_sas_strategy(game, strategy, starts=request.starts)
        logger.info(f"Strategy {strategy.name} on {game.name}: verified={verified}")
        return VerifyResponse(verified=verified)
    except SolverError as e:
        logger.error(f"Error verifying strategy: {str(e)}")
        raise _http_error(e)
    except ValueError as e:
        logger.error(f"Error verifying strategy: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
