import logging
import os
import sys

import uvicorn
from dotenv import load_dotenv

# Check Python version
if sys.version_info < (3, 12):
    print("Error: the sas-parity solver API requires Python 3.12 or higher")
    sys.exit(1)

load_dotenv()

logger = logging.getLogger("sas-parity")


def main() -> None:
    host = os.getenv("API_HOST", "localhost")
    port = int(os.getenv("API_PORT", "8000"))
    workers = int(os.getenv("WORKERS", "1"))
    if not os.getenv("API_KEY"):
        logger.warning("API_KEY is not set; every /api request will be rejected")
    logger.info(f"Serving the sas-parity solver on {host}:{port} with {workers} worker(s)")
    uvicorn.run(
        "solver.app:app",
        host=host,
        port=port,
        reload=False,
        workers=workers,
        log_level=os.getenv("SAS_LOG_LEVEL", "INFO").lower(),
    )


if __name__ == "__main__":
    logging.basicConfig(level=os.getenv("SAS_LOG_LEVEL", "INFO").upper())
    main()
