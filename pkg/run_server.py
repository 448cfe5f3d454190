"""
Launch the simulator's HTTP service from a source checkout.

Host, port, log level and auto-reload come from the process settings
(``HOST``, ``PORT``, ``LOG_LEVEL``, ``DEBUG``), so the same ``.env`` drives
this script and ``tica-sim serve``.
"""
import sys
from pathlib import Path

import uvicorn

sys.path.insert(0, str(Path(__file__).resolve().parent / "src"))

from tica_sim.config import logger, settings  # noqa: E402

if __name__ == "__main__":
    logger.info(f"Serving {settings.APP_NAME} {settings.APP_VERSION} on {settings.HOST}:{settings.PORT}")
    uvicorn.run(
        "tica_sim.server:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG,
        reload_dirs=["src"] if settings.DEBUG else None,
        log_level=settings.LOG_LEVEL.lower(),
    )
