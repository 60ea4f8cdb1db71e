"""Main application file.

This file initializes the FastAPI application, includes the planning API
router, and defines the root and health check endpoints.
"""

import logging

from dotenv import load_dotenv
from fastapi import FastAPI

from api.routes import router as api_router
from config.settings import settings
from utils.utils import configure_logging

load_dotenv()

configure_logging(settings.log_level)
logger = logging.getLogger(__name__)

app = FastAPI(
    title="ighastar",
    description="Anytime motion planning with adaptive-resolution dominance",
)

app.include_router(api_router, prefix="/api")


@app.get("/")
async def read_root():
    """Points clients at the API.

    Returns:
        The available endpoints.
    """
    return {"endpoints": ["/health", "/api/plan", "/api/render", "/api/rules"]}


@app.get("/health")
async def health_check():
    """Health check endpoint.

    Returns:
        A dictionary with the status of the application.
    """
    return {"status": "healthy", "message": "Planner service is running"}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "main:app",
        host="0.0.0.0",
        port=8000,
        reload=True,
        log_level="info"
    )
