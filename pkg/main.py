from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
import uvicorn
import logging

from models import OracleRequest, RunConfig, RunReport
from orchestrator import chirp_oracle, handle_run
from utils.config import configure_logging, get_settings
from utils.errors import GaborFlowError, InputValidationError

configure_logging()
logger = logging.getLogger(__name__)

VERSION = "1.0.0"

# Initialize FastAPI app
app = FastAPI(
    title="GaborFlow API",
    description="Gabor transforms on the finite Heisenberg group, reassignment, diffusion and tag-image deformation",
    version=VERSION,
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _http_error(e: GaborFlowError) -> HTTPException:
    status = 422 if isinstance(e, InputValidationError) else 500
    return HTTPException(status_code=status, detail=e.to_dict())


@app.post("/run", response_model=RunReport)
def run_endpoint(config: RunConfig):
    """
    Run one pipeline. Paths in the config are resolved on the server.
    Input problems map to 422, runtime failures to 500.
    """
    try:
        return handle_run(config)
    except GaborFlowError as e:
        logger.error(f"/run {config.command} failed: {e}")
        raise _http_error(e)
    except ValueError as e:
        logger.error(f"/run {config.command} rejected: {e}")
        raise HTTPException(status_code=422, detail=str(e))


@app.post("/chirp-oracle")
def chirp_oracle_endpoint(request: OracleRequest):
    try:
        return chirp_oracle(request.chirp, request.a, request.t, request.c)
    except GaborFlowError as e:
        logger.error(f"/chirp-oracle failed: {e}")
        raise _http_error(e)


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {
        "status": "ok",
        "threads": get_settings().threads,
        "version": VERSION,
    }


if __name__ == "__main__":
    settings = get_settings()
    uvicorn.run("main:app", host=settings.host, port=settings.port)
