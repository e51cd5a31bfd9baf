import os

from pydantic import model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application settings
    APP_NAME: str = "linepeb"
    APP_VERSION: str = "0.1.0"
    APP_DESCRIPTION: str = "Position error bounds for linear mm-wave cooperative localization"

    # Environment settings
    ENVIRONMENT: str = "production"
    DEBUG: bool | None = None  # derived from ENVIRONMENT unless set

    # Logging settings
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_DIR: str = os.getenv("LOG_DIR", "logs")

    # Output settings
    RESULTS_DIR: str = "results"
    MANIFEST_SCHEMA_VERSION: int = 1

    # Solver settings
    CONDITION_THRESHOLD: float = 1e-13  # reciprocal condition estimate
    SINGULAR_PIVOT_TOL: float = 1e-12  # relative to the largest diagonal block
    MAX_G_LIMIT: int = 1 << 16

    # Numeric oracle settings
    ORACLE_QUADRATURE_NODES: int = 32  # Gauss-Legendre nodes per band segment
    ORACLE_CONVERGENCE_TOL: float = 1e-8
    ORACLE_FD_STEP_WAVELENGTHS: float = 1e-6

    # Celery settings
    CELERY_BROKER_URL: str = "memory://"
    CELERY_RESULT_BACKEND: str = "cache+memory://"
    CELERY_TASK_ALWAYS_EAGER: bool = True
    WORKER_CONCURRENCY: int = 2

    # Monitoring settings
    METRICS_TEXTFILE: str | None = None

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
    )

    @model_validator(mode="after")
    def derive_debug(self):
        if self.DEBUG is None:
            self.DEBUG = self.ENVIRONMENT == "development"
        return self


# Create settings instance
settings = Settings()

# Log settings in debug mode
if settings.DEBUG:
    import json
    import logging

    _logger = logging.getLogger("config")
    _logger.setLevel(logging.DEBUG)
    if not _logger.handlers:
        _handler = logging.StreamHandler()
        _handler.setFormatter(logging.Formatter("%(levelname)s | %(name)s - %(message)s"))
        _logger.addHandler(_handler)

    config_dict = {k: v for k, v in settings.model_dump().items() if not k.startswith("_")}
    # Broker URLs may embed credentials
    for key in ["CELERY_BROKER_URL", "CELERY_RESULT_BACKEND"]:
        if config_dict.get(key) and "@" in config_dict[key]:
            config_dict[key] = "********"
    _logger.debug(f"{settings.APP_NAME} Configuration: {json.dumps(config_dict, indent=2)}")
