from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file
load_dotenv()

# Base directory
BASE_DIR = Path(__file__).resolve().parent


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="QTHERMO_", extra="ignore")

    # Application
    APP_NAME: str = "qthermo"
    DEBUG: bool = False
    LOG_LEVEL: str = "WARNING"
    LOG_FILE: Optional[str] = None

    # Output
    OUTPUT_DIR: Path = BASE_DIR / "output"
    DEFAULT_SEED: int = 20210812
    SHOW_PROGRESS: bool = True

    # Numerical tolerances
    STATE_TOLERANCE: float = 1e-10
    HERMITICITY_TOLERANCE: float = 1e-10
    EIGENVALUE_FLOOR: float = 1e-12
    PROBABILITY_FLOOR: float = 1e-15
    THEOREM_TOLERANCE: float = 1e-9
    IDENTITY_TOLERANCE: float = 1e-10


settings = Settings()
