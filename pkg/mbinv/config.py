from pydantic_settings import BaseSettings
from functools import lru_cache
from typing import List

class Settings(BaseSettings):
    #app settings
    APP_NAME: str = "mbinv"
    ENV: str = "development"
    LOG_LEVEL: str = "WARNING"

    #numerical tolerances
    PIVOT_TOL: float = 1e-12
    STRUCTURE_TOL: float = 1e-9
    SYMMETRY_TOL: float = 1e-9
    RANK_TOL: float = 1e-10
    RESIDUAL_BOUND: float = 1e-9

    #randomness
    DEFAULT_SEED: int = 20240601

    #memory table defaults
    TABLE1_N: List[int] = [5, 10, 50, 100, 500, 1000]
    TABLE1_M: List[int] = [1, 2, 3, 4, 5]

    class Config:
        env_file = ".env"
        case_sensitive = True

@lru_cache
def get_settings() -> Settings:
    return Settings()
