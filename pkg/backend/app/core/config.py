import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Load environment variables
load_dotenv()


class Settings(BaseModel):
    """Process-level settings; run-level settings live in the JSON config."""

    threads: int = Field(default=1, ge=1)
    sample_cap: int = Field(default=10_000_000, ge=1)
    budget: int = Field(default=100_000_000, ge=1)
    chunk_size: int = Field(default=65_536, ge=1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings(
        threads=int(os.getenv("WELFARE_ORDER_THREADS", "1")),
        sample_cap=int(os.getenv("WELFARE_ORDER_SAMPLE_CAP", "10000000")),
        budget=int(os.getenv("WELFARE_ORDER_BUDGET", "100000000")),
        chunk_size=int(os.getenv("WELFARE_ORDER_CHUNK_SIZE", "65536")),
    )
