"""The configuration for environment variable loading."""

import os
from typing import Literal

import dotenv
import pydantic
import pydantic_settings

env = os.getenv("ENVIRONMENT", "dev")

if env == "dev":
    dotenv.load_dotenv()

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class Settings(pydantic_settings.BaseSettings):
    """The process-wide settings read from ISAC_SPU_* environment variables."""

    model_config = pydantic_settings.SettingsConfigDict(env_prefix="ISAC_SPU_")

    threads: int = pydantic.Field(default=1, ge=1)
    log_level: LogLevel = "INFO"

    @pydantic.field_validator("log_level", mode="before")
    @classmethod
    def _upper(cls, value):
        return value.upper() if isinstance(value, str) else value


settings = Settings()
