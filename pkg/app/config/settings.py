"""
Configuration module with fail-fast validation.

This module loads environment variables using python-dotenv and validates
the process-level settings (logging, worker threads, output location, dense
oracle limit). Per-run knobs (model shape, training hyperparameters, data
paths) live in RunConfig documents, see app.config.run_config.

The CLI exits immediately if the environment holds an invalid value.
"""

import sys
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator
from dotenv import load_dotenv


# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """
    Process settings with strict validation.

    Every field can be set through a QUIXER_-prefixed environment variable
    (QUIXER_LOG_LEVEL, QUIXER_THREADS, ...). Defaults are safe for a laptop
    run; the CLI fails fast on invalid values.
    """

    model_config = SettingsConfigDict(
        env_prefix="QUIXER_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    app_name: str = Field(default="Quixer")
    debug: bool = Field(default=False)

    # Logging
    log_level: str = Field(default="INFO")

    # Worker parallelism (1 guarantees bitwise determinism)
    threads: int = Field(default=1)

    # Where train/eval write their artifacts unless a RunConfig overrides it
    output_dir: str = Field(default="runs/latest")

    # Largest register realised as a dense matrix by the verification oracles
    dense_qubit_limit: int = Field(default=12)

    # eval warns when more of a corpus than this maps to <unk>
    unk_warn_rate: float = Field(default=0.2)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        """Ensure log level is one the logging module understands."""
        allowed_levels = ["DEBUG", "INFO", "WARNING", "ERROR"]
        if v.upper() not in allowed_levels:
            raise ValueError(f"QUIXER_LOG_LEVEL must be one of {allowed_levels}")
        return v.upper()

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v):
        """Ensure at least one worker."""
        if v < 1:
            raise ValueError("QUIXER_THREADS must be >= 1")
        return v

    @field_validator("output_dir")
    @classmethod
    def validate_output_dir(cls, v):
        """Ensure output directory is not empty."""
        if not v or v.strip() == "":
            raise ValueError("QUIXER_OUTPUT_DIR cannot be empty")
        return v

    @field_validator("dense_qubit_limit")
    @classmethod
    def validate_dense_qubit_limit(cls, v):
        """Dense oracles are capped at 12 qubits (4096 x 4096 complex)."""
        if not 1 <= v <= 12:
            raise ValueError("QUIXER_DENSE_QUBIT_LIMIT must be in [1, 12]")
        return v

    @field_validator("unk_warn_rate")
    @classmethod
    def validate_unk_warn_rate(cls, v):
        """A share of tokens, so within [0, 1]."""
        if not 0.0 <= v <= 1.0:
            raise ValueError("QUIXER_UNK_WARN_RATE must be in [0, 1]")
        return v


def get_settings() -> Settings:
    """
    Get process settings with fail-fast validation.

    Returns:
        Settings: Validated settings

    Raises:
        SystemExit: If any environment value is invalid
    """
    try:
        settings = Settings()
        return settings
    except Exception as e:
        print(f"FATAL: Configuration error - {e}", file=sys.stderr)
        print("Please check the QUIXER_* environment variables.", file=sys.stderr)
        sys.exit(1)


# Global settings instance
settings = get_settings()


def is_config_valid() -> bool:
    """
    Check if the environment configuration is valid.

    Returns:
        bool: True if every QUIXER_* value validates
    """
    try:
        Settings()
        return True
    except Exception:
        return False
