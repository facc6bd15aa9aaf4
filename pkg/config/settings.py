"""
Runtime settings for the simulation framework using Pydantic.
Loads environment variables (prefix ``FEDNIA_``) and provides type-safe access.
"""
from pathlib import Path
from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables or ``.env``."""

    model_config = SettingsConfigDict(
        env_prefix="FEDNIA_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_ignore_empty=True,
        case_sensitive=False,
        extra="ignore"
    )

    # Execution
    threads: int = Field(default=1, ge=1, description="Worker threads for client training and probing")
    eval_chunk_size: int = Field(default=2048, ge=1, description="Rows per forward pass during evaluation")
    run_root: str = Field(default="runs", description="Default parent directory for run directories")

    # Logging
    log_dir: str = Field(default="logs", description="Logs directory")
    log_to_file: bool = Field(default=True, description="Mirror log output to files under log_dir")
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO", description="Logging level"
    )

    # Acceptance / performance suites
    mnist_dir: Optional[str] = Field(
        default=None, description="Directory holding MNIST-format IDX files for acceptance runs"
    )
    run_performance_tests: bool = Field(default=False, description="Run runtime-scaling checks")

    @property
    def project_root(self) -> Path:
        """Return the project root directory."""
        return Path(__file__).parent.parent

    @property
    def logs_path(self) -> Path:
        """Return the logs directory path."""
        return self.project_root / self.log_dir

    @property
    def runs_path(self) -> Path:
        """Return the default run root path."""
        return Path(self.run_root)

    def mnist_files(self) -> Optional[dict[str, Path]]:
        """
        Resolve the standard MNIST file names inside ``mnist_dir``.

        Returns:
            Mapping of train/test image/label paths, or None when unset or incomplete
        """
        if not self.mnist_dir:
            return None
        root = Path(self.mnist_dir)
        names = {
            "train_images": "train-images-idx3-ubyte",
            "train_labels": "train-labels-idx1-ubyte",
            "test_images": "t10k-images-idx3-ubyte",
            "test_labels": "t10k-labels-idx1-ubyte",
        }
        resolved: dict[str, Path] = {}
        for key, name in names.items():
            for candidate in (root / name, root / f"{name}.gz"):
                if candidate.exists():
                    resolved[key] = candidate
                    break
            else:
                return None
        return resolved


# Global settings instance
settings = Settings()
