"""Configuration module for svd-rnd.

Loads configuration from environment variables with smart defaults.
Supports variable interpolation in .env files.
"""

import os
from pathlib import Path

import psutil
from dotenv import load_dotenv

# Load environment variables with interpolation support
# This allows using ${VAR} syntax in .env files
load_dotenv(override=False, interpolate=True)


def _expanduser(path_str: str) -> Path:
    """Expand ~ and environment variables in path string."""
    return Path(os.path.expandvars(path_str)).expanduser()


def _default_threads() -> int:
    """Physical core count, falling back to logical cores, then 1."""
    return psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1


# =============================================================================
# Output
# =============================================================================

# When set, relative output paths are re-rooted under this directory
_output_dir_env = os.getenv("SVD_RND_OUTPUT_DIR")
OUTPUT_DIR = _expanduser(_output_dir_env) if _output_dir_env else None

# =============================================================================
# Logging
# =============================================================================

LOG_LEVEL = os.getenv("SVD_RND_LOG_LEVEL", "INFO").upper()

# =============================================================================
# Compute
# =============================================================================

NUM_THREADS = int(os.getenv("SVD_RND_NUM_THREADS", str(_default_threads())))

# Training mini-batch size when an experiment does not set one
BATCH_SIZE = int(os.getenv("SVD_RND_BATCH_SIZE", "128"))

# Inference batch size for scoring and feature extraction
SCORE_BATCH_SIZE = int(os.getenv("SVD_RND_SCORE_BATCH_SIZE", "256"))

# =============================================================================
# Evaluation
# =============================================================================

# Validation OOD data is the head of each test OOD set
VALIDATION_LIMIT = int(os.getenv("SVD_RND_VALIDATION_LIMIT", "1000"))


# =============================================================================
# Validation and Initialization
# =============================================================================


def resolve_output_path(path: str | Path) -> Path:
    """Re-root a relative output path under OUTPUT_DIR when it is configured."""
    path = _expanduser(str(path))
    if OUTPUT_DIR is not None and not path.is_absolute():
        return OUTPUT_DIR / path
    return path


def ensure_directories():
    """Create necessary directories if they don't exist."""
    if OUTPUT_DIR is not None:
        OUTPUT_DIR.mkdir(parents=True, exist_ok=True)


def validate_config():
    """Validate configuration and warn about potential issues."""
    issues = []

    if NUM_THREADS < 1:
        issues.append(f"SVD_RND_NUM_THREADS must be positive, got {NUM_THREADS}")

    if BATCH_SIZE < 1:
        issues.append(f"SVD_RND_BATCH_SIZE must be positive, got {BATCH_SIZE}")

    if SCORE_BATCH_SIZE < 1:
        issues.append(f"SVD_RND_SCORE_BATCH_SIZE must be positive, got {SCORE_BATCH_SIZE}")

    if LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        issues.append(f"Unknown SVD_RND_LOG_LEVEL: {LOG_LEVEL}")

    if OUTPUT_DIR is not None and OUTPUT_DIR.exists() and not OUTPUT_DIR.is_dir():
        issues.append(f"SVD_RND_OUTPUT_DIR exists but is not a directory: {OUTPUT_DIR}")

    return issues


# =============================================================================
# Helper Functions
# =============================================================================


def get_config_summary() -> str:
    """Get a human-readable summary of current configuration."""
    return f"""
svd-rnd Configuration
=====================

Output:
  Output Dir Override: {OUTPUT_DIR if OUTPUT_DIR is not None else '✗ Not set'}

Logging:
  Level:               {LOG_LEVEL}

Compute:
  Threads:             {NUM_THREADS}
  Train Batch Size:    {BATCH_SIZE}
  Score Batch Size:    {SCORE_BATCH_SIZE}

Evaluation:
  Validation Limit:    {VALIDATION_LIMIT} images
"""


if __name__ == "__main__":
    # When run as a script, display configuration
    print(get_config_summary())

    # Validate and show any issues
    issues = validate_config()
    if issues:
        print("\nConfiguration Issues:")
        print("=" * 50)
        for issue in issues:
            print(f"⚠️  {issue}\n")
    else:
        print("\n✅ Configuration looks good!")
