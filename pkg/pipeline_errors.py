"""
Pipeline Error Types
====================

Every failure the pipeline can report has a stable `code` so the CLI can
print one machine-readable error line. Bad-input errors are ValueErrors,
service and environment failures are RuntimeErrors.
"""

from typing import Any, Dict, Optional


class PipelineError(Exception):
    """Base class for all pipeline errors"""

    code = "PipelineError"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def error_line(self) -> str:
        """Render the single machine-readable line printed by the CLI"""
        parts = [f"ERROR code={self.code}", f'message="{self.message}"']
        for key in ("file", "line"):
            if self.context.get(key) is not None:
                parts.append(f"{key}={self.context[key]}")
        return " ".join(parts)


# -----------------------------------------------------------------------------
# Geometry
# -----------------------------------------------------------------------------
class InvalidPose(PipelineError, ValueError):
    code = "InvalidPose"


class NonPositiveDepth(PipelineError, ValueError):
    code = "NonPositiveDepth"


# -----------------------------------------------------------------------------
# Ingest
# -----------------------------------------------------------------------------
class MalformedRow(PipelineError, ValueError):
    code = "MalformedRow"

    def __init__(self, message: str, line: Optional[int] = None, **context: Any):
        super().__init__(f"line {line}: {message}" if line is not None else message,
                         line=line, **context)
        self.line = line


class ArityMismatch(MalformedRow):
    code = "ArityMismatch"


class ClockMismatch(PipelineError, ValueError):
    code = "ClockMismatch"


class InsufficientOverlap(PipelineError, ValueError):
    code = "InsufficientOverlap"


# -----------------------------------------------------------------------------
# Alignment
# -----------------------------------------------------------------------------
class IndexOutOfRange(PipelineError, IndexError):
    code = "IndexOutOfRange"


class HorizonExceedsEpisode(PipelineError, ValueError):
    code = "HorizonExceedsEpisode"


class EmptySplit(PipelineError, ValueError):
    code = "EmptySplit"


class DimensionMismatch(PipelineError, ValueError):
    code = "DimensionMismatch"


class DatasetCorrupt(PipelineError, ValueError):
    code = "DatasetCorrupt"


# -----------------------------------------------------------------------------
# Kinematics / segmentation
# -----------------------------------------------------------------------------
class JointLimitViolation(PipelineError, ValueError):
    code = "JointLimitViolation"


class DegenerateBox(PipelineError, ValueError):
    code = "DegenerateBox"


class ServiceUnavailable(PipelineError, RuntimeError):
    code = "ServiceUnavailable"


# -----------------------------------------------------------------------------
# Policy / benchmark
# -----------------------------------------------------------------------------
class StatsMismatch(PipelineError, ValueError):
    code = "StatsMismatch"


class EmptyBatch(PipelineError, ValueError):
    code = "EmptyBatch"


class CheckpointMismatch(PipelineError, ValueError):
    code = "CheckpointMismatch"


class EnvFault(PipelineError, RuntimeError):
    code = "EnvFault"


# -----------------------------------------------------------------------------
# Configuration
# -----------------------------------------------------------------------------
class ConfigError(PipelineError, ValueError):
    code = "ConfigError"

    def __init__(self, message: str, file: Optional[str] = None,
                 line: Optional[int] = None):
        super().__init__(message, file=file, line=line)


def ini_key_line(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    """1-based line of `key` inside `[section]` (or of the section header)"""
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith('[') and stripped.endswith(']'):
            current = stripped[1:-1].strip()
            if key is None and current == section:
                return number
        elif key is not None and current == section and stripped.split('=')[0].strip() == key:
            return number
    return None
