"""
Process exit codes and the mapping from domain errors onto them.

    0  success
    1  usage or configuration error
    2  data error (missing corpus, vocab mismatch, bad checkpoint)
    3  numeric failure (degenerate norm, non-finite loss or gradient,
       failed verification property)
"""

import logging
import sys

from pydantic import ValidationError

from app.config.run_config import ConfigError
from backend.data.textdata import DataError
from backend.model.checkpoint import CheckpointError
from backend.model.grad import GradientError
from backend.model.quixer import DegenerateStateError, ModelError
from backend.quantum.circuits import CircuitError
from backend.quantum.lcu import LcuError
from backend.quantum.qsvt import PolynomialError
from backend.quantum.qstate import QuantumStateError
from backend.resources.estimator import ResourceError
from backend.training.optimizer import TrainingError
from backend.verification.suites import VerificationError


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

# First match wins, so subclasses precede their bases.
_ERROR_CODES = (
    (ConfigError, EXIT_USAGE),
    (ValidationError, EXIT_USAGE),
    (ResourceError, EXIT_USAGE),
    (DataError, EXIT_DATA),
    (CheckpointError, EXIT_DATA),
    (DegenerateStateError, EXIT_NUMERIC),
    (GradientError, EXIT_NUMERIC),
    (TrainingError, EXIT_NUMERIC),
    (QuantumStateError, EXIT_NUMERIC),
    (CircuitError, EXIT_NUMERIC),
    (LcuError, EXIT_NUMERIC),
    (PolynomialError, EXIT_NUMERIC),
    (VerificationError, EXIT_NUMERIC),
    (ModelError, EXIT_USAGE),
)


def exit_code_for(error: BaseException) -> int:
    """Exit code of a domain error; unknown errors are re-raised by the caller."""
    for kind, code in _ERROR_CODES:
        if isinstance(error, kind):
            return code
    raise error


def report_failure(command: str, error: BaseException) -> int:
    """Print the error on stderr and return its exit code."""
    code = exit_code_for(error)
    logger.debug(f"[CLI] {command} failed", exc_info=error)
    print(f"error: {command}: {error}", file=sys.stderr)
    return code
