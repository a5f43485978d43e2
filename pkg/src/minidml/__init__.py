"""minidml: a small declarative machine-learning system.

An R-like script language interpreted over a dense/CSR matrix runtime, an
im2col convolution library, a layer and optimizer library, a translator from
JSON model descriptions to scripts, and a memory-driven execution planner.
"""

from .config import DEFAULT_SEED, Config, load_config
from .errors import (BoundsError, CapacityError, DSLRuntimeError, DSLSyntaxError, ImportResolutionError,
                     MiniDMLError, ModelValidationError, OptimizerStateError, ShapeError, SingularMatrixError,
                     WeightsError)
from .matrix import Matrix, TensorShape

__version__ = "0.1.0"

__all__ = ["DEFAULT_SEED", "Config", "load_config", "Matrix", "TensorShape", "MiniDMLError", "ShapeError",
           "BoundsError", "SingularMatrixError", "DSLSyntaxError", "DSLRuntimeError", "ImportResolutionError",
           "ModelValidationError", "WeightsError", "CapacityError", "OptimizerStateError", "__version__"]
