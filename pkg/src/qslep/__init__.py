"""Classical simulation of block-encoding algorithms for expectation values of linear-system solutions.

Modules
-------
simkern
    Dense statevector and operator kernel.
oracle
    Query-counted black boxes and function oracles.
blockenc
    Block access, sparse access and their constructions.
sparsemat
    The index map and the ``(n, d)``-matrix encoding of a function.
matfun
    Polynomial eigenvalue transformations and block access to ``A^{-1}``.
estimate
    Phase, amplitude and expectation-value estimation.
slep
    The end-to-end linear-system expectation-value solver.
reduce
    Mean estimation reduced to sparse expectation-value estimation.
cli
    Command-line experiment harness.
"""
from .blockenc import BlockAccess, SparseAccess, verify_block_encoding
from .errors import PromiseError, RegisterBudgetError
from .estimate import EstimationResult, bevhm, sevhm
from .oracle import Counter, FunctionOracle, QueryCountedUnitary
from .simkern import StateVector
from .slep import SLEPInstance, classical_solve, solve_bslep

__all__ = [
    "BlockAccess",
    "Counter",
    "EstimationResult",
    "FunctionOracle",
    "PromiseError",
    "QueryCountedUnitary",
    "RegisterBudgetError",
    "SLEPInstance",
    "SparseAccess",
    "StateVector",
    "bevhm",
    "classical_solve",
    "sevhm",
    "solve_bslep",
    "verify_block_encoding",
]
