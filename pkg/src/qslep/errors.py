"""Exception types shared across the package."""


class RegisterBudgetError(ValueError):
    """A simulation would need more qubits (or a larger dense operator) than allowed."""


class PromiseError(ValueError):
    """An instance violates a promise its problem statement relies on.

    Examples: beta below the max-norm of a sparse matrix, a spectrum that
    enters the (-1/kappa, 1/kappa) gap, or a non-Hermitian input.
    """
