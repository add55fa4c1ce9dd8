class BellphaseError(Exception):
    exit_code: int = 1


class ConfigurationError(BellphaseError, ValueError):
    """A precondition that can be checked before any sampling starts"""

    exit_code = 2


class ContractViolation(BellphaseError, ArithmeticError):
    """A numerical invariant breached while a run was in progress"""

    exit_code = 3
