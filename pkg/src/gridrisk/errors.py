"""Library-wide exception types."""


class ContractViolation(ValueError):
    """An operation was invoked outside its documented contract."""


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ContractViolation(message)
