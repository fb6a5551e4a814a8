class ContractError(ValueError):
    """A precondition of an operation was violated."""


class AntipodalError(ContractError):
    """The spherical midpoint of (near-)antipodal points is undefined."""


class UndefinedCorrelationError(ContractError):
    pass


class CollinearError(ContractError):
    pass


class DegenerateTriangleError(ContractError):
    pass
