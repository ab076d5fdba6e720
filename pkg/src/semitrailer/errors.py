"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter set or configuration violates its invariants."""


class DomainError(ValueError):
    """An operation was evaluated outside its mathematical domain."""


class SingularArticulationError(DomainError):
    """Articulation angle reached +-90 deg; the coupling force cannot be eliminated."""


class IntegrationError(RuntimeError):
    """A simulation aborted; carries the failure time and the last finite state."""

    def __init__(self, message: str, t: float, state=None):
        super().__init__(f"{message} (t={t:.6g} s)")
        self.t = t
        self.state = state


class DatasetError(ValueError):
    """A measurement file or dataset does not satisfy the dataset contract."""
