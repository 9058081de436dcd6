"""Exception hierarchy shared by every layer of the package."""


class DelayLabError(Exception):
    pass


class InvalidArgumentError(DelayLabError, ValueError):
    pass


class NotFoundError(DelayLabError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NumericalError(DelayLabError):
    """Problem/mesh combinations that cannot be simulated as requested."""


class AlignmentError(NumericalError, ValueError):
    """A delay, lag or evaluation time does not fall on the mesh."""


class EllipticityError(NumericalError, ValueError):
    """The diffusion coefficient has no positive lower bound."""


class CapabilityError(DelayLabError, TypeError):
    """A coefficient field lacks the partial derivatives an operation needs."""
