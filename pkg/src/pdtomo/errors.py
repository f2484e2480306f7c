"""Exception hierarchy for pdtomo."""


class PDTomoError(Exception):
    """Base class for every error raised by this package."""


class NonSquare(PDTomoError, ValueError):
    pass


class EmptyMatrix(PDTomoError, ValueError):
    pass


class IllConditioned(PDTomoError, ArithmeticError):
    def __init__(self, kappa, kappa_max=None, what="matrix"):
        self.kappa = float(kappa)
        self.kappa_max = kappa_max
        self.what = what
        msg = f"{what} is ill-conditioned (kappa={self.kappa:.3g}"
        if kappa_max is not None:
            msg += f" > {kappa_max:.3g}"
        super().__init__(msg + ")")


class IllConditionedCorner(IllConditioned):
    def __init__(self, which, kappa, kappa_max=None):
        self.which = which
        super().__init__(kappa, kappa_max, what=f"corner {which}")


class SingularTransform(PDTomoError, ValueError):
    pass


class OddDimension(PDTomoError, ValueError):
    pass


class BadDimension(PDTomoError, ValueError):
    pass


class ConditioningFailure(PDTomoError, RuntimeError):
    pass


class IncompatibleDevices(PDTomoError, ValueError):
    pass


class RangeOutOfBounds(PDTomoError, IndexError):
    pass


class AxisCoveredTwice(PDTomoError, ValueError):
    pass


class ParseError(PDTomoError, ValueError):
    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        detail = f"{message} at position {position}"
        if text:
            detail += f"\n  {text}\n  {' ' * position}^"
        super().__init__(detail)


class InconsistentCornerSize(PDTomoError, ValueError):
    pass


class BadClass(PDTomoError, ValueError):
    pass


class InsufficientSettings(PDTomoError, IndexError):
    pass
