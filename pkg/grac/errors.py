from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence


class GracError(Exception):
    """Base class for every error raised by grac."""


class ConfigError(GracError, ValueError):
    """Experiment configuration could not be read or validated."""


class OutOfWindow(GracError, ValueError):
    def __init__(self, site: Any, box: Any, what: str = "stencil"):
        self.site = site
        self.box = box
        super().__init__(f"{what} at {site} leaves the window {box}")


class NoSuchEdge(GracError, ValueError):
    pass


class SymmetryViolation(GracError, ValueError):
    pass


class DegenerateBond(GracError, ArithmeticError):
    pass


class FormMismatch(GracError):
    def __init__(self, element_form: float, site_form: float):
        self.element_form = element_form
        self.site_form = site_form
        super().__init__(
            f"element form {element_form!r} and site form {site_form!r} of E_c disagree"
        )


class SolverFailure(GracError):
    def __init__(self, message: str, info: Optional[int] = None, residual: Optional[float] = None):
        self.info = info
        self.residual = residual
        super().__init__(message)


class TooCloseToBoundary(GracError, ValueError):
    def __init__(self, sites: Sequence[Any], margin: int):
        self.sites = list(sites)
        self.margin = margin
        preview = ", ".join(str(s) for s in self.sites[:5])
        super().__init__(
            f"{len(self.sites)} atomistic site(s) closer than {margin} hops to the window "
            f"boundary: {preview}"
        )


class InadmissiblePartition(GracError, ValueError):
    def __init__(self, violations: Dict[Any, str]):
        self.violations = dict(violations)
        preview = "; ".join(f"{s}: {why}" for s, why in list(self.violations.items())[:5])
        super().__init__(f"interface violates the admissibility assumption ({preview})")


class NotPlanar(GracError, ValueError):
    pass


class Infeasible(GracError):
    def __init__(self, rows: List[Any], residual: float):
        self.rows = list(rows)
        self.residual = residual
        super().__init__(
            f"patch constraint system is infeasible (residual {residual:.3e}, "
            f"{len(self.rows)} offending row(s))"
        )


class NoCorrector(GracError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"no Crouzeix-Raviart corrector found (residual {residual:.3e})")


class CorrectorMismatch(GracError):
    def __init__(self, mismatch: float):
        self.mismatch = mismatch
        super().__init__(f"corrector identity fails by {mismatch:.3e}")
