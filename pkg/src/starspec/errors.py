"""Exception types shared across the library.

Every error raised by the numerical pipeline derives from :class:`StarSpecError`.
When an error escapes from inside the inversion pipeline, the orchestrator tags
it with the pipeline stage index via the ``step`` attribute before re-raising.
"""

from __future__ import annotations


class StarSpecError(Exception):
    """Base class for all library errors."""

    #: Inversion pipeline stage (1..6) the error was raised from, when known.
    step: int | None = None


class StepFailure(StarSpecError):
    """Edge propagation produced non-finite values (grid too coarse / lambda too negative)."""

    def __init__(self, message: str, indices: list[int] | None = None):
        super().__init__(message)
        self.indices = indices or []


class NumberingAmbiguity(StarSpecError):
    """A computed eigenvalue could not be matched to a unique asymptotic slot."""


class AssumptionThreeViolation(StarSpecError):
    """S_j(pi, lambda_nk) is numerically zero on two or more known edges.

    Such an eigenvalue carries no information about the unknown potential and
    cannot be used as interpolation data.
    """

    def __init__(self, j: int, n: int, k: int, lam: float):
        super().__init__(
            f"assumption (iii) violated: S_{j}(pi, lambda) = 0 at lambda_{{{n},{k}}} = {lam:.12g}; "
            "this eigenvalue carries no information about the unknown edge"
        )
        self.j = j
        self.n = n
        self.k = k
        self.lam = lam


class MissingEigenvalue(StarSpecError):
    """The eigenvalue table does not cover the index range needed by the moment system."""


class NotABasis(StarSpecError):
    """The moment vectors are numerically degenerate (e.g. duplicated eigenvalues).

    Carries the Gram extremes when they were computed before the failure.
    """

    def __init__(self, message: str, min_eig: float | None = None, max_eig: float | None = None):
        super().__init__(message)
        self.min_eig = min_eig
        self.max_eig = max_eig


class IllConditioned(StarSpecError):
    """Least-squares solve left a residual far above the expected noise floor."""


class OmegaMismatch(StarSpecError):
    """Integral of K disagrees with omega beyond repairable tolerance (corrupted Cauchy data)."""


class InterlacingViolation(StarSpecError):
    """Extracted Dirichlet / Dirichlet-Neumann spectra fail to interlace."""


class NoConvergence(StarSpecError):
    """Iterative potential fit exhausted its budget without meeting tolerances."""
