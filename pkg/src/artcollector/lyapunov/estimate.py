from __future__ import annotations

from dataclasses import dataclass, field

METHODS = ("direct", "boundary", "cf", "cf-v", "ratio", "transfer", "gig")


@dataclass
class LyapEstimate:
    """A value of nu (nats per period) with its error certificate.

    ``stderr`` is a Monte Carlo standard error; ``bound`` an analytic bound
    on the deterministic (bias/truncation) error.  Either may be absent.
    """

    value: float
    method: str
    iterations: int
    stderr: float | None = None
    bound: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bound is not None and self.bound < 0:
            raise ValueError("analytic certificate must be nonnegative")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")

    @property
    def cert_type(self) -> str:
        if self.stderr is not None and self.bound is not None:
            return "mixed"
        if self.stderr is not None:
            return "stderr"
        if self.bound is not None:
            return "analytic"
        return "none"

    @property
    def cert_value(self) -> float:
        """stderr, analytic bound, or bound + 3*stderr for mixed certificates."""
        return {
            "mixed": lambda: self.bound + 3 * self.stderr,
            "stderr": lambda: self.stderr,
            "analytic": lambda: self.bound,
            "none": lambda: 0.0,
        }[self.cert_type]()

    def error(self, k: float = 3.0) -> float:
        """Half-width: analytic bound plus k standard errors."""
        return (self.bound or 0.0) + k * (self.stderr or 0.0)


def consistent(a: LyapEstimate, b: LyapEstimate, k: float = 3.0) -> bool:
    """Whether two estimates agree within their combined certificates."""
    se = ((a.stderr or 0.0) ** 2 + (b.stderr or 0.0) ** 2) ** 0.5
    return abs(a.value - b.value) <= k * se + (a.bound or 0.0) + (b.bound or 0.0)
