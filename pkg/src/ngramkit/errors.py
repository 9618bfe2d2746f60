"""Exception types raised across the package."""


class NgramKitError(Exception):
    """Base class for all package errors."""


class EncodingError(NgramKitError, ValueError):
    """Input cannot be encoded (non-monotone, out of universe, bad blob)."""


class ConstructionError(NgramKitError, ValueError):
    """Key set rejected by a hash construction (duplicates, empty)."""


class SeedFailureError(NgramKitError, RuntimeError):
    """Hash construction did not succeed within the retry budget."""


class BuildError(NgramKitError, ValueError):
    """Index build input is malformed."""


class CorruptionError(NgramKitError, RuntimeError):
    """A block stream violates its declared format or ordering."""


class DegenerateStatisticsError(NgramKitError, ValueError):
    """Smoothing statistics cannot produce valid discounts."""

    def __init__(self, n: int, k: int, detail: str):
        super().__init__(f"degenerate statistics at order {n}, k={k}: {detail}")
        self.n = n
        self.k = k
