"""Exception hierarchy for profilest."""


class ProfilestError(Exception):
    """Base class for all library errors."""


class InvalidInputError(ProfilestError, ValueError):
    """Malformed sequence, pattern, profile or argument."""


class InvalidDistributionError(ProfilestError, ValueError):
    """Probability vector that is not a (sub-)distribution."""


class NotApplicableError(ProfilestError, ValueError):
    """Operation called on inputs outside its domain (e.g. closed form on a general profile)."""


class InfeasibleError(ProfilestError, ValueError):
    """No assignment of pattern symbols to support slots exists."""


class UnboundedSearchError(ProfilestError, ValueError):
    """Support search has no finite upper end and no explicit cap was given."""


class ResourceLimitError(ProfilestError, RuntimeError):
    """Work estimate exceeds the configured cap."""


class InternalError(ProfilestError, RuntimeError):
    """A condition the mathematics says cannot happen."""
