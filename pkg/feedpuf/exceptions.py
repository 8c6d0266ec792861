class FeedpufError(ValueError):
    """Base class for toolkit failures."""

    exit_code = 1


class ConfigurationError(FeedpufError):
    """Invalid dimensions, seeds, wiring or fault sites."""

    exit_code = 3


class InfeasibleError(ConfigurationError):
    """A request the configured challenge space cannot satisfy."""


class UsageError(FeedpufError):
    """Arguments that disagree with each other (widths, split sizes, ...)."""

    exit_code = 2
