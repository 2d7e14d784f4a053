"""Exception hierarchy shared by the library and the CLI."""


class QvdpError(Exception):
    """Base class for all package errors."""


class ConfigError(QvdpError):
    """Invalid or unparseable run configuration.

    ``key`` names the offending configuration entry.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ResourceError(QvdpError):
    """Requested problem size exceeds the configured budget."""


class SolverError(QvdpError):
    """A numerical solve or integration failed."""


class InstabilityError(QvdpError):
    """The linearized model is unstable (damping rate not positive)."""


class DomainError(QvdpError):
    """A closed form was evaluated outside its domain of validity."""
