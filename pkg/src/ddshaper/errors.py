"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input parameters.

    ``key`` names the offending parameter when one can be identified; the CLI
    uses it to point at the config entry that needs fixing.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
