"""Exception types shared across the toolkit.

Invalid arguments raise plain ValueError; these classes cover the two
failure modes that need their own exit codes in the CLI.
"""


class ResourceLimitError(RuntimeError):
    """Requested allocation exceeds a configured resource cap."""


class InternalConsistencyError(RuntimeError):
    """A computed quantity violated an internal invariant (not a user error)."""
