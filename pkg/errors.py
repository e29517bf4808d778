"""Root exception for the leafspace engine."""


class LeafspaceError(Exception):
    """Base class for every error the engine reports as status=error."""
