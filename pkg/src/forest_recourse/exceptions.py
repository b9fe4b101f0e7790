"""Exception hierarchy shared by the library and the CLI."""


class RecourseError(Exception):
    """Base class for all errors raised by forest_recourse."""


class SchemaError(RecourseError, ValueError):
    """Input does not conform to the feature schema (wrong width, bad header)."""


class DomainError(RecourseError, ValueError):
    """A feature value lies outside its declared domain."""


class DegenerateTrainingSet(RecourseError, ValueError):
    def __init__(self, msg="degenerate training set: need both classes"):
        super().__init__(msg)


class ConfigError(RecourseError, ValueError):
    pass


class ForestFormatError(RecourseError, ValueError):
    """Malformed forest document. ``path`` names the offending node."""

    def __init__(self, msg, path="$"):
        super().__init__(f"{path}: {msg}")
        self.path = path


class NoSolution(RecourseError):
    """No expert rectangle is reachable with a single-feature change."""


class AlreadyExpert(RecourseError, ValueError):
    """Feedback was requested for an instance the forest already calls expert."""

    def __init__(self, f_before):
        super().__init__(f"instance already classified expert (F = {f_before:.4f})")
        self.f_before = f_before


class MetricError(RecourseError, ValueError):
    pass
