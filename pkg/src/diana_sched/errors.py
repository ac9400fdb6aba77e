"""Exception hierarchy shared by every module of the package."""


class DianaError(Exception):
    """Base class for all package errors."""


class InvalidLink(DianaError, ValueError):
    pass


class InvalidSite(DianaError, ValueError):
    pass


class UnknownRoute(DianaError, KeyError):
    def __init__(self, src, dst, component=None):
        msg = f"no route {src!r} -> {dst!r}"
        if component:
            msg = f"{component}: {msg}"
        super().__init__(msg)
        self.src = src
        self.dst = dst
        self.component = component

    def __str__(self):
        return self.args[0]


class DuplicateEnqueue(DianaError):
    pass


class UndefinedEstimate(DianaError, ZeroDivisionError):
    pass


class NoRunnableSite(DianaError):
    pass


class UnrunnableAtSite(DianaError):
    pass


class SimulationCorrupt(DianaError, RuntimeError):
    """An internal invariant was breached; the run cannot continue."""


class LogIntegrityError(DianaError, ValueError):
    def __init__(self, message, event=None):
        super().__init__(message)
        self.event = event


class ScenarioError(DianaError, ValueError):
    """Scenario validation failed; ``diagnostics`` lists every violation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(f"{len(self.diagnostics)} scenario violation(s):\n{lines}")


class ScenarioParseError(DianaError, ValueError):
    """The scenario file could not be read or parsed."""
