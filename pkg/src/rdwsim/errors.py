"""Exception types shared across the package."""


class RdwError(Exception):
    """Base class for all rdwsim errors."""


class InvalidEnvironment(RdwError):
    """Environment geometry failed validation (degenerate or malformed polygons)."""


class PoseOutsideFreeSpace(RdwError):
    """A query pose or point lies outside the clearance-eroded free space."""


class ChordTooLong(RdwError):
    """Arc endpoints are farther apart than the diameter of the requested circle."""


class OutOfDomain(RdwError):
    """Requested displacement lies outside the solvable range of the radius equation."""


class EmptyFreeSpace(RdwError):
    """No grid cell center of the environment lies in free space."""


class StaleCache(RdwError):
    """A cache file does not match the current environment or parameters."""


class ZeroGradient(RdwError):
    """The repulsive wall gradient vanishes (perfectly symmetric point)."""


class NumericalDivergence(RdwError):
    """A simulated coordinate became non-finite."""


class SimulationStuck(RdwError):
    """Repeated resets within one step made no progress; the trial cannot continue."""
