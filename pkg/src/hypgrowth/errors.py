"""Exception hierarchy.

Every error raised for a violated invariant derives from
:class:`InvariantError`; the CLI maps those to exit code 3 and reports
the class name.
"""


class InvariantError(Exception):
    """Base class for violated module invariants."""

    module = "hypgrowth"

    def __init__(self, msg="", **details):
        super().__init__(msg)
        self.details = details

    def report(self):
        return {"error": type(self).__name__, "module": self.module,
                "message": str(self), "details": _jsonable(self.details)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    try:
        return float(obj)
    except (TypeError, ValueError):
        return repr(obj)


# hyperbolic core
class DegenerateGeodesic(InvariantError):
    module = "hyperbolic_core"


# fuchsian group
class GroupError(InvariantError):
    module = "fuchsian_group"


class PairingMismatch(GroupError):
    pass


class OddCorner(GroupError):
    pass


class CycleNotClosing(GroupError):
    pass


class NotAdmissible(GroupError):
    pass


class DomainFormatError(GroupError):
    pass


# boundary map
class BoundaryMapError(InvariantError):
    module = "boundary_map"


class CarrierOrderViolation(BoundaryMapError):
    pass


class NotMarkov(BoundaryMapError):
    pass


class SlowContraction(BoundaryMapError):
    pass


class Overflow(BoundaryMapError):
    pass


class EmptyBase(BoundaryMapError):
    pass


# geodesic dynamics
class GeodesicError(InvariantError):
    module = "geodesic_dynamics"


class NoExitSide(GeodesicError):
    pass


class NotEnteringDomain(GeodesicError):
    pass


class RejectionStall(GeodesicError):
    pass


class WindowTooLong(GeodesicError):
    pass


# thermo
class ThermoError(InvariantError):
    module = "thermo"


class PowerIterationStall(ThermoError):
    pass


class AlphaOutOfRange(ThermoError):
    pass


# ldp harness
class HarnessError(InvariantError):
    module = "ldp_harness"


class ZeroHits(HarnessError):
    pass


class CalibrationFailed(HarnessError):
    pass
