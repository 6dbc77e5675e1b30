class MecSimError(Exception):
    """Base class for every simulator error"""


class ScenarioError(MecSimError):
    """Scenario values violate the physical invariants"""


class InfeasibleAllocationError(MecSimError):
    """Allocation breaks a subcarrier, power or association constraint"""


class TaskTypeError(MecSimError):
    """Delay formula called for a user with a different task class"""


class OffloadImpossibleError(MecSimError):
    """Collaborative user has no uplink or no downlink rate"""


class CatalogOverflowError(MecSimError):
    """Action catalog would exceed the configured cap"""


class OracleCapError(MecSimError):
    """Joint action space too large for exhaustive search"""


class ConfigError(MecSimError):
    """Run configuration could not be loaded or validated"""


class VerificationError(MecSimError):
    """An analytical validator found a violation"""
