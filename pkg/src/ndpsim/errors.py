"""Exception hierarchy shared by all simulator components."""


class SimError(Exception):
    """Base class for all simulator faults."""


class AddressFault(SimError):
    """Access outside the physical capacity of a device."""


class RegistrationFault(SimError):
    """Pool registration conflict or mapping-table overflow."""


class TranslationFault(SimError):
    """Lookup of an unregistered pool."""


class BoundsFault(SimError):
    """Virtual address outside the registered pool range."""


class ProtocolFault(SimError):
    """Primitive or sync state machine used out of order."""


class OverflowFault(SimError):
    """Log, checkpoint, or shadow region exhausted."""


class RecoveryFault(SimError):
    """Corrupt persistence-domain snapshot or unusable recovery data."""


class CheckerFault(SimError):
    """Malformed trace handed to the ordering checker."""


class ConfigError(SimError):
    """Invalid experiment or scenario configuration."""


class WorkloadFault(SimError):
    """Workload ran out of pool space or failed a runtime assertion."""
