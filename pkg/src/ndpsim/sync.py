"""Multi-device synchronization state machine with delayed resets.

A command duplicated across devices moves the state machine from
All-Complete to Executing; per-device completion bits bring it back.
Recovery-data invalidations (log tombstones and the like) queued while
Executing drain only once every participating device has completed, so
nothing needed for recovery can persist before the synchronization
point.
"""

from __future__ import annotations

from enum import Enum

from .errors import ProtocolFault


class State(Enum):
    ALL_COMPLETE = "all-complete"
    EXECUTING = "executing"


class SyncState:
    """Synchronization tracker for one duplicated command.

    `on_drain` is called with each deferred invalidation, in enqueue
    order, exactly when the machine reaches All-Complete (or
    immediately if already there).
    """

    def __init__(self, on_drain=None, on_all_complete=None):
        self.state = State.ALL_COMPLETE
        self.completion_bits: dict[int, bool] = {}
        self.pending_resets: list = []
        self.on_drain = on_drain
        self.on_all_complete = on_all_complete

    @property
    def all_complete(self) -> bool:
        return self.state is State.ALL_COMPLETE

    def on_command_duplicated(self, devices) -> None:
        if self.state is not State.ALL_COMPLETE:
            raise ProtocolFault("command duplicated while still executing")
        devices = list(devices)
        if not devices:
            raise ProtocolFault("command must participate on at least one device")
        self.state = State.EXECUTING
        self.completion_bits = {d: False for d in devices}

    def on_complete(self, device: int) -> bool:
        """Set one device's bit; returns True when this completes the command."""
        if self.state is not State.EXECUTING:
            raise ProtocolFault("completion received while All-Complete")
        if device not in self.completion_bits:
            raise ProtocolFault(f"completion from non-participating device {device}")
        self.completion_bits[device] = True
        if all(self.completion_bits.values()):
            self.state = State.ALL_COMPLETE
            if self.on_all_complete is not None:
                self.on_all_complete()
            self._drain()
            return True
        return False

    def defer_reset(self, invalidations) -> None:
        """Queue recovery-data invalidations; they persist only post-sync."""
        self.pending_resets.extend(invalidations)
        if self.state is State.ALL_COMPLETE:
            self._drain()

    def _drain(self):
        pending, self.pending_resets = self.pending_resets, []
        if self.on_drain is not None:
            for item in pending:
                self.on_drain(item)
