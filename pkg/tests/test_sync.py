"""Completion-barrier state machine."""

import pytest

from ndpsim.errors import ProtocolFault
from ndpsim.sync import State, SyncState


def test_resets_drain_only_after_all_devices_complete():
    drained = []
    sync = SyncState(on_drain=drained.append)
    sync.on_command_duplicated([0, 1])
    sync.defer_reset(["t0", "t1"])
    assert not drained
    assert sync.on_complete(0) is False
    assert not drained
    assert sync.on_complete(1) is True
    assert drained == ["t0", "t1"]
    assert sync.all_complete


def test_resets_drain_immediately_when_already_complete():
    drained = []
    sync = SyncState(on_drain=drained.append)
    sync.defer_reset(["x"])
    assert drained == ["x"]


def test_all_complete_callback_fires_before_drain():
    order = []
    sync = SyncState(on_drain=lambda i: order.append(("drain", i)),
                     on_all_complete=lambda: order.append(("sync", None)))
    sync.on_command_duplicated([0])
    sync.defer_reset(["r"])
    sync.on_complete(0)
    assert order == [("sync", None), ("drain", "r")]


def test_protocol_faults():
    sync = SyncState()
    with pytest.raises(ProtocolFault):
        sync.on_complete(0)
    with pytest.raises(ProtocolFault):
        sync.on_command_duplicated([])
    sync.on_command_duplicated([0, 1])
    with pytest.raises(ProtocolFault):
        sync.on_command_duplicated([2])
    with pytest.raises(ProtocolFault):
        sync.on_complete(5)
    assert sync.state is State.EXECUTING
