"""Litmus scenario corpus for the crash oracle and the ordering checker.

Each scenario is a tiny transaction stream (every expanded program stays
within a dozen ops) plus a machine shape: device count, persist-chunk
size for crash-cut enumeration, and an optional fault-injection switch
that deliberately breaks the offload protocol.  Correct scenarios must
classify every crash cut as pre- or post-state and pass the ordering
checker; broken ones must show inconsistent cuts and checker violations
-- the two tools validate each other on exactly this corpus.

Scenarios can also be described in TOML files (see ``scenarios/`` in the
repository root) and loaded with :func:`load_scenario_file`.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

from .device import MachineConfig
from .errors import ConfigError, WorkloadFault
from .workloads import Txn, Update, WorkloadRun, build_program

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FAULTS = ("no_conflict_stall", "premature_reset", "skip_sync")

# chunk sizes for crash-cut enumeration: byte-granular mechanisms cut
# inside individual values, page-granular ones at page-copy boundaries
VALUE_CHUNK = 8
PAGE_CHUNK = 2048


@dataclass
class Scenario:
    name: str
    mechanism: str
    devices: int = 1
    fault: str | None = None
    chunk: int = VALUE_CHUNK
    pool_size: int = 8192
    threads: int = 1
    txns: list[Txn] = field(default_factory=list)
    setup: list[tuple[int, int, bytes]] = field(default_factory=list)

    @property
    def expect_consistent(self) -> bool:
        return self.fault is None

    def workload_run(self) -> WorkloadRun:
        return WorkloadRun(self.name,
                           {0: dict(size=self.pool_size, threads=self.threads)},
                           setup=list(self.setup), txns=list(self.txns))

    def program(self):
        return build_program(self.workload_run(), self.mechanism)

    def config(self) -> MachineConfig:
        if self.fault is not None and self.fault not in FAULTS:
            raise ConfigError(f"unknown fault switch {self.fault!r}")
        kw = {self.fault: True} if self.fault else {}
        return MachineConfig(device_count=self.devices, oracle_mode=True,
                             chunk=self.chunk, **kw)


def _u(off: int, data: bytes) -> Update:
    return Update(0, off, data)


def _txn(updates: list[Update], thread: int = 0, compute: float = 200.0) -> Txn:
    return Txn(thread, 0, updates, compute_ns=compute)


def _value_scenarios() -> list[Scenario]:
    a, b, c = b"ABCDEFGH", b"ijklmnop", b"QRSTUVWXYZ012345"
    out = []
    # --- undo logging -------------------------------------------------
    out.append(Scenario("undo-1dev-single", "logging",
                        txns=[_txn([_u(64, a)])]))
    out.append(Scenario("undo-1dev-two-txn", "logging",
                        txns=[_txn([_u(64, a)]), _txn([_u(64, b)])]))
    out.append(Scenario("undo-2dev-straddle", "logging", devices=2,
                        txns=[_txn([_u(4092, a)])]))
    out.append(Scenario("undo-2dev-two-ranges", "logging", devices=2,
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    out.append(Scenario("undo-2dev-two-threads", "logging", devices=2,
                        threads=2,
                        txns=[_txn([_u(64, a)], thread=0),
                              _txn([_u(4160, b)], thread=1)]))
    # --- redo logging ---------------------------------------------------
    out.append(Scenario("redo-1dev-single", "redo-logging",
                        txns=[_txn([_u(64, a)])]))
    out.append(Scenario("redo-1dev-two-txn", "redo-logging",
                        txns=[_txn([_u(64, a)]), _txn([_u(64, c)])]))
    out.append(Scenario("redo-2dev-straddle", "redo-logging", devices=2,
                        txns=[_txn([_u(4092, c)])]))
    out.append(Scenario("redo-2dev-two-ranges", "redo-logging", devices=2,
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    return out


def _page_scenarios() -> list[Scenario]:
    a, b = b"ABCDEFGH", b"ijklmnop"
    out = []
    out.append(Scenario("ckpt-1dev-single", "checkpointing",
                        chunk=PAGE_CHUNK, pool_size=16384,
                        txns=[_txn([_u(64, a)])]))
    out.append(Scenario("ckpt-2dev-two-pages", "checkpointing", devices=2,
                        chunk=PAGE_CHUNK, pool_size=16384,
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    out.append(Scenario("shadow-1dev-single", "shadow-paging",
                        chunk=PAGE_CHUNK, pool_size=16384,
                        txns=[_txn([_u(64, a)])]))
    out.append(Scenario("shadow-1dev-two-txn", "shadow-paging",
                        chunk=PAGE_CHUNK, pool_size=16384,
                        txns=[_txn([_u(64, a)]), _txn([_u(96, b)])]))
    out.append(Scenario("shadow-2dev-two-pages", "shadow-paging", devices=2,
                        chunk=PAGE_CHUNK, pool_size=16384,
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    return out


def _broken_scenarios() -> list[Scenario]:
    """Deliberately broken protocol variants.

    * ``premature_reset``: recovery data (log tombstones, commit markers,
      page-reference switches) persists as each device finishes locally
      instead of draining after the cross-device sync.
    * ``no_conflict_stall``: CPU accesses skip the stall on conflicting
      in-flight offloaded operations, so flushed data can race the log
      copy that was supposed to capture the pre-image.
    * ``skip_sync``: the completion barrier only waits for the command's
      home device, so remote work may land after the sync point.
    """
    a, b = b"ABCDEFGH", b"ijklmnop"
    out = []
    out.append(Scenario("broken-undo-premature", "logging", devices=2,
                        fault="premature_reset",
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    out.append(Scenario("broken-undo-no-stall", "logging", devices=2,
                        fault="no_conflict_stall",
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    out.append(Scenario("broken-ckpt-premature", "checkpointing", devices=2,
                        fault="premature_reset", chunk=PAGE_CHUNK,
                        pool_size=16384,
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    out.append(Scenario("broken-ckpt-no-stall", "checkpointing", devices=2,
                        fault="no_conflict_stall", chunk=PAGE_CHUNK,
                        pool_size=16384,
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    out.append(Scenario("broken-shadow-premature", "shadow-paging", devices=2,
                        fault="premature_reset", chunk=PAGE_CHUNK,
                        pool_size=16384,
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    out.append(Scenario("broken-redo-skip-sync", "redo-logging", devices=2,
                        fault="skip_sync",
                        txns=[_txn([_u(64, a), _u(4160, b)])]))
    return out


def corpus(include_broken: bool = True) -> list[Scenario]:
    out = _value_scenarios() + _page_scenarios()
    if include_broken:
        out += _broken_scenarios()
    return out


def get_scenario(name: str) -> Scenario:
    for s in corpus():
        if s.name == name:
            return s
    raise WorkloadFault(f"no scenario named {name!r}")


# ----------------------------------------------------------------------
# TOML form

def load_scenario_file(path: str) -> Scenario:
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    try:
        sc = Scenario(
            name=doc["name"], mechanism=doc["mechanism"],
            devices=doc.get("devices", 1), fault=doc.get("fault"),
            chunk=doc.get("chunk", VALUE_CHUNK),
            pool_size=doc.get("pool_size", 8192),
            threads=doc.get("threads", 1))
        for t in doc.get("txn", []):
            ups = [_u(u["off"], bytes.fromhex(u["data"]))
                   for u in t.get("update", [])]
            sc.txns.append(_txn(ups, thread=t.get("thread", 0),
                                compute=t.get("compute_ns", 200.0)))
        for s in doc.get("setup", []):
            sc.setup.append((0, s["off"], bytes.fromhex(s["data"])))
    except KeyError as e:
        raise ConfigError(f"{path}: missing scenario field {e}") from None
    return sc


def dump_scenario_toml(sc: Scenario) -> str:
    lines = [f'name = "{sc.name}"', f'mechanism = "{sc.mechanism}"',
             f"devices = {sc.devices}", f"chunk = {sc.chunk}",
             f"pool_size = {sc.pool_size}", f"threads = {sc.threads}"]
    if sc.fault:
        lines.append(f'fault = "{sc.fault}"')
    for pool, off, data in sc.setup:
        lines += ["", "[[setup]]", f"off = {off}", f'data = "{data.hex()}"']
    for t in sc.txns:
        lines += ["", "[[txn]]", f"thread = {t.thread}",
                  f"compute_ns = {t.compute_ns}"]
        for u in t.updates:
            lines += ["", "[[txn.update]]", f"off = {u.off}",
                      f'data = "{u.data.hex()}"']
    return "\n".join(lines) + "\n"
