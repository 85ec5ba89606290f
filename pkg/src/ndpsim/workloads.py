"""Synthetic workload generators.

Each workload is a small shadow model of a persistent data structure
(hash table, ordered map, tree, list) or a transaction mix (warehouse
orders, subscriber updates, key-value caches).  A generator is driven by
a seeded RNG and emits an abstract transaction stream: per-transaction
write sets of (pool, offset, bytes) plus an amount of CPU compute.  The
stream is independent of the crash-consistency mechanism and of the
machine configuration, so the same seed must produce byte-identical
final data images everywhere -- that is the equivalence property the
test suite checks.

`build_program` expands a transaction stream into concrete ops for one
of the four mechanism adapters:

* ``logging``        -- undo record per write range, in-place stores,
                        flush, commit
* ``redo-logging``   -- redo entry per write range, ready mark, offloaded
                        in-place apply, commit
* ``checkpointing``  -- page checkpoint per touched page, in-place
                        stores, flush, commit
* ``shadow-paging``  -- shadow copy per touched page, in-place stores
                        (redirected to the shadow frame), flush, commit

All write sets are laid out so no record straddles a page boundary,
which keeps the per-transaction recovery-data footprint bounded.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import program as prg
from .errors import WorkloadFault

PAGE = 4096
MECHANISMS = ("logging", "redo-logging", "checkpointing", "shadow-paging")


@dataclass
class Update:
    pool: int
    off: int
    data: bytes


@dataclass
class Txn:
    thread: int
    pool: int
    updates: list[Update]
    compute_ns: float = 500.0

    def pages(self, page_size: int = PAGE) -> list[tuple[int, int]]:
        """Distinct page-aligned (off, size) ranges this txn touches."""
        touched = set()
        for u in self.updates:
            first = u.off // page_size
            last = (u.off + len(u.data) - 1) // page_size
            touched.update(range(first, last + 1))
        return [(p * page_size, page_size) for p in sorted(touched)]


@dataclass
class WorkloadRun:
    """A fully materialized transaction stream for one seed."""

    name: str
    pools: dict[int, dict]                  # pool -> dict(size, threads)
    setup: list[tuple[int, int, bytes]] = field(default_factory=list)
    txns: list[Txn] = field(default_factory=list)

    def expected_images(self) -> dict[int, bytes]:
        """Logical data images after every transaction has committed."""
        imgs = {p: bytearray(spec["size"]) for p, spec in self.pools.items()}
        for pool, off, data in self.setup:
            imgs[pool][off:off + len(data)] = data
        for txn in self.txns:
            for u in txn.updates:
                imgs[u.pool][u.off:u.off + len(u.data)] = u.data
        return {p: bytes(b) for p, b in imgs.items()}


# ----------------------------------------------------------------------
# mechanism adapters

def build_program(run: WorkloadRun, mechanism: str) -> prg.Program:
    """Expand a transaction stream into per-thread op lists."""
    if mechanism not in MECHANISMS:
        raise WorkloadFault(f"unknown mechanism {mechanism!r}")
    p = prg.Program()
    from .primitives import MECHANISM_PURPOSE
    purpose = MECHANISM_PURPOSE[mechanism].value
    for pool, spec in run.pools.items():
        p.add_pool(pool, size=spec["size"], page_size=PAGE, purpose=purpose,
                   threads=spec.get("threads", 1), managed_frac=1)
    p.setup = list(run.setup)
    for txn in run.txns:
        ops = p.thread(txn.thread)
        ops.append(prg.TxBegin(pool=txn.pool, mechanism=mechanism))
        if mechanism == "logging":
            for u in txn.updates:
                ops.append(prg.UndoLog(pool=txn.pool, off=u.off,
                                       size=len(u.data)))
            for u in txn.updates:
                ops.append(prg.WriteData(pool=txn.pool, off=u.off, data=u.data))
            ops.append(prg.Compute(ns=txn.compute_ns))
            for u in txn.updates:
                ops.append(prg.Flush(pool=txn.pool, off=u.off,
                                     size=len(u.data)))
        elif mechanism == "redo-logging":
            for u in txn.updates:
                ops.append(prg.RedoWrite(pool=txn.pool, off=u.off, data=u.data))
            ops.append(prg.RedoMark(pool=txn.pool))
            ops.append(prg.Compute(ns=txn.compute_ns))
            ops.append(prg.ApplyLog(pool=txn.pool))
        else:
            touch = prg.CkptTouch if mechanism == "checkpointing" else prg.ShadowTouch
            for off, size in txn.pages():
                ops.append(touch(pool=txn.pool, off=off, size=size))
            for u in txn.updates:
                ops.append(prg.WriteData(pool=txn.pool, off=u.off, data=u.data))
            ops.append(prg.Compute(ns=txn.compute_ns))
            for u in txn.updates:
                ops.append(prg.Flush(pool=txn.pool, off=u.off,
                                     size=len(u.data)))
        ops.append(prg.Commit(pool=txn.pool))
    return p


# ----------------------------------------------------------------------
# structure models
#
# Record strides are powers of two so records never straddle a page.

def _hashmap(seed: int, n_txns: int) -> WorkloadRun:
    """Open-addressing hash table: 8B key, 8B occupancy tag, 64B value,
    padded to a 128B slot."""
    rng = random.Random(seed)
    slots = 240
    run = WorkloadRun("hashmap", {0: dict(size=8 * PAGE)})
    table: dict[int, int] = {}          # key -> slot
    for _ in range(n_txns):
        key = rng.randrange(1, 1 << 32)
        if key in table:
            slot = table[key]
        else:
            slot = key % slots
            while slot in table.values():
                slot = (slot + 1) % slots
            table[key] = slot
        value = rng.randbytes(64)
        rec = key.to_bytes(8, "little") + (1).to_bytes(8, "little") + value
        run.txns.append(Txn(0, 0, [Update(0, slot * 128, rec)],
                            compute_ns=300.0))
    return run


def _btree(seed: int, n_txns: int) -> WorkloadRun:
    """B+-tree leaves: 1kB leaf slots holding up to 12 sorted 72B records
    (8B key + 64B value) behind an 8B count.  An insert rewrites the
    shifted suffix of one leaf."""
    rng = random.Random(seed)
    n_leaves = 24
    run = WorkloadRun("btree", {0: dict(size=8 * PAGE)})
    leaves: list[list[tuple[int, bytes]]] = [[] for _ in range(n_leaves)]
    for _ in range(n_txns):
        key = rng.randrange(1, 1 << 32)
        leaf = key % n_leaves
        recs = leaves[leaf]
        if len(recs) >= 12:
            recs.pop(rng.randrange(len(recs)))
        value = rng.randbytes(64)
        pos = 0
        while pos < len(recs) and recs[pos][0] < key:
            pos += 1
        if pos < len(recs) and recs[pos][0] == key:
            recs[pos] = (key, value)
        else:
            recs.insert(pos, (key, value))
        base = leaf * 1024
        suffix = b"".join(k.to_bytes(8, "little") + v for k, v in recs[pos:])
        count = len(recs).to_bytes(8, "little")
        run.txns.append(Txn(0, 0, [
            Update(0, base + 8 + pos * 72, suffix),
            Update(0, base, count),
        ], compute_ns=350.0))
    return run


def _rbtree(seed: int, n_txns: int) -> WorkloadRun:
    """Balanced binary tree nodes in a 128B slab: key 8, value 64,
    left 8, right 8, color 8.  An insert writes the new node and patches
    the parent's child pointer."""
    rng = random.Random(seed)
    run = WorkloadRun("rbtree", {0: dict(size=8 * PAGE)})
    nodes: list[dict] = []              # index == slab slot
    max_nodes = 8 * PAGE // 128

    def node_bytes(n: dict) -> bytes:
        return (n["key"].to_bytes(8, "little") + n["value"]
                + n["left"].to_bytes(8, "little")
                + n["right"].to_bytes(8, "little")
                + n["color"].to_bytes(8, "little"))

    for _ in range(n_txns):
        key = rng.randrange(1, 1 << 32)
        value = rng.randbytes(64)
        updates: list[Update] = []
        if not nodes:
            nodes.append(dict(key=key, value=value, left=0, right=0, color=1))
            updates.append(Update(0, 0, node_bytes(nodes[0])))
        else:
            cur = 0
            while True:
                n = nodes[cur]
                if key == n["key"]:
                    n["value"] = value
                    updates.append(Update(0, cur * 128, node_bytes(n)))
                    break
                side = "left" if key < n["key"] else "right"
                if n[side] == 0 or len(nodes) >= max_nodes:
                    if n[side] and nodes[n[side]]["key"] == key:
                        cur = n[side]
                        continue
                    if len(nodes) >= max_nodes:
                        n["value"] = value
                        updates.append(Update(0, cur * 128, node_bytes(n)))
                        break
                    idx = len(nodes)
                    nodes.append(dict(key=key, value=value, left=0, right=0,
                                      color=rng.randrange(2)))
                    n[side] = idx
                    updates.append(Update(0, idx * 128, node_bytes(nodes[idx])))
                    ptr_off = cur * 128 + (80 if side == "left" else 88)
                    updates.append(Update(0, ptr_off,
                                          idx.to_bytes(8, "little")))
                    break
                cur = n[side]
        run.txns.append(Txn(0, 0, updates, compute_ns=350.0))
    return run


def _skiplist(seed: int, n_txns: int) -> WorkloadRun:
    """Skip list with 4 levels; nodes are 128B slots: key 8, value 64,
    next[4].  An insert writes the node and splices up to 4 predecessor
    pointers."""
    rng = random.Random(seed)
    run = WorkloadRun("skiplist", {0: dict(size=8 * PAGE)})
    max_nodes = 8 * PAGE // 128
    # node 0 is the head sentinel
    nodes: list[dict] = [dict(key=0, value=b"\0" * 64, next=[0, 0, 0, 0])]
    run.setup.append((0, 0, b"\0" * 128))
    keys: dict[int, int] = {}

    def node_bytes(n: dict) -> bytes:
        return (n["key"].to_bytes(8, "little") + n["value"]
                + b"".join(x.to_bytes(8, "little") for x in n["next"]))

    for _ in range(n_txns):
        key = rng.randrange(1, 1 << 32)
        value = rng.randbytes(64)
        height = 1
        while height < 4 and rng.random() < 0.5:
            height += 1
        updates: list[Update] = []
        if key in keys or len(nodes) >= max_nodes:
            idx = keys.get(key) or rng.randrange(1, len(nodes))
            nodes[idx]["value"] = value
            updates.append(Update(0, idx * 128 + 8, value))
        else:
            preds = [0] * 4
            cur = 0
            for lvl in range(3, -1, -1):
                while nodes[cur]["next"][lvl] and \
                        nodes[nodes[cur]["next"][lvl]]["key"] < key:
                    cur = nodes[cur]["next"][lvl]
                preds[lvl] = cur
            idx = len(nodes)
            new = dict(key=key, value=value, next=[0, 0, 0, 0])
            for lvl in range(height):
                new["next"][lvl] = nodes[preds[lvl]]["next"][lvl]
                nodes[preds[lvl]]["next"][lvl] = idx
            nodes.append(new)
            keys[key] = idx
            updates.append(Update(0, idx * 128, node_bytes(new)))
            for p in sorted(set(preds[:height])):
                updates.append(Update(0, p * 128 + 72, b"".join(
                    x.to_bytes(8, "little") for x in nodes[p]["next"])))
        run.txns.append(Txn(0, 0, updates, compute_ns=400.0))
    return run


# ----------------------------------------------------------------------
# transaction mixes

def _tpcc(seed: int, n_txns: int) -> WorkloadRun:
    """New-order style mix: each transaction updates a warehouse row, a
    district row, and a customer row (64B each, 128B stride, separate
    table regions) and appends a 128B order row."""
    rng = random.Random(seed)
    run = WorkloadRun("tpcc", {0: dict(size=8 * PAGE)})
    tables = {"warehouse": (0, 8), "district": (PAGE, 24),
              "customer": (2 * PAGE, 48)}
    order_base, order_rows = 4 * PAGE, 4 * PAGE // 128
    next_order = 0
    for _ in range(n_txns):
        updates = []
        for base, rows in tables.values():
            row = rng.randrange(rows)
            updates.append(Update(0, base + row * 128, rng.randbytes(64)))
        updates.append(Update(0, order_base + (next_order % order_rows) * 128,
                              rng.randbytes(128)))
        next_order += 1
        run.txns.append(Txn(0, 0, updates, compute_ns=800.0))
    return run


def _tatp(seed: int, n_txns: int) -> WorkloadRun:
    """Subscriber-update mix: read-dominated, one 32B in-place row update
    per transaction, so each transaction offloads a single small
    operation besides its commit."""
    rng = random.Random(seed)
    run = WorkloadRun("tatp", {0: dict(size=8 * PAGE)})
    rows = 8 * PAGE // 64
    for _ in range(n_txns):
        row = rng.randrange(rows)
        run.txns.append(Txn(0, 0, [Update(0, row * 64, rng.randbytes(32))],
                            compute_ns=2500.0))
    return run


def _memcached(seed: int, n_txns: int) -> WorkloadRun:
    """Cache with 4 worker threads, each owning a private pool; sets
    write one 128B slot (8B key, 8B tag, 64B value)."""
    rng = random.Random(seed)
    pools = {p: dict(size=8 * PAGE, threads=4) for p in range(4)}
    run = WorkloadRun("memcached", pools)
    slots = 240
    for i in range(n_txns):
        t = i % 4
        key = rng.randrange(1, 1 << 32)
        rec = (key.to_bytes(8, "little") + (1).to_bytes(8, "little")
               + rng.randbytes(64))
        run.txns.append(Txn(t, t, [Update(t, (key % slots) * 128, rec)],
                            compute_ns=400.0))
    return run


def _redis(seed: int, n_txns: int) -> WorkloadRun:
    """Store with 4 threads sharing one pool; the keyspace is partitioned
    so each thread writes only its own 128B-slot range."""
    rng = random.Random(seed)
    run = WorkloadRun("redis", {0: dict(size=8 * PAGE, threads=4)})
    per_thread = (8 * PAGE // 128) // 4
    for i in range(n_txns):
        t = i % 4
        key = rng.randrange(1, 1 << 32)
        slot = t * per_thread + key % per_thread
        rec = (key.to_bytes(8, "little") + (1).to_bytes(8, "little")
               + rng.randbytes(64))
        run.txns.append(Txn(t, 0, [Update(0, slot * 128, rec)],
                            compute_ns=400.0))
    return run


def _pmemkv(seed: int, n_txns: int) -> WorkloadRun:
    """Sorted-array key-value engine: 1kB leaf slots of 72B records, an
    insert rewrites the shifted suffix of one leaf plus its count."""
    rng = random.Random(seed)
    run = _btree(seed, n_txns)
    run.name = "pmemkv"
    for txn in run.txns:
        txn.compute_ns = 500.0 + rng.random()  # jittered engine overhead
    return run


WORKLOADS = {
    "hashmap": _hashmap,
    "btree": _btree,
    "rbtree": _rbtree,
    "skiplist": _skiplist,
    "tpcc": _tpcc,
    "tatp": _tatp,
    "memcached": _memcached,
    "redis": _redis,
    "pmemkv": _pmemkv,
}

# workloads whose per-transaction shape models an OLTP / server request
TRANSACTION_WORKLOADS = ("tpcc", "tatp", "memcached", "redis", "pmemkv")


def make_workload(name: str, seed: int, n_txns: int = 16) -> WorkloadRun:
    try:
        builder = WORKLOADS[name]
    except KeyError:
        raise WorkloadFault(f"unknown workload {name!r}") from None
    return builder(seed, n_txns)
