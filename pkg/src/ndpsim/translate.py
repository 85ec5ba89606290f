"""Pool-indexed virtual-to-physical address translation.

Each pool registers the offset between its virtual and device-local
physical base.  Which device services a byte is decided purely by the
virtual address: consecutive `granularity`-sized blocks round-robin over
the devices, so every device sees a contiguous local block per stripe
and a single per-pool offset suffices.  Translation depends only on
(pool, thread, vaddr), never on process identity, so mappings survive
simulated context switches.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BoundsFault, ConfigError, RegistrationFault, TranslationFault

WILDCARD_THREAD = -1

# Address look-up table budget in the persistence domain: 432 bytes at
# 16 bytes per entry.
LUT_MAX_ENTRIES = 27
LUT_ENTRY_BYTES = 16


@dataclass(frozen=True)
class AddressMappingEntry:
    pool: int
    thread: int
    base_virt: int
    offset: int          # physical = virtual + offset
    pool_size: int


def device_of(vaddr: int, granularity: int, device_count: int) -> int:
    """Which device a virtual address lands on."""
    if device_count < 1:
        raise ConfigError("device_count must be >= 1")
    if granularity <= 0 or granularity & (granularity - 1):
        raise ConfigError("interleave granularity must be a power of two")
    return (vaddr // granularity) % device_count


def split_range(vaddr: int, size: int, granularity: int,
                device_count: int) -> list[tuple[int, int, int]]:
    """Split a virtual range at interleave boundaries.

    Returns (device, vaddr, size) pieces whose union is exactly the
    input range.  Scatter-gather is unsupported, so each piece is a
    single contiguous block on one device.
    """
    out = []
    pos = vaddr
    end = vaddr + size
    while pos < end:
        block_end = (pos // granularity + 1) * granularity
        piece_end = min(end, block_end)
        out.append((device_of(pos, granularity, device_count), pos, piece_end - pos))
        pos = piece_end
    return out


class AddressMap:
    """The pool-ID-indexed translation table, mirrored on every device."""

    def __init__(self, device_count: int, capacity: int, granularity: int):
        self.device_count = device_count
        self.capacity = capacity
        self.granularity = granularity
        self.entries: dict[tuple[int, int], AddressMappingEntry] = {}

    def register_pool(self, pool: int, base_virt: int, base_phys: int,
                      size: int, thread: int = WILDCARD_THREAD) -> AddressMappingEntry:
        key = (pool, thread)
        if key in self.entries:
            raise RegistrationFault(f"pool {pool} already registered for thread {thread}")
        if len(self.entries) >= LUT_MAX_ENTRIES:
            raise RegistrationFault(
                f"address mapping table full ({LUT_MAX_ENTRIES} entries)")
        entry = AddressMappingEntry(pool, thread, base_virt, base_phys - base_virt, size)
        self.entries[key] = entry
        return entry

    def lookup(self, pool: int, thread: int) -> AddressMappingEntry:
        entry = self.entries.get((pool, thread))
        if entry is None:
            entry = self.entries.get((pool, WILDCARD_THREAD))
        if entry is None:
            raise TranslationFault(f"pool {pool} not registered")
        return entry

    def translate(self, pool: int, thread: int, vaddr: int) -> int:
        """Translate to a system-wide physical address.

        The returned address encodes the device as `device * capacity +
        local`, where `local = vaddr + offset` is the device-local
        physical address the mapping entry yields.
        """
        entry = self.lookup(pool, thread)
        if not entry.base_virt <= vaddr < entry.base_virt + entry.pool_size:
            raise BoundsFault(
                f"vaddr {vaddr:#x} outside pool {pool} "
                f"[{entry.base_virt:#x}, {entry.base_virt + entry.pool_size:#x})")
        local = vaddr + entry.offset
        dev = device_of(vaddr, self.granularity, self.device_count)
        return dev * self.capacity + local

    def translate_local(self, pool: int, thread: int, vaddr: int) -> tuple[int, int]:
        """Like translate(), but returns (device, device-local address)."""
        g = self.translate(pool, thread, vaddr)
        return g // self.capacity, g % self.capacity

    def lut_bytes(self) -> int:
        return len(self.entries) * LUT_ENTRY_BYTES
