"""Latency/bandwidth parameters that drive simulated time."""

from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class CostModel:
    """Timing parameters of the simulated system.

    Bandwidths are in GB/s, which conveniently equals bytes per
    nanosecond.  ``cpu_copy_ns_per_byte`` is the single calibration
    parameter: it folds the CPU-side load/store/flush cost of moving one
    byte between two persistent locations into a linear coefficient.
    """

    pm_access_latency_ns: float = 436.0
    host_link_bandwidth_GBps: float = 8.0
    internal_bandwidth_GBps: float = 4.0
    units_per_device: int = 4
    unit_freq_MHz: float = 300.0
    cpu_copy_ns_per_byte: float = 1.55
    command_issue_latency_ns: float = 100.0
    sw_sync_poll_ns: float = 500.0
    inter_device_latency_ns: float = 0.0
    metadata_gen_cycles: int = 10
    cpu_store_ns: float = 2.0
    cpu_op_ns: float = 500.0

    def __post_init__(self):
        for f in fields(self):
            if f.name == "inter_device_latency_ns":
                if getattr(self, f.name) < 0:
                    raise ConfigError("inter_device_latency_ns must be >= 0")
                continue
            if getattr(self, f.name) <= 0:
                raise ConfigError(f"cost model field {f.name} must be strictly positive")

    @property
    def metadata_gen_ns(self) -> float:
        return self.metadata_gen_cycles / (self.unit_freq_MHz * 1e-3)

    def data_move_ns(self, nbytes: int) -> float:
        """Pure DMA time of an NDP unit moving nbytes over the internal bus."""
        return nbytes / self.internal_bandwidth_GBps

    def unit_exec_ns(self, nbytes: int) -> float:
        """Total unit time: metadata generation, first access, data movement."""
        return self.metadata_gen_ns + self.pm_access_latency_ns + self.data_move_ns(nbytes)

    def cpu_copy_ns(self, nbytes: int) -> float:
        """CPU-side persistent copy of nbytes (baseline primitive cost)."""
        return self.pm_access_latency_ns + nbytes * self.cpu_copy_ns_per_byte

    def host_transfer_ns(self, nbytes: int) -> float:
        """Moving nbytes over the host link (flush writeback, uncached read)."""
        return self.pm_access_latency_ns + nbytes / self.host_link_bandwidth_GBps

    def calibrate_copy(self, size: int, target_speedup: float) -> float:
        """Solve cpu_copy_ns_per_byte so the NDP/CPU copy speedup at `size`
        equals `target_speedup`.  Returns the calibrated coefficient."""
        ndp = self.command_issue_latency_ns + self.unit_exec_ns(size)
        c = (target_speedup * ndp - self.pm_access_latency_ns) / size
        if c <= 0:
            raise ConfigError("calibration target unreachable with current parameters")
        return c
