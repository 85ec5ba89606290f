"""Deterministic simulator and verification toolkit for near-data
crash-consistency offloading on persistent memory."""

from .checker import CheckResult, Violation, check_file, check_trace
from .costmodel import CostModel
from .device import CONFIG_BUILDERS, Machine, MachineConfig, logical_data_image
from .errors import (AddressFault, BoundsFault, CheckerFault, ConfigError,
                     OverflowFault, ProtocolFault, RecoveryFault,
                     RegistrationFault, SimError, TranslationFault,
                     WorkloadFault)
from .oracle import (INCONSISTENT, POST, PRE, CrashOracle, OracleReport,
                     run_oracle)
from .program import Program
from .recovery import Snapshot, hw_recover, recover, sw_recover
from .trace import Trace, TraceEvent
from .translate import AddressMap, device_of, split_range
from .workloads import (MECHANISMS, TRANSACTION_WORKLOADS, WORKLOADS, Txn,
                        Update, WorkloadRun, build_program, make_workload)
from .scenarios import Scenario, corpus, get_scenario, load_scenario_file
from .harness import (CopyPoint, ExperimentPlan, copy_sweep, load_plan,
                      ordering_violations, report, run_experiment,
                      speedup_table)

__version__ = "0.1.0"

__all__ = [
    "AddressFault", "AddressMap", "BoundsFault", "CheckResult", "CheckerFault",
    "ConfigError", "CONFIG_BUILDERS", "CostModel", "CrashOracle",
    "INCONSISTENT", "logical_data_image", "Machine", "MachineConfig",
    "OracleReport", "OverflowFault", "POST", "PRE", "Program", "ProtocolFault",
    "RecoveryFault", "RegistrationFault", "SimError", "Snapshot", "Trace",
    "TraceEvent", "TranslationFault", "Violation", "WorkloadFault",
    "check_file", "check_trace", "device_of", "hw_recover", "recover",
    "run_oracle", "split_range", "sw_recover",
    "CopyPoint", "ExperimentPlan", "MECHANISMS", "Scenario",
    "TRANSACTION_WORKLOADS", "Txn", "Update", "WORKLOADS", "WorkloadRun",
    "build_program", "copy_sweep", "corpus", "get_scenario", "load_plan",
    "load_scenario_file", "make_workload", "ordering_violations", "report",
    "run_experiment", "speedup_table",
]
