"""Packet-path acceleration toolkit.

Long queue emulation model and simulator, lockless bimodal capture queue,
tail early dropping, low-false-negative connection table and a
multiresolution timer queue.  Hot kernels come from a compiled extension
when it is built; set ``PKTACCEL_PURE=1`` to force the pure-Python code.
"""

from ._backend import COMPILED, name as backend_name
from .core import ConnKey, Packet, PacketDescriptor, Proto, canonicalize, hash64, hash_mod, processing_budget
from .errors import (InvalidHandleError, InvariantViolation, OutOfHorizonError, QueueFullError,
                     TraceFormatError, TraceOrderError, TruncatedCaptureError)
from .lbq import EMPTY, Lbq, Mode, Status, Variant, capture_burst
from .lfn import LfnTable, fn_probability, fp_probability
from .lqe_sim import Model, ModelChoice, SimParams, SimReport, decide_model, service_time_from_table2, simulate
from .mrpq import HeapOracle, Mrpq, PyMrpq, TimerEntry
from .ted import ConnState, ForwardDecision, TedPolicy, congestion_signal

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "backend_name", "ConnKey", "Packet", "PacketDescriptor", "Proto", "canonicalize", "hash64",
    "hash_mod", "processing_budget", "InvalidHandleError", "InvariantViolation", "OutOfHorizonError",
    "QueueFullError", "TraceFormatError", "TraceOrderError", "TruncatedCaptureError", "EMPTY", "Lbq", "Mode",
    "Status", "Variant", "capture_burst", "LfnTable", "fn_probability", "fp_probability", "Model",
    "ModelChoice", "SimParams", "SimReport", "decide_model", "service_time_from_table2", "simulate",
    "HeapOracle", "Mrpq", "PyMrpq", "TimerEntry", "ConnState", "ForwardDecision", "TedPolicy",
    "congestion_signal",
]
