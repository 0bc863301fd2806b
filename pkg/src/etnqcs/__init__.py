"""Event-triggered tracking control over quantized, scheduled networks."""

from .design import DesignResult, InfeasibleDesign, PhiParams, check_conditions, max_T_Delta, solve_phi
from .etm import EtmParams, gamma_fn, lambda_bar, rho_bar, triggered
from .hybrid import (EventKind, EventRecord, FixedDelay, FixedInterval, HybridState, NetworkConfig, Trace,
                     UniformDelay, UniformInterval, integrate_flow, run, sampling_jump, update_jump)
from .models import (CertificateSet, SystemModel, build_model, register_model, robot_arm_certificates,
                     robot_arm_model)
from .monitor import MonitorReport, lyapunov_monitor
from .protocols import NodePartition, Protocol, protocol_update, rr_select, tod_select
from .quantization import QuantizerParams, base_quantize, quantize, saturation_check, zoom_step

__version__ = "0.1.0"
