"""Discrete-event attack simulation."""
from .config import (AttackSpec, MetricsLog, SimConfig, SimulationDivergence, cpu_contention,
                     mean, read_series, window_values)
from .engine import (BACKEND, CLIENT, Network, calibrate_delay_params, link_queue_model,
                     measure_bandwidth, response_lower_bound_ms, run, slice_chain,
                     unloaded_response_ms)
