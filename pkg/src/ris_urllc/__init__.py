"""Min-max decoding-error optimization for an uplink where paired users
share slots non-orthogonally, slots are time-divided, and all links pass
through a passive reflecting surface under short-packet coding."""

from .config import (
    Allocation,
    ConfigError,
    Rect,
    SystemConfig,
    allocation_violations,
    dbm_to_watts,
    db_to_linear,
    load_config,
    make_config,
    validate_config,
)
from .channels import ChannelRealization, place_users, path_gain, realize_channels
from .metrics import (
    MetricsReport,
    combined_channel,
    g_values,
    min_g,
    q_function,
    q_inverse,
    report,
    sinr_all,
)
from .ordering import OrderResult, determine_order
from .pipeline import RunTrace, ao_inner_loop, run_pipeline, run_three_step
from .baselines import SCHEMES, run_scheme
from .experiments import emit_report, sweep

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ChannelRealization",
    "ConfigError",
    "MetricsReport",
    "OrderResult",
    "Rect",
    "RunTrace",
    "SCHEMES",
    "SystemConfig",
    "allocation_violations",
    "ao_inner_loop",
    "combined_channel",
    "db_to_linear",
    "dbm_to_watts",
    "determine_order",
    "emit_report",
    "g_values",
    "load_config",
    "make_config",
    "min_g",
    "path_gain",
    "place_users",
    "q_function",
    "q_inverse",
    "realize_channels",
    "report",
    "run_pipeline",
    "run_scheme",
    "run_three_step",
    "sinr_all",
    "sweep",
    "validate_config",
]
