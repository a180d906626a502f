"""Energy bounds and a slot-level simulator for opportunistic
device-to-device relaying in a shadowed cellular uplink."""

from .bounds import (
    BoundPair,
    D2dMethod,
    D2dScenario,
    RelayBoundMethod,
    ShadowScenario,
    audit_closed_forms,
    d2d_expected_energy,
    direct_bound,
    min_uniform_mean,
    psi_integral,
    relay_upper_bound,
    scaling_upper_bound,
)
from .channel import Hop, LognormalLinkParams, RayleighLinkParams, SnrSample, mean_snr_db
from .config import ScenarioConfig, parse_config
from .energy import RadioParams, SelectionMode, direct_energy, d2d_energy, optimal_power, selection_metric
from .protocol import BackoffConfig, OverheadEnergies, backoff_map, hidden_node_filter, run_selection_round
from .simkit import CampaignResult, Device, Ring, Scheme, UniformAnnulus, generate_network, run_campaign

__version__ = "0.1.0"
