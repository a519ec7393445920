"""Rate regions and packet-level simulation for the two-user layered packet
erasure broadcast channel with channel output feedback."""

from .channel import ChannelSummary, JointChannelPmf, load_channel, random_channel, seed_stream
from .errors import *  # noqa: F401,F403
from .fixtures import fixture
from .geometry import HalfPlane, Region2D, hausdorff, is_subset, region_contains
from .gf import GaloisField, field
from .protocol import RunStats, concentration_suite, receiver_decode, run_two_phase
from .regions import (check_optimality, fme_inner_region, inner_bound_region, no_csit_capacity,
                      outer_bound_region, stability_inner_region, trivial_inner_region,
                      two_phase_time, xi_params)
from .stability import (ArrivalSpec, StabilityTrace, replay_epochs, run_epochs, stability_verdict,
                        sweep_load)

__version__ = "0.1.0"
