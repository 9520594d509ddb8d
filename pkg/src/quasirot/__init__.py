"""Rotation rates of quasiperiodic trajectories observed through projections."""

from .birkhoff import birkhoff_average, weighted_birkhoff_average
from .embedding import DelayCloud, EmbeddingConfig, build_delay_cloud
from .errors import (
    CollisionError,
    DataFormatError,
    IncompleteLiftError,
    LiftAmbiguityError,
    QuasirotError,
    UsageError,
    WindingRefusal,
)
from .lift import ContinuationParams, LiftedSeries, continue_lift, lift_oracle, near_return_chain, rotation_rate
from .torus import mod1, rigid_orbit, torus_distance

__version__ = "0.1.0"
