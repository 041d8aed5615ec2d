"""Matrix-product engines: vectorized-operator TEBD and MPS trajectories."""

from .core import MPS  # noqa: F401
from .mpo import (  # noqa: F401
    TruncationPolicy,
    TrotterSchedule,
    VectorizedMPO,
    build_trotter_schedule,
    evolve_to_ness,
    product_mpo,
    tebd_step,
)
