"""Base-placement optimization for mirrored dual-arm manipulators.

The pipeline: exhaustive self-motion manifolds per reach target, collision
filtering, manipulability criteria, a mirrored two-arm design model, and a
memoized particle-swarm search over a discretized mount-placement grid.
"""

__version__ = "0.1.0"
