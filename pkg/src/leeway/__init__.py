"""Force-aware waypoint augmentation for small surface vessels.

Wind and current maps (GP regression), a linear displacement model, a
kinematic vessel simulator with a PID waypoint navigator, feed-forward
waypoint augmentation, coverage planners, and evaluation tooling.
"""

__version__ = "0.1.0"
