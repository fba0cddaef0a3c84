"""Desk-scale traffic-signal-control laboratory.

Mesoscopic store-and-forward simulation, a multi-agent signal-control
environment, learned top-k collaborator selection with joint
actor/critic/selector optimization, classical baselines, and a deterministic
experiment harness (HTTP service + CLI).
"""

__version__ = "0.1.0"
