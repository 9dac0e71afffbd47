"""Deterministic human-robot-interaction simulator.

A differential-drive robot with threshold-gated rotate/arc motion, battery
management, and AR-style intent channels (path markers, turn signals,
thought bubbles, battery indicator), plus two study scenarios, a headless
trial runner, and a realtime session server.
"""

__version__ = "0.1.0"
