"""Hybrid-model MPC for a quadrotor tail-sitter in hover, on a synthetic plant.

Modules: ``core`` (types), ``plant`` (truth simulator), ``data`` (log pipeline),
``ffnn`` (residual MLP + LM), ``qp`` and ``mpc`` (RTI multiple shooting),
``baselines`` (PID, backstepping, sliding mode), ``trajectories`` and
``harness`` / ``cli`` (experiments and reports).
"""

__version__ = "0.1.0"
