"""Deterministic multi-component simulated target.

One entry component plus three downstream services (session manager,
registry, config store) with explicit edge instrumentation, per-session
state, cross-component request propagation, and three planted defects.
Stdlib-only: components restart often mid-campaign and must come up fast.
"""
