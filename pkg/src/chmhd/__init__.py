"""Energy-stable staggered-grid solver for two-phase conducting flow.

A diffuse-interface phase field is coupled to incompressible flow and a
magnetic induction equation on a MAC grid.  Three decoupled first-order
schemes are provided (stab, ieq, iieq), each dissipating its own discrete
energy without a time-step restriction.
"""

__version__ = "0.1.0"
