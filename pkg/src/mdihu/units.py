"""Unit system used internally.

Inputs are given in field units (ft, mD, cP, lbm/ft^3, psi, days).  Internally
every flux is a volumetric rate in ft^3/day, pressures are in psi and phase
weights ``rho * g`` are in psi/ft.  Two constants are enough to get there:

* ``DARCY``: converts ``k [mD] * A [ft^2] * dp [psi] / (mu [cP] * L [ft])``
  into ft^3/day (0.001127 bbl/day times 5.614583 ft^3/bbl).
* ``GRAVITY``: the value of ``g`` such that ``rho [lbm/ft^3] * g`` is a
  pressure gradient in psi/ft (1 lbf/ft^2 = 1/144 psi under g_c).
"""

DARCY = 0.001127 * 5.614583
GRAVITY = 1.0 / 144.0

# out-of-plane thickness for 2D models [ft]
THICKNESS = 1.0
