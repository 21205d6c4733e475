"""Physical constants in Hartree atomic units."""

HBAR = 1.0
ELEMENTARY_CHARGE = 1.0
ELECTRON_MASS = 1.0
SPEED_OF_LIGHT = 137.035999

# charge-density coupling to the squared vector potential, e^2 / (2 m)
A2_VERTEX = ELEMENTARY_CHARGE**2 / (2.0 * ELECTRON_MASS)

# weight of the diamagnetic piece of the physical current, e / m
DIAMAG = ELEMENTARY_CHARGE / ELECTRON_MASS
