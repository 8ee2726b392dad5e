"""Self-similar asymptotics of the Maxwell-Boltzmann equation with a
linear deformation term, computed in the characteristic-function
(Fourier) representation.

Modules
-------
kernels     angular collision kernels, sphere quadratures, q and lambda(p)
moments     second-moment matrix ODE, dominant eigenpair, scale factor
field       k-grids, collision operators, evolutions, profile solver
hierarchy   higher moment polynomials and density reconstruction
dsmc        stochastic particle oracle
cli         batch experiment front door
"""

__version__ = "0.1.0"
