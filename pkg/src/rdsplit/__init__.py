"""Complex-coefficient operator splitting for 1D periodic reaction-diffusion problems.

Modules
-------
spectral       periodic grids and Fourier derivatives
special        principal-branch Lambert W
subflows       exact and midpoint flows of the split operators
compositions   splitting schemes, scheme files and time stepping
problems       named problem presets
harness        references, error norms, convergence studies, CSV IO
erroranalysis  leading local error of Strang splitting
cli            command-line entry point
"""

__version__ = "0.1.0"
