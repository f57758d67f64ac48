"""Spectral and time-domain solvers for ``u_t = D^{1-alpha} Lap u + f``.

Modules: :mod:`special_functions` (Mittag-Leffler), :mod:`fractional_oracle`
(time-stepped reference), :mod:`spectral_grid`, :mod:`linear_propagator`,
:mod:`semilinear_solver`, :mod:`fujita` and the command line in :mod:`cli`.
"""

from __future__ import annotations

__version__ = "0.1.0"
