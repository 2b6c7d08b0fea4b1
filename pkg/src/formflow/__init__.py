"""Symbolic-numeric exterior calculus for continuous topological evolution.

Submodules build on each other: expression kernel (expr, parse), forms and
vector fields (forms), Pfaff sequence and torsion diagnostics (pfaff),
chain integration (chains), thermodynamic classification (thermo), finite
point-set topology (finite_topology), and bundled model systems (systems).
"""

__version__ = "0.1.0"

from . import chains, expr, finite_topology, forms, parse, pfaff, systems, thermo

__all__ = [
    "__version__",
    "chains",
    "expr",
    "finite_topology",
    "forms",
    "parse",
    "pfaff",
    "systems",
    "thermo",
]
