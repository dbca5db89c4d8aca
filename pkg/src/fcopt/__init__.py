"""fcopt: multiplier extraction and estimate-constant diagnostics on finite
discretizations of constrained optimization and optimal-control problems.

The package provides

* gram-metrized finite-dimensional spaces and operators (``fcopt.spaces``),
* closed convex sets, projections and variation sampling (``fcopt.convex``),
* the penalty-functional multiplier pipeline (``fcopt.penalty``),
* estimate-constant / kernel diagnostics for operator families
  (``fcopt.diagnostics``),
* four worked control families: ordinary evolution systems
  (``fcopt.evolution``), 1-D elliptic systems (``fcopt.elliptic``),
  binary-tree SDE/BSDE models (``fcopt.tree``) and string-vibration
  observability (``fcopt.wave``),
* ready-made experiment drivers and a command line front end
  (``fcopt.experiments``, ``fcopt.cli``).
"""

__version__ = "0.1.0"
