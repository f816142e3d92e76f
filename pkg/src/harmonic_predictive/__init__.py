"""
Harmonic-prior Bayesian predictive densities under alpha-divergence loss.

Layers:
- problem / numerics: the normal prediction problem and the numerical kernels
- marginal / predictive: marginal densities and predictive densities
- risk / domination: risk estimators, thresholds and domination experiments
- appendix_lab: hypercube-integral checks behind the superharmonicity results
- cli / commands: the command-line front end
"""

__version__ = "1.0.0"
