"""Symbolic-numeric calculus for operators R_g T_w A built from metaplectic
and Heisenberg-Weyl operators and Shubin pseudodifferential operators.

Numerical traces are computed in the Hermite basis of the harmonic
oscillator; localized residues are evaluated in closed form and compared
against the log coefficient of the numerical heat trace.
"""

__version__ = "0.1.0"
