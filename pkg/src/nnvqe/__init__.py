"""nnvqe: simulate variational quantum eigensolvers and train neural wavefunctions
on molecular Hamiltonians loaded from FCIDUMP files."""

__version__ = "0.1.0"
