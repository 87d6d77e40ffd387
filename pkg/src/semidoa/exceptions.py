#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Exception hierarchy for semidoa

Library code raises these; only the CLI turns them into exit codes.
"""


class SemidoaError(Exception):
    """Base class for all semidoa errors"""

    exit_code = 1


class ConfigurationError(SemidoaError, ValueError):
    """Invalid configuration file, flag or input file content"""

    exit_code = 2


class DomainError(SemidoaError, ValueError):
    """Argument outside the domain of an operation"""

    exit_code = 2


class DegenerateInputError(SemidoaError, ValueError):
    """Data that an estimator cannot work with (zero snapshots, rank deficiency)"""

    exit_code = 4


class NumericalError(SemidoaError, ArithmeticError):
    """Numerical failure inside a computation"""

    exit_code = 4


class PositiveDefinitenessError(NumericalError):
    """Matrix expected to be Hermitian positive definite is not"""


class NonConvergenceError(NumericalError):
    """Iterative solver did not reach its tolerance"""


class SingularMatrixError(NumericalError):
    """Matrix could not be factorized or inverted"""


class QuadratureError(NumericalError):
    """Adaptive integration did not converge"""


class StorageError(SemidoaError, OSError):
    """Failure reading or writing a data file"""

    exit_code = 3
