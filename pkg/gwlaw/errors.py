""" Exception types raised by gwlaw. """


class NumericalBreakdown(ArithmeticError):
    """ A factorization, eigensolver or residual check failed.

    Wraps the ``LinAlgError`` of numpy/scipy so callers only need to catch one type.
    """


class StructureError(ValueError):
    """ A variance profile has no consistent irreducible/bipartite block structure. """
