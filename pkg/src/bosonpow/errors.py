"""Exception hierarchy shared by all modules."""


class BosonPowError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(BosonPowError, ValueError):
    pass


class SymmetryError(BosonPowError, ValueError):
    pass


class SingularityError(BosonPowError, ValueError):
    pass


class CapacityError(BosonPowError, ValueError):
    """A desk-scale size cap (state count, grid size, Hafnian order) was exceeded."""


class PhotonNumberError(BosonPowError, ValueError):
    pass


class ParameterError(BosonPowError, ValueError):
    pass


class ConfigError(BosonPowError, ValueError):
    pass


class ValidityError(BosonPowError, ValueError):
    """A formula was asked for outside its stated regime of validity."""


class ProtocolError(BosonPowError):
    """A consensus-round rule was violated (wrong phase, reused beacon, ...)."""


class PhaseError(ProtocolError):
    pass


class ChainError(BosonPowError):
    pass
