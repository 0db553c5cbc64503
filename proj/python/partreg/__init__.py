"""Body-aware part regression toolkit."""

from ._partreg import *  # noqa: F401,F403
from ._partreg import (  # noqa: F401
    DegenerateGeometry,
    EmptyPart,
    FormatError,
    InvalidArgument,
    __doc__,
)
