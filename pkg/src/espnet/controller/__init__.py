from ._allocators import *  # noqa
from ._channel import *  # noqa
from ._controller import *  # noqa
from ._profiles import *  # noqa
from ._state import *  # noqa
from ._timing import *  # noqa
