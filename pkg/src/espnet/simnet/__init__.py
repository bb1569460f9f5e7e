from ._net import *  # noqa
from ._report import *  # noqa
from ._runner import *  # noqa
from ._scenario import *  # noqa
from ._timings import *  # noqa
