from ._figures import *  # noqa
from ._palettes import *  # noqa
