from ._host import *  # noqa
from ._messages import *  # noqa
