from ._registers import *  # noqa
from ._switch import *  # noqa
from ._tables import *  # noqa
