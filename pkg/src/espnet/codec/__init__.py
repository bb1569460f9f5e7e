from ._checksum import *  # noqa
from ._esp import *  # noqa
from ._headers import *  # noqa
from ._hexdump import *  # noqa
from ._packet import *  # noqa
