from ._keys import *  # noqa
from ._sa import *  # noqa
from ._suites import *  # noqa
from ._tunnel import *  # noqa
