from ._errors import *  # noqa
from ._params import *  # noqa
from .agent import *  # noqa
from .codec import *  # noqa
from .controller import *  # noqa
from .crypto import *  # noqa
from .pipeline import *  # noqa
from .simnet import *  # noqa

__version__ = '0.1.0'
