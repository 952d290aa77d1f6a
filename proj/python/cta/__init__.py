from ._cta import *  # noqa: F401,F403
