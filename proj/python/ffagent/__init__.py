"""Text-driven video fast-forwarding: cross-modal encoder and skipping agent."""

try:
    from ._ffagent import *  # noqa: F401,F403  (installed layout)
    from ._ffagent import __doc__ as _doc
except ImportError:  # in-tree build: extension sits on PYTHONPATH
    from _ffagent import *  # noqa: F401,F403
    from _ffagent import __doc__ as _doc

__doc__ = _doc
__version__ = "0.1.0"
