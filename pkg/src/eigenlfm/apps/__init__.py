from . import queueing

__all__ = ["queueing", "thermal"]
