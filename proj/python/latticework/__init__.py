"""Python bindings for the latticework behavior-lattice engine."""

try:
    from . import _latticework as _core
except ImportError:  # build tree: extension sits next to the package, not in it
    import _latticework as _core

Engine = _core.Engine
LatticeworkError = _core.LatticeworkError
validate_lattice = _core.validate_lattice
descendants = _core.descendants
segment_sessions = _core.segment_sessions

__all__ = ["Engine", "LatticeworkError", "validate_lattice", "descendants", "segment_sessions"]


def error_code(exc: Exception) -> str:
    """Machine-readable code of a LatticeworkError, e.g. "InvalidStatus"."""
    return exc.args[0] if exc.args else ""
