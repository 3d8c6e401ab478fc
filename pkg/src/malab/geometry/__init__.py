from .clip import ClippedPolytope, NUMBA_AVAILABLE, box_rows, clip_halfspaces
from .ellipsoid import SANDWICH_FACTOR, JohnEllipsoid, inscribed_ellipsoid, mvee

__all__ = [
    "ClippedPolytope",
    "NUMBA_AVAILABLE",
    "box_rows",
    "clip_halfspaces",
    "SANDWICH_FACTOR",
    "JohnEllipsoid",
    "inscribed_ellipsoid",
    "mvee",
]
