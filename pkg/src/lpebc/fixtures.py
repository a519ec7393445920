"""Reference channels used by the examples and the reproduce command.

Rows are indexed by N_1 and columns by N_2, both 0..2.
"""

from __future__ import annotations

import numpy as np

from .channel import JointChannelPmf

TWO_CORNERS = [
    [0.125, 0.0, 0.125],
    [0.25, 0.0, 0.25],
    [0.125, 0.0, 0.125],
]

THREE_CORNERS = [
    [0.0497, 0.2443, 0.0321],
    [0.1483, 0.2251, 0.1222],
    [0.0435, 0.0728, 0.0620],
]

OPTIMAL_FOUR_CORNERS = [
    [0.088, 0.178, 0.264],
    [0.011, 0.018, 0.075],
    [0.131, 0.110, 0.125],
]


def symmetric_channel(x1, x2, x3, x4) -> JointChannelPmf:
    """Symmetric two-layer channel where users either agree on layer 2 or both miss it."""
    return JointChannelPmf(np.array([
        [x1, x2, 0.0],
        [x2, x3, 0.0],
        [0.0, 0.0, x4],
    ]))


FIXTURES = {
    "example1": TWO_CORNERS,
    "example2": THREE_CORNERS,
    "example3": OPTIMAL_FOUR_CORNERS,
    "symmetric": [[0.3, 0.2, 0.0], [0.2, 0.2, 0.0], [0.0, 0.0, 0.1]],
}


def fixture(name: str) -> JointChannelPmf:
    try:
        table = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(sorted(FIXTURES))}") from None
    return JointChannelPmf(np.array(table))
