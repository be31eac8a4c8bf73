"""Parametric parallel-jaw gripper geometry and the end-effector registry.

Gripper frame convention: +z is the approach axis, +x the closing axis,
and the fingertip plane sits at z = 0. Finger bodies extend from z = 0
down to z = -finger_depth; the palm sits behind them. Multi-finger
hands in the registry are reduced to parallel-jaw envelopes with two
opposing contact faces.
"""

from __future__ import annotations

from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple

import numpy as np

from .errors import FormatError, ParameterError
from .se3 import RigidTransform, compose, translation


@dataclass(frozen=True)
class GripperModel:
    """Parallel-jaw envelope: two finger boxes plus a palm box.

    finger_halfextents: (hx, hy, hz) half sizes of one finger box along
    the closing / lateral / approach axes; the finger is 2*hx thick and
    2*hz deep. palm_offset is the gap between the finger bodies' back
    plane and the palm box center.
    """

    name: str
    max_opening: float              # mm
    min_opening: float              # mm
    finger_halfextents: tuple       # (hx, hy, hz) mm
    palm_halfextents: tuple         # mm
    palm_offset: float              # mm
    finger_friction: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.min_opening < self.max_opening):
            raise ParameterError(
                f"{self.name}: need 0 <= min_opening < max_opening")
        if min(self.finger_halfextents) <= 0 or min(self.palm_halfextents) <= 0:
            raise ParameterError(f"{self.name}: box extents must be positive")
        if self.finger_friction <= 0:
            raise ParameterError(f"{self.name}: friction must be positive")

    @property
    def finger_depth(self) -> float:
        return 2.0 * self.finger_halfextents[2]


@dataclass(frozen=True)
class GripperPose:
    t_w2g: RigidTransform
    opening: float                  # mm


class OrientedBox(NamedTuple):
    pose: RigidTransform            # box center frame in world
    halfextents: np.ndarray


def finger_boxes(g: GripperModel, pose: GripperPose):
    """World-frame (left finger, right finger, palm) boxes at the pose's
    commanded opening. Inner finger faces sit exactly `opening` apart."""
    if not (g.min_opening <= pose.opening <= g.max_opening):
        raise ParameterError(
            f"opening {pose.opening} outside stroke "
            f"[{g.min_opening}, {g.max_opening}] of {g.name}")
    hx, hy, hz = g.finger_halfextents
    cx = pose.opening / 2.0 + hx
    fh = np.asarray(g.finger_halfextents, dtype=np.float64)
    ph = np.asarray(g.palm_halfextents, dtype=np.float64)
    left = OrientedBox(compose(pose.t_w2g, translation([-cx, 0.0, -hz])), fh)
    right = OrientedBox(compose(pose.t_w2g, translation([cx, 0.0, -hz])), fh)
    palm_z = -(g.finger_depth + g.palm_offset)
    palm = OrientedBox(compose(pose.t_w2g, translation([0.0, 0.0, palm_z])), ph)
    return left, right, palm


def _parse_gripper(name: str, section) -> GripperModel:
    def floats(key, n):
        if key not in section:
            raise FormatError(f"gripper {name!r}: missing key {key!r}")
        try:
            vals = [float(x) for x in section[key].split()]
        except ValueError:
            raise FormatError(f"gripper {name!r}: bad number in {key!r}")
        if len(vals) != n:
            raise FormatError(f"gripper {name!r}: {key!r} needs {n} values")
        return vals

    try:
        return GripperModel(
            name=name,
            max_opening=floats("max_opening_mm", 1)[0],
            min_opening=floats("min_opening_mm", 1)[0],
            finger_halfextents=tuple(floats("finger_halfextents_mm", 3)),
            palm_halfextents=tuple(floats("palm_halfextents_mm", 3)),
            palm_offset=floats("palm_offset_mm", 1)[0],
            finger_friction=floats("friction", 1)[0],
        )
    except ParameterError as e:
        raise FormatError(f"gripper {name!r}: {e}")


def load_gripper_registry(path=None):
    """Load gripper models from a key-value config (one section per
    gripper). With no path, the registry shipped in the package is used."""
    cp = ConfigParser()
    try:
        if path is None:
            text = resources.files("graspgauge").joinpath(
                "configs/grippers.cfg").read_text()
            cp.read_string(text)
        else:
            with open(path) as f:
                cp.read_file(f)
    except ConfigParserError as e:
        raise FormatError(f"gripper registry: {e}")
    names = cp.sections()
    if not names:
        raise FormatError("gripper registry defines no grippers")
    return [_parse_gripper(name, cp[name]) for name in names]


def registry_by_name(path=None) -> dict:
    return {g.name: g for g in load_gripper_registry(path)}
