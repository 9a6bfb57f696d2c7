"""Frame-wise driver-state feature schema.

Every frame is a 41-value vector laid out in a fixed group order:

    F  foot activity            5   [0:5]
    G  gaze zone                8   [5:13]
    H  hand activity (L, R)    12   [13:25]
    S  wrist-to-wheel dist (L, R) 2 [25:27]
    O  hand-held object (L, R) 14   [27:41]

A :class:`FeatureMask` selects a subset of groups; surviving groups keep
this order.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

PROB_TOL = 1e-6

GAZE_ZONES = (
    "forward",
    "left_mirror",
    "lap",
    "speedometer",
    "infotainment",
    "rearview_mirror",
    "right_mirror",
    "over_shoulder",
)
HAND_ACTIVITIES = ("lap", "air", "hovering_wheel", "wheel", "cupholder", "infotainment")
HAND_OBJECTS = ("none", "phone", "tablet", "food", "beverage", "book", "other")
FOOT_ACTIVITIES = ("away", "brake", "gas", "hover_brake", "hover_gas")

GROUP_ORDER = ("foot", "gaze", "hand", "stereo", "object")
GROUP_SIZES = {
    "foot": len(FOOT_ACTIVITIES),
    "gaze": len(GAZE_ZONES),
    "hand": 2 * len(HAND_ACTIVITIES),
    "stereo": 2,
    "object": 2 * len(HAND_OBJECTS),
}
GROUP_LETTERS = {"foot": "F", "gaze": "G", "hand": "H", "stereo": "S", "object": "O"}
FULL_DIM = sum(GROUP_SIZES.values())


def _offsets():
    out, start = {}, 0
    for g in GROUP_ORDER:
        out[g] = slice(start, start + GROUP_SIZES[g])
        start += GROUP_SIZES[g]
    return out


GROUP_SLICES = _offsets()


class InvalidMaskError(ValueError):
    pass


@dataclass(frozen=True)
class GazeFeatures:
    zone_probs: tuple[float, ...]


@dataclass(frozen=True)
class HandFeatures:
    activity_probs_left: tuple[float, ...]
    activity_probs_right: tuple[float, ...]


@dataclass(frozen=True)
class HandObjectFeatures:
    object_probs_left: tuple[float, ...]
    object_probs_right: tuple[float, ...]


@dataclass(frozen=True)
class StereoHandFeatures:
    dist_left_m: float
    dist_right_m: float


@dataclass(frozen=True)
class FootFeatures:
    activity_probs: tuple[float, ...]


@dataclass(frozen=True)
class FrameFeatures:
    gaze: GazeFeatures
    hands: HandFeatures
    objects: HandObjectFeatures
    stereo: StereoHandFeatures
    foot: FootFeatures
    timestamp_s: float = 0.0

    def to_vector(self) -> np.ndarray:
        """Full 41-value vector in canonical F, G, H, S, O order."""
        return np.array(
            [
                *self.foot.activity_probs,
                *self.gaze.zone_probs,
                *self.hands.activity_probs_left,
                *self.hands.activity_probs_right,
                self.stereo.dist_left_m,
                self.stereo.dist_right_m,
                *self.objects.object_probs_left,
                *self.objects.object_probs_right,
            ],
            dtype=float,
        )

    @classmethod
    def from_vector(cls, vec, timestamp_s: float = 0.0) -> "FrameFeatures":
        vec = [float(v) for v in vec]
        if len(vec) != FULL_DIM:
            raise ValueError(f"frame vector must have {FULL_DIM} values, got {len(vec)}")

        def part(group):
            return tuple(vec[GROUP_SLICES[group]])

        hand, obj = part("hand"), part("object")
        nh, no = len(HAND_ACTIVITIES), len(HAND_OBJECTS)
        left_d, right_d = part("stereo")
        return cls(
            gaze=GazeFeatures(part("gaze")),
            hands=HandFeatures(hand[:nh], hand[nh:]),
            objects=HandObjectFeatures(obj[:no], obj[no:]),
            stereo=StereoHandFeatures(left_d, right_d),
            foot=FootFeatures(part("foot")),
            timestamp_s=float(timestamp_s),
        )


@dataclass(frozen=True)
class FeatureMask:
    use_foot: bool = True
    use_gaze: bool = True
    use_hand: bool = True
    use_stereo: bool = True
    use_object: bool = True

    def groups(self) -> tuple[str, ...]:
        return tuple(g for g in GROUP_ORDER if getattr(self, f"use_{g}"))

    def columns(self) -> np.ndarray:
        """Column indices into a full-width frame matrix."""
        if not self.groups():
            raise InvalidMaskError("feature mask selects no groups")
        return np.concatenate([np.arange(GROUP_SLICES[g].start, GROUP_SLICES[g].stop) for g in self.groups()])

    @property
    def label(self) -> str:
        return "".join(GROUP_LETTERS[g] for g in self.groups()) or "-"

    @classmethod
    def from_label(cls, label: str) -> "FeatureMask":
        """Parse a string like ``"FGHSO"`` or ``"hs"`` (order-insensitive)."""
        letters = set(label.upper())
        unknown = letters - set(GROUP_LETTERS.values())
        if unknown:
            raise InvalidMaskError(f"unknown feature group letters: {''.join(sorted(unknown))}")
        mask = cls(**{f"use_{g}": GROUP_LETTERS[g] in letters for g in GROUP_ORDER})
        feature_dim(mask)
        return mask

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FULL_MASK = FeatureMask()


def feature_dim(mask: FeatureMask) -> int:
    groups = mask.groups()
    if not groups:
        raise InvalidMaskError("feature mask selects no groups")
    return sum(GROUP_SIZES[g] for g in groups)


def flatten(frame: FrameFeatures, mask: FeatureMask = FULL_MASK) -> np.ndarray:
    return frame.to_vector()[mask.columns()]


@dataclass(frozen=True)
class Violation:
    group: str
    message: str


def _check_probs(group: str, probs, size: int, out: list) -> None:
    p = np.asarray(probs, dtype=float)
    if p.shape != (size,):
        out.append(Violation(group, f"expected {size} values, got {p.size}"))
        return
    if not np.all(np.isfinite(p)):
        out.append(Violation(group, "non-finite probability"))
        return
    if np.any(p < 0.0) or np.any(p > 1.0):
        out.append(Violation(group, "probability outside [0, 1]"))
    if abs(p.sum() - 1.0) > PROB_TOL:
        out.append(Violation(group, f"probabilities sum to {p.sum():.9g}, not 1"))


def validate_frame(frame: FrameFeatures) -> list[Violation]:
    """Return every violated group invariant; an empty list means the frame is valid."""
    out: list[Violation] = []
    _check_probs("gaze", frame.gaze.zone_probs, len(GAZE_ZONES), out)
    _check_probs("hand", frame.hands.activity_probs_left, len(HAND_ACTIVITIES), out)
    _check_probs("hand", frame.hands.activity_probs_right, len(HAND_ACTIVITIES), out)
    _check_probs("object", frame.objects.object_probs_left, len(HAND_OBJECTS), out)
    _check_probs("object", frame.objects.object_probs_right, len(HAND_OBJECTS), out)
    _check_probs("foot", frame.foot.activity_probs, len(FOOT_ACTIVITIES), out)
    for side, d in (("left", frame.stereo.dist_left_m), ("right", frame.stereo.dist_right_m)):
        if not np.isfinite(d):
            out.append(Violation("stereo", f"{side} distance is not finite"))
        elif d < 0:
            out.append(Violation("stereo", f"{side} distance is negative ({d})"))
    return out


# (group, slice) pairs whose entries form one probability distribution
_PROB_BLOCKS = (
    ("foot", slice(0, 5)),
    ("gaze", slice(5, 13)),
    ("hand", slice(13, 19)),
    ("hand", slice(19, 25)),
    ("object", slice(27, 34)),
    ("object", slice(34, 41)),
)


def validate_matrix(frames: np.ndarray) -> list[Violation]:
    """Vectorized :func:`validate_frame` over an ``(n, 41)`` matrix.

    Reports at most one violation per kind per group, naming the first bad row.
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[1] != FULL_DIM:
        return [Violation("frame", f"expected (n, {FULL_DIM}) matrix, got {frames.shape}")]
    out: list[Violation] = []
    for group, sl in _PROB_BLOCKS:
        block = frames[:, sl]
        bad = ~np.isfinite(block).all(axis=1) | (block < 0).any(axis=1) | (block > 1).any(axis=1)
        bad |= np.abs(block.sum(axis=1) - 1.0) > PROB_TOL
        if bad.any():
            out.append(Violation(group, f"invalid probability distribution at row {int(np.argmax(bad))}"))
    d = frames[:, GROUP_SLICES["stereo"]]
    bad = ~np.isfinite(d).all(axis=1) | (d < 0).any(axis=1)
    if bad.any():
        out.append(Violation("stereo", f"negative or non-finite distance at row {int(np.argmax(bad))}"))
    return out


# Feature-combination rows of the ablation study, in reporting order.
ABLATION_LABELS = ("F", "G", "H", "HS", "HO", "HSO", "GHO", "GHSO", "FGHS", "FGHO", "FGHSO")
SINGLE_GROUP_LABELS = ("F", "G", "H", "S", "O")


def default_ablation_masks() -> list[FeatureMask]:
    return [FeatureMask.from_label(lbl) for lbl in ABLATION_LABELS]
