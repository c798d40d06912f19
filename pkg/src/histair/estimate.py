"""Statistical estimation of rotation and translation from match candidates.

Rotation votes are the per-candidate orientation differences; translation
votes are the residuals of the moving centroids against the rotated
reference centroids. Each vote set is histogrammed and the winning bin's
in-bin mean gives the estimate, which is what grants sub-bin precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import wrap_180
from .matching import MatchCandidate

__all__ = [
    "RigidTransform",
    "VoteConfig",
    "EstimationError",
    "VoteDiagnostics",
    "rotation_matrix",
    "estimate_rotation",
    "estimate_translation",
    "estimate_transform",
]


class EstimationError(RuntimeError):
    """Raised when the vote histograms cannot support an estimate."""

    def __init__(self, message: str, vote_count: int = 0):
        super().__init__(message)
        self.vote_count = vote_count


def rotation_matrix(theta_deg: float) -> np.ndarray:
    """2x2 rotation acting on (x, y) image coordinates with y pointing down.

    Positive angles turn content counter-clockwise as displayed on screen.
    """
    c = math.cos(math.radians(theta_deg))
    s = math.sin(math.radians(theta_deg))
    return np.array([[c, s], [-s, c]])


def image_center(dims: tuple[int, int]) -> np.ndarray:
    """Rotation center ((w-1)/2, (h-1)/2) for an image of (width, height)."""
    w, h = dims
    return np.array([(w - 1) / 2.0, (h - 1) / 2.0])


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (degrees, counter-clockwise positive on screen) about the
    reference-image center plus a pixel translation, mapping reference
    points to moving points: p2 = R(theta) (p1 - c) + c + (dx, dy)."""

    theta_deg: float
    dx: float
    dy: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.theta_deg, self.dx, self.dy))):
            raise ValueError("transform parameters must be finite")

    def apply(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        """Map (n, 2) reference (x, y) points to moving coordinates."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rot = rotation_matrix(self.theta_deg)
        return (pts - center) @ rot.T + center + np.array([self.dx, self.dy])


@dataclass(frozen=True)
class VoteConfig:
    theta_bin_deg: float = 1.0
    theta_consistency_deg: float = 2.0
    shift_bin_px: float = 1.0
    min_votes: int = 3

    def __post_init__(self):
        for name in ("theta_bin_deg", "theta_consistency_deg", "shift_bin_px", "min_votes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class BinVote:
    """Outcome of one histogram vote: winning bin center, its occupancy, the
    refined in-bin mean and the total number of votes cast."""

    winning_center: float
    winning_count: int
    refined: float
    vote_count: int
    bins: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class VoteDiagnostics:
    rotation: BinVote
    shift_x: BinVote
    shift_y: BinVote
    anisotropic_count: int
    consistent_count: int


def _mode_vote(values: np.ndarray, bin_width: float, min_votes: int, what: str) -> BinVote:
    """Histogram ``values`` into bins centered on multiples of ``bin_width``
    and return the winning bin refined by its in-bin mean.

    Winners are the most occupied bin; ties prefer the bin nearer zero and
    then the negative side.
    """
    if len(values) < min_votes:
        raise EstimationError(
            f"{what}: only {len(values)} votes, need at least {min_votes}", len(values)
        )
    idx = np.floor(values / bin_width + 0.5).astype(np.int64)
    centers, counts = np.unique(idx, return_counts=True)
    order = sorted(
        range(len(centers)),
        key=lambda k: (-counts[k], abs(centers[k] * bin_width), centers[k] * bin_width),
    )
    win = order[0]
    if counts[win] < min_votes:
        raise EstimationError(
            f"{what}: winning bin holds {counts[win]} votes, need at least {min_votes}",
            int(counts[win]),
        )
    in_bin = values[idx == centers[win]]
    return BinVote(
        winning_center=float(centers[win] * bin_width),
        winning_count=int(counts[win]),
        refined=float(in_bin.mean()),
        vote_count=int(len(values)),
        bins={float(c * bin_width): int(n) for c, n in zip(centers, counts)},
    )


def _rotation_vote(candidates: list[MatchCandidate], cfg: VoteConfig) -> BinVote:
    d_thetas = np.array([c.d_theta for c in candidates if c.both_anisotropic])
    if len(d_thetas) < cfg.min_votes:
        raise EstimationError(
            f"rotation: only {len(d_thetas)} anisotropic candidates, "
            f"need at least {cfg.min_votes}",
            len(d_thetas),
        )
    return _mode_vote(d_thetas, cfg.theta_bin_deg, cfg.min_votes, "rotation")


def estimate_rotation(candidates: list[MatchCandidate], cfg: VoteConfig | None = None) -> float:
    """Modal orientation difference of the anisotropic candidates."""
    return _rotation_vote(candidates, cfg or VoteConfig()).refined


def _translation_votes(
    candidates: list[MatchCandidate],
    theta_deg: float,
    image1_dims: tuple[int, int],
    cfg: VoteConfig,
) -> np.ndarray:
    """Per-candidate shift votes c2 - (R(theta) (c1 - center) + center).

    Anisotropic candidates must agree with the estimated rotation;
    isotropic ones are admitted unconditionally since translation does not
    use their (undefined) orientation.
    """
    keep = [
        c
        for c in candidates
        if not c.both_anisotropic or abs(wrap_180(c.d_theta - theta_deg)) <= cfg.theta_consistency_deg
    ]
    if not keep:
        raise EstimationError("translation: no rotation-consistent candidates", 0)
    c1 = np.array([c.obj1.features.centroid for c in keep])
    c2 = np.array([c.obj2.features.centroid for c in keep])
    center = image_center(image1_dims)
    rot = rotation_matrix(theta_deg)
    return c2 - ((c1 - center) @ rot.T + center)


def estimate_translation(
    candidates: list[MatchCandidate],
    theta_deg: float,
    image1_dims: tuple[int, int],
    cfg: VoteConfig | None = None,
) -> tuple[float, float]:
    """Modal x and y shift of the rotation-consistent candidates."""
    cfg = cfg or VoteConfig()
    votes = _translation_votes(candidates, theta_deg, image1_dims, cfg)
    vx = _mode_vote(votes[:, 0], cfg.shift_bin_px, cfg.min_votes, "shift x")
    vy = _mode_vote(votes[:, 1], cfg.shift_bin_px, cfg.min_votes, "shift y")
    return vx.refined, vy.refined


def estimate_transform(
    candidates: list[MatchCandidate],
    image1_dims: tuple[int, int],
    cfg: VoteConfig | None = None,
) -> tuple[RigidTransform, VoteDiagnostics]:
    """Rotation then translation estimation with vote diagnostics."""
    cfg = cfg or VoteConfig()
    rot_vote = _rotation_vote(candidates, cfg)
    theta = rot_vote.refined
    votes = _translation_votes(candidates, theta, image1_dims, cfg)
    vx = _mode_vote(votes[:, 0], cfg.shift_bin_px, cfg.min_votes, "shift x")
    vy = _mode_vote(votes[:, 1], cfg.shift_bin_px, cfg.min_votes, "shift y")
    diag = VoteDiagnostics(
        rotation=rot_vote,
        shift_x=vx,
        shift_y=vy,
        anisotropic_count=sum(1 for c in candidates if c.both_anisotropic),
        consistent_count=len(votes),
    )
    return RigidTransform(theta_deg=theta, dx=vx.refined, dy=vy.refined), diag
