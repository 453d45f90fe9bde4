"""Return times to sets, ball-return scaling against the exponent bound,
nonlacunarity diagnostics, and Birkhoff indicator averages.

The ball-return time has two estimators.  The lattice estimator marches a
grid of sample points from inside the ball and reports the first step at
which a sample comes back within the radius; it is the generic method and
converges to the set-return time from above as the grid grows.  For the
linear cat map the image of the ball is known exactly (an ellipse flattened
onto the unstable line), so a segment estimator measures the wrapped
distance from that line segment to the center analytically; this is the
method of choice for small radii, where any fixed point lattice is far too
coarse to witness the first set intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    CAT_LAMBDA_S,
    CAT_LAMBDA_U,
    Point2,
    Space,
    SystemKind,
    SystemSpec,
    dist_rows,
    orbit_array,
    step_array,
    step_inverse_xy,
    step_xy,
    wrap_half,
)
from .errors import PreconditionError

_SQRT5 = math.sqrt(5.0)
# unit unstable eigenvector of [[2,1],[1,1]]
_CAT_VU = np.array([1.0, (_SQRT5 - 1.0) / 2.0])
_CAT_VU /= np.linalg.norm(_CAT_VU)


@dataclass
class SetSpec:
    """A membership-testable subset of phase space.

    kinds: "ball" (metric ball), "cover" (union of equal-radius balls),
    "block" (points whose hyperbolicity-block index is finite and small).
    """

    kind: str
    centers: np.ndarray = None
    radius: float = 0.0
    space: Space = Space.TORUS2
    block_args: tuple = None  # (system, params, max_k) for kind="block"

    @classmethod
    def empty(cls, space=Space.TORUS2) -> "SetSpec":
        return cls(kind="empty", space=space)

    @classmethod
    def ball(cls, center: Point2, radius: float) -> "SetSpec":
        return cls(
            kind="ball",
            centers=center.as_array()[None, :],
            radius=float(radius),
            space=center.space,
        )

    @classmethod
    def cover_balls(cls, centers: np.ndarray, radius: float, space=Space.TORUS2) -> "SetSpec":
        return cls(kind="cover", centers=np.asarray(centers, float), radius=float(radius), space=space)

    @classmethod
    def block(cls, system: SystemSpec, params, max_k: int) -> "SetSpec":
        return cls(kind="block", space=system.space, block_args=(system, params, max_k))

    def membership(self, p: Point2) -> bool:
        if self.kind == "block":
            from .lyapunov import pesin_block_index

            system, params, max_k = self.block_args
            k = pesin_block_index(system, p, params)
            return k is not None and k <= max_k
        return bool(self.membership_rows(p.as_array()[None, :])[0])

    def membership_rows(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (n, 2) array of coordinates."""
        if self.kind == "empty":
            return np.zeros(len(pts), dtype=bool)
        if self.kind == "block":
            system, params, max_k = self.block_args
            sp = self.space
            return np.array([self.membership(Point2(r[0], r[1], sp)) for r in pts])
        d = pts[:, None, :] - self.centers[None, :, :]
        if self.space is Space.TORUS2:
            d = wrap_half(d)
        dist2 = (d * d).sum(axis=2)
        return (dist2 <= self.radius * self.radius).any(axis=1)

    def to_json(self) -> dict:
        if self.kind == "block":
            system, params, max_k = self.block_args
            return {"kind": "block", "max_k": max_k, "params": params.to_json()}
        if self.kind == "empty":
            return {"kind": "empty"}
        return {
            "kind": self.kind,
            "radius": self.radius,
            "n_centers": len(self.centers),
        }


@dataclass
class ReturnTimeSequence:
    """Two-sided visit times of an orbit to a set; t_0 = 0 is implicit."""

    center: Point2
    gamma: SetSpec
    forward: np.ndarray  # strictly increasing positive ints
    backward: np.ndarray  # strictly decreasing negative ints
    horizon: int

    def t(self, i: int) -> int:
        """Visit time t_i, with t_0 = 0."""
        if i == 0:
            return 0
        if i > 0:
            return int(self.forward[i - 1])
        return int(self.backward[-i - 1])

    @property
    def count_fwd(self) -> int:
        return len(self.forward)

    @property
    def count_bwd(self) -> int:
        return len(self.backward)


def return_times(
    system: SystemSpec,
    x: Point2,
    gamma: SetSpec,
    count_fwd: int,
    count_bwd: int,
    horizon: int,
) -> ReturnTimeSequence:
    """First count_fwd forward and count_bwd backward visit times of x to
    gamma within +-horizon (partial if the budget runs out first)."""
    if not gamma.membership(x):
        raise PreconditionError("return_times requires x in gamma (t_0 = 0)")
    fwd = _visit_times(system, x, gamma, count_fwd, horizon, forward=True)
    bwd = _visit_times(system, x, gamma, count_bwd, horizon, forward=False)
    # when the count budget binds before the time budget, the sequence is
    # only complete up to its last listed time
    eff_horizon = horizon if len(fwd) < count_fwd else min(horizon, fwd[-1])
    return ReturnTimeSequence(
        center=x,
        gamma=gamma,
        forward=np.asarray(fwd, dtype=np.int64),
        backward=-np.asarray(bwd, dtype=np.int64),
        horizon=eff_horizon,
    )


def _visit_times(system, x, gamma, count, horizon, forward, chunk=4096):
    if count <= 0:
        return []
    times = []
    cx, cy = x.x, x.y
    t = 0
    step = step_xy if forward else step_inverse_xy
    while t < horizon and len(times) < count:
        n = min(chunk, horizon - t)
        pts = np.empty((n, 2))
        for i in range(n):
            cx, cy = step(system, cx, cy)
            pts[i, 0] = cx
            pts[i, 1] = cy
        hits = np.nonzero(gamma.membership_rows(pts))[0]
        for h in hits:
            times.append(t + int(h) + 1)
            if len(times) >= count:
                break
        t += n
    return times


# ---------------------------------------------------------------------------
# ball return times


def first_return_time_ball(
    system: SystemSpec,
    x: Point2,
    r: float,
    grid: int = 5,
    T_max: int = 1000,
    master_radius: float | None = None,
    method: str = "lattice",
):
    """Least k <= T_max at which the forward image of B(x, r) meets B(x, r)
    again, or None.

    method="lattice": march a grid x grid lattice of samples from the ball
    (the center is always a sample) and detect a sample returning within r
    of x.  When master_radius is given the lattice lives on the absolute
    grid of the master ball and is filtered to radius r, which makes sample
    sets nested across radii.

    method="segment": cat map only; treats f^k(B) as the exact line segment
    of half-length r * lambda_u^k along the unstable eigendirection and
    measures its wrapped distance to x, inflated by the r * lambda_s^k
    stable thickness.
    """
    if r <= 0 or grid < 1 or T_max < 1:
        raise ValueError("need r > 0, grid >= 1, T_max >= 1")
    if method == "segment":
        if system.kind is not SystemKind.CAT_MAP:
            raise ValueError("segment method requires the linear cat map")
        return _return_time_segment(x, r, T_max)
    if method != "lattice":
        raise ValueError(f"unknown method {method!r}")

    R = r if master_radius is None else float(master_radius)
    if grid == 1:
        offsets = np.zeros((1, 2))
    else:
        g = np.linspace(-R, R, grid)
        ox, oy = np.meshgrid(g, g, indexing="ij")
        offsets = np.column_stack((ox.ravel(), oy.ravel()))
        offsets = offsets[(offsets**2).sum(axis=1) <= r * r]
        if not (offsets == 0.0).all(axis=1).any():
            offsets = np.vstack(([0.0, 0.0], offsets))
    pts = x.as_array()[None, :] + offsets
    if system.space is Space.TORUS2:
        pts = pts % 1.0
    target = x.as_array()[None, :]
    for k in range(1, T_max + 1):
        pts = step_array(system, pts)
        d = dist_rows(system.space, pts, target)
        if (d <= r).any():
            return k
    return None


def _return_time_segment(x, r, T_max):
    c = x.as_array()
    z = c.copy()
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    for k in range(1, T_max + 1):
        z = (A @ z) % 1.0
        delta = wrap_half(z - c)
        half_len = r * CAT_LAMBDA_U**k
        d = _segment_lattice_distance(delta, half_len)
        if d <= r * (1.0 + CAT_LAMBDA_S**k):
            return k
    return None


def _segment_lattice_distance(c, T, chunk=2_000_000):
    """Min distance from the segment {c + t * vu : |t| <= T} to the integer
    lattice (equivalently: from the wrapped segment to the origin)."""
    vu = _CAT_VU
    n = max(2, int(math.ceil(2 * T / 0.2)) + 1)
    best = math.inf
    offs = [
        np.array([i, j], float) for i in (-1.0, 0.0, 1.0) for j in (-1.0, 0.0, 1.0)
    ]
    spacing = 2 * T / (n - 1)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        tt = -T + spacing * np.arange(start, stop)
        P = c[None, :] + tt[:, None] * vu[None, :]
        Q = np.round(P)
        for off in offs:
            L = Q + off[None, :]
            dvec = L - c[None, :]
            tproj = dvec @ vu
            np.clip(tproj, -T, T, out=tproj)
            rx = dvec[:, 0] - tproj * vu[0]
            ry = dvec[:, 1] - tproj * vu[1]
            m = math.sqrt(float(np.min(rx * rx + ry * ry)))
            if m < best:
                best = m
    return best


@dataclass
class RecurrenceScalingReport:
    radii: list
    tau: list  # int or None per radius
    ratios: list  # float or None per radius (censored)
    censored: list
    limsup_estimate: float
    bound: float
    grid: int
    method: str
    T_max: int
    any_censored: bool = False

    def to_json(self) -> dict:
        return {
            "radii": self.radii,
            "tau": self.tau,
            "ratios": self.ratios,
            "censored": self.censored,
            "limsup_estimate": self.limsup_estimate,
            "bound": self.bound,
            "grid": self.grid,
            "method": self.method,
            "T_max": self.T_max,
            "any_censored": self.any_censored,
        }


def recurrence_scaling(
    system: SystemSpec,
    x: Point2,
    radii,
    grid: int,
    T_max: int,
    spectrum,
    method: str = "auto",
) -> RecurrenceScalingReport:
    """Ball-return ratios tau(r) / (-log r) against the exponent bound
    1/lambda_u - 1/lambda_s; the limsup estimate is the max of the last
    three uncensored ratios.  Censored radii (no return by T_max) are
    flagged and excluded, never clamped."""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly descending")
    if radii[-1] < 1e-6:
        raise ValueError("smallest radius below the 1e-6 floating-point floor")
    if method == "auto":
        method = "segment" if system.kind is SystemKind.CAT_MAP else "lattice"
    master = radii[0] if method == "lattice" else None
    taus = []
    ratios = []
    censored = []
    for r in radii:
        tau = first_return_time_ball(
            system, x, r, grid=grid, T_max=T_max, master_radius=master, method=method
        )
        taus.append(tau)
        censored.append(tau is None)
        ratios.append(None if tau is None else tau / (-math.log(r)))
    good = [q for q in ratios if q is not None]
    limsup = max(good[-3:]) if good else math.nan
    bound = 1.0 / spectrum.lambda_u - 1.0 / spectrum.lambda_s
    return RecurrenceScalingReport(
        radii=radii,
        tau=taus,
        ratios=ratios,
        censored=censored,
        limsup_estimate=limsup,
        bound=bound,
        grid=grid,
        method=method,
        T_max=T_max,
        any_censored=any(censored),
    )


# ---------------------------------------------------------------------------
# nonlacunarity


@dataclass
class NonlacunarityProfile:
    ratios_fwd: np.ndarray  # entry i-1 is t_{i+1} / t_i
    ratios_two_sided: np.ndarray  # entry i-1 is (t_{i+1} - t_{-i-1}) / (t_i - t_{-i})
    tail_deviation: dict  # threshold i0 -> sup_{i >= i0} |ratio_fwd - 1|

    def to_json(self) -> dict:
        return {
            "ratios_fwd": self.ratios_fwd.tolist(),
            "ratios_two_sided": self.ratios_two_sided.tolist(),
            "tail_deviation": {str(k): v for k, v in self.tail_deviation.items()},
        }


def nonlacunarity_profile(seq: ReturnTimeSequence, thresholds=(10, 20, 50, 100)) -> NonlacunarityProfile:
    """Consecutive-ratio diagnostics for the visit-time sequence."""
    t = seq.forward.astype(float)
    if len(t) < 3:
        raise PreconditionError("need at least 3 forward visit times")
    ratios_fwd = t[1:] / t[:-1]
    nb = min(len(t) - 1, len(seq.backward) - 1)
    if nb > 0:
        tm = seq.backward.astype(float)
        ratios_two = (t[1 : nb + 1] - tm[1 : nb + 1]) / (t[:nb] - tm[:nb])
    else:
        ratios_two = np.empty(0)
    dev = np.abs(ratios_fwd - 1.0)
    tail = {}
    for i0 in thresholds:
        # ratio entry j covers t_{j+2}/t_{j+1}; "from index i0 on" keeps
        # entries with lower index i >= i0
        if i0 - 1 < len(dev):
            tail[int(i0)] = float(dev[i0 - 1 :].max())
        else:
            tail[int(i0)] = None
    return NonlacunarityProfile(ratios_fwd=ratios_fwd, ratios_two_sided=ratios_two, tail_deviation=tail)


def interval_hit_check(seq: ReturnTimeSequence, epsilon: float, N_start: int = 1):
    """Smallest N >= N_start such that every n in [N, n_max] has a visit time
    in [n, n + n*epsilon), where n_max is the largest n whose window is
    verifiable within the sequence horizon.  None if the check still fails
    at n_max."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    times = seq.forward
    n_max = int(math.floor((seq.horizon + 1) / (1.0 + epsilon)))
    if n_max < N_start or len(times) == 0:
        return None
    n = np.arange(N_start, n_max + 1)
    idx = np.searchsorted(times, n, side="left")
    has_next = idx < len(times)
    nxt = np.where(has_next, times[np.minimum(idx, len(times) - 1)], np.iinfo(np.int64).max)
    ok = has_next & (nxt < n * (1.0 + epsilon))
    if ok.all():
        return int(N_start)
    last_fail = int(n[~ok][-1])
    if last_fail == n_max:
        return None
    return last_fail + 1


def birkhoff_indicator_average(system: SystemSpec, x: Point2, gamma: SetSpec, horizon: int) -> float:
    """Fraction of the first `horizon` forward iterates (starting at x itself)
    that land in gamma."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    count = 0
    cx, cy = x.x, x.y
    t = 0
    chunk = 8192
    while t < horizon:
        n = min(chunk, horizon - t)
        pts = np.empty((n, 2))
        for i in range(n):
            pts[i, 0] = cx
            pts[i, 1] = cy
            cx, cy = step_xy(system, cx, cy)
        count += int(gamma.membership_rows(pts).sum())
        t += n
    return count / horizon
