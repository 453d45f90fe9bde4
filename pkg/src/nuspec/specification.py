"""Certificate pipeline: cover construction over block points, empirical
transition bounds from one long sampling orbit, recurrence-index selection,
periodic pseudo-orbit assembly and refinement, and verification of the
certified orbit against the weighted dynamical ball.

The produced certificate states that the refined periodic point z of period
p = (t_plus - t_minus) + N stays within theta * q(f^j x)^{-2} of the orbit of
x for every j in [-m, n], with the gap K = (t_plus - t_minus) + M_k - m - n
recorded so that p <= m + n + K by construction.  Multi-segment certificates
cycle several such windows through connectors drawn from the same sampling
record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Point2, SystemSpec, dist_rows, orbit_array, step_xy, wrap_half
from .errors import (
    GapInfeasibleError,
    IncompleteMixingError,
    InsufficientHorizonError,
    PreconditionError,
    ResolutionError,
)
from .recurrence import ReturnTimeSequence, SetSpec, return_times
from .shadowing import assemble, newton_refine_periodic

_BIG = np.int64(2**62)


# ---------------------------------------------------------------------------
# slow-varying weights


@dataclass(frozen=True)
class SlowVaryingFn:
    """Positive weight whose per-step change is tested against e^eta.

    Constant weights satisfy the bound for any eta; modulated weights are a
    sinusoid in the x-coordinate and are checked, not assumed."""

    kind: str  # "constant" | "modulated"
    c: float
    eta: float
    amplitude: float = 0.0
    frequency: int = 1

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("base value c must be positive")
        if not (0.0 <= self.amplitude < 1.0):
            raise ValueError("amplitude must lie in [0, 1)")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @classmethod
    def constant(cls, c: float, eta: float) -> "SlowVaryingFn":
        return cls(kind="constant", c=c, eta=eta)

    @classmethod
    def modulated(cls, c: float, amplitude: float, frequency: int, eta: float) -> "SlowVaryingFn":
        return cls(kind="modulated", c=c, eta=eta, amplitude=amplitude, frequency=int(frequency))

    def value_rows(self, pts: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(len(pts), self.c)
        return self.c * (1.0 + self.amplitude * np.sin(2.0 * math.pi * self.frequency * pts[:, 0]))

    def value(self, p: Point2) -> float:
        return float(self.value_rows(p.as_array()[None, :])[0])

    def to_json(self) -> dict:
        out = {"kind": self.kind, "c": self.c, "eta": self.eta}
        if self.kind == "modulated":
            out["amplitude"] = self.amplitude
            out["frequency"] = self.frequency
        return out


def check_slow_varying(q: SlowVaryingFn, system: SystemSpec, x: Point2, m: int, n: int):
    """Worst one-step ratio of q along f^j(x), j in [-m, n-1], against e^eta.

    Returns (ok, worst_ratio)."""
    pts = orbit_array(system, x.x, x.y, n_fwd=n, n_bwd=m + 1)
    qv = q.value_rows(pts)
    # array index t corresponds to j = t - (m+1); interior j in [-m, n-1]
    t = np.arange(1, m + n + 1)
    up = qv[t + 1] / qv[t]
    down = qv[t - 1] / qv[t]
    worst = float(np.max(np.maximum(up, down))) if len(t) else 1.0
    return worst <= math.exp(q.eta) + 1e-12, worst


# ---------------------------------------------------------------------------
# cover over block points


@dataclass
class CoverSpec:
    centers: np.ndarray  # (r_count, 2)
    radius: float
    r_count: int
    delta: float  # requested diameter scale; radius < delta/2

    def locate(self, xy: np.ndarray) -> int:
        """Index of the nearest center, required to be within the radius."""
        d = wrap_half(self.centers - xy[None, :])
        dist2 = (d * d).sum(axis=1)
        i = int(np.argmin(dist2))
        if dist2[i] > self.radius * self.radius:
            raise ValueError("point is not inside any cover ball")
        return i

    def to_json(self) -> dict:
        return {"r_count": self.r_count, "radius": self.radius, "delta": self.delta}


def build_cover(system: SystemSpec, block_points, delta: float, max_centers: int = 256) -> CoverSpec:
    """Greedy net over the classified block points: centers are chosen so
    every block point lies within 0.49*delta of some center, which keeps the
    ball diameters strictly below delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    pts = []
    for bp in block_points:
        p = bp[0] if isinstance(bp, tuple) else bp
        pts.append([p.x, p.y])
    if not pts:
        raise ValueError("block_points must be non-empty")
    pts = np.asarray(pts, dtype=float)
    radius = 0.49 * delta
    centers = []
    for row in pts:
        if centers:
            d = wrap_half(np.asarray(centers) - row[None, :])
            if (d * d).sum(axis=1).min() <= radius * radius:
                continue
        centers.append(row.copy())
        if len(centers) > max_centers:
            raise ResolutionError(
                f"cover needs more than max_centers={max_centers} balls at "
                f"delta={delta}; retry with a larger delta"
            )
    centers = np.asarray(centers)
    return CoverSpec(centers=centers, radius=radius, r_count=len(centers), delta=delta)


# ---------------------------------------------------------------------------
# transition bounds from one sampling orbit


@dataclass
class TransitionBounds:
    """Minimal witnessed transition gaps between cover balls.

    X[i, j] is the least h in [T_floor, h_cap] at which the sampling orbit
    was seen in ball j at some time s and in ball i at time s + h.  In
    mixing mode X[i, j] is instead one past the largest unwitnessed gap, so
    every h in [X[i, j], h_cap] has a recorded witness.  M_k is the max of
    the X entries.  The sampling orbit itself is kept so connector points
    can be read back out of the record.
    """

    X: np.ndarray  # (r, r) int64
    M_k: int
    mixing_mode: bool
    T_floor: int
    h_cap: int
    witness_time: np.ndarray  # (r, r) time of y for the minimal-h witness
    sampling_orbit: np.ndarray  # (L, 2)
    mix_witnessed: np.ndarray | None = None  # (r, r, h_cap+1) bool
    mix_witness_time: np.ndarray | None = None  # (r, r, h_cap+1) int64

    def connector(self, dest: int, src: int):
        """Minimal witnessed (N, y_time) for a src -> dest transition."""
        N = int(self.X[dest, src])
        if self.mixing_mode:
            t = int(self.mix_witness_time[dest, src, N])
        else:
            t = int(self.witness_time[dest, src])
        return N, t

    def connector_at(self, dest: int, src: int, h: int):
        """Earliest witness y_time for an exact gap h, or None (mixing only)."""
        if not self.mixing_mode:
            raise GapInfeasibleError("exact-gap connectors require mixing_mode transitions")
        if not (self.T_floor <= h <= self.h_cap) or not self.mix_witnessed[dest, src, h]:
            return None
        return int(self.mix_witness_time[dest, src, h])

    def to_json(self) -> dict:
        return {
            "M_k": self.M_k,
            "mixing_mode": self.mixing_mode,
            "T_floor": self.T_floor,
            "h_cap": self.h_cap,
            "r_count": int(self.X.shape[0]),
            "sampling_orbit_length": int(len(self.sampling_orbit)),
        }


def _cover_events(orbit: np.ndarray, centers: np.ndarray, radius: float):
    """All (time, ball) incidences of the orbit with the cover, time-sorted."""
    r = len(centers)
    ncell = max(4, min(128, int(1.0 / max(radius, 1e-3))))
    cell_of = {}
    for ci in range(r):
        cx, cy = centers[ci]
        x_lo = math.floor((cx - radius) * ncell)
        x_hi = math.floor((cx + radius) * ncell)
        y_lo = math.floor((cy - radius) * ncell)
        y_hi = math.floor((cy + radius) * ncell)
        for gx in range(x_lo, x_hi + 1):
            for gy in range(y_lo, y_hi + 1):
                cell_of.setdefault((gx % ncell) * ncell + (gy % ncell), []).append(ci)
    cand = {k: np.asarray(v, dtype=np.int64) for k, v in cell_of.items()}

    ev_t = []
    ev_i = []
    chunk = 100_000
    r2 = radius * radius
    for start in range(0, len(orbit), chunk):
        pts = orbit[start : start + chunk]
        cid = (
            (np.floor(pts[:, 0] * ncell).astype(np.int64) % ncell) * ncell
            + np.floor(pts[:, 1] * ncell).astype(np.int64) % ncell
        )
        order = np.argsort(cid, kind="stable")
        sorted_cid = cid[order]
        bounds = np.nonzero(np.diff(sorted_cid))[0] + 1
        groups = np.split(order, bounds)
        for g in groups:
            key = int(cid[g[0]])
            cc = cand.get(key)
            if cc is None:
                continue
            d = wrap_half(pts[g][:, None, :] - centers[cc][None, :, :])
            hit_t, hit_c = np.nonzero((d * d).sum(axis=2) <= r2)
            if len(hit_t):
                ev_t.append(g[hit_t] + start)
                ev_i.append(cc[hit_c])
    if not ev_t:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    et = np.concatenate(ev_t)
    ei = np.concatenate(ev_i)
    order = np.lexsort((ei, et))
    return et[order], ei[order]


def estimate_transitions(
    system: SystemSpec,
    cover: CoverSpec,
    sampling_orbit_length: int,
    mixing_mode: bool = False,
    T_floor: int = 1,
    seed: int = 0,
    h_cap: int = 512,
    x0: Point2 | None = None,
) -> TransitionBounds:
    """Iterate one long orbit and record witnessed ball-to-ball transition
    gaps.  Raises IncompleteMixingError (listing the missing pairs) if some
    pair is never witnessed within h_cap."""
    if T_floor < 1:
        raise ValueError("T_floor must be >= 1")
    r = cover.r_count
    if mixing_mode and r > 128:
        raise ValueError(
            f"mixing_mode witness tables need r_count <= 128 (got {r}); "
            "use a larger delta for the cover"
        )
    if x0 is None:
        rng = np.random.default_rng(seed)
        x, y = rng.random(2)
        for _ in range(100):
            x, y = step_xy(system, x, y)
    else:
        x, y = x0.x, x0.y
    orbit = orbit_array(system, x, y, n_fwd=sampling_orbit_length - 1)
    et, ei = _cover_events(orbit, cover.centers, cover.radius)

    X = np.full((r, r), _BIG, dtype=np.int64)
    wit = np.full((r, r), -1, dtype=np.int64)
    mix_w = mix_t = None
    if mixing_mode:
        mix_w = np.zeros((r, r, h_cap + 1), dtype=bool)
        mix_t = np.full((r, r, h_cap + 1), _BIG, dtype=np.int64)

    last = np.full(r, np.int64(-(2**40)), dtype=np.int64)
    E = len(et)
    ptr = 0  # events visible for the min-gap update: time <= s - T_floor
    w0 = 0  # left edge of the mixing window: time >= s - h_cap
    i = 0
    while i < E:
        s = et[i]
        while ptr < E and et[ptr] <= s - T_floor:
            last[ei[ptr]] = et[ptr]
            ptr += 1
        if mixing_mode:
            while w0 < E and et[w0] < s - h_cap:
                w0 += 1
        j = i
        h_vec = s - last
        while j < E and et[j] == s:
            dest = ei[j]
            mask = (h_vec <= h_cap) & (h_vec < X[dest])
            if mask.any():
                X[dest][mask] = h_vec[mask]
                wit[dest][mask] = last[mask]
            if mixing_mode and w0 < ptr:
                vis_t = et[w0:ptr]
                vis_j = ei[w0:ptr]
                hh = s - vis_t
                mix_w[dest, vis_j, hh] = True
                np.minimum.at(mix_t[dest], (vis_j, hh), vis_t)
            j += 1
        i = j

    if mixing_mode:
        window = mix_w[:, :, T_floor : h_cap + 1]
        run = np.cumprod(window[:, :, ::-1], axis=2).sum(axis=2)
        missing = run == 0
        X_out = np.where(missing, _BIG, h_cap - run + 1).astype(np.int64)
    else:
        X_out = X
        missing = X == _BIG
    if missing.any():
        pairs = [tuple(int(v) for v in p) for p in np.argwhere(missing)[:20]]
        raise IncompleteMixingError(
            f"{int(missing.sum())} cover pair(s) never witnessed within h_cap="
            f"{h_cap} over {sampling_orbit_length} steps; first missing (i, j): {pairs}",
            missing_pairs=pairs,
        )
    return TransitionBounds(
        X=X_out,
        M_k=int(X_out.max()),
        mixing_mode=mixing_mode,
        T_floor=T_floor,
        h_cap=h_cap,
        witness_time=wit,
        sampling_orbit=orbit,
        mix_witnessed=mix_w,
        mix_witness_time=mix_t,
    )


# ---------------------------------------------------------------------------
# cover context: everything a certificate run needs


@dataclass
class CoverContext:
    system: SystemSpec
    cover: CoverSpec
    bounds: TransitionBounds
    gamma: SetSpec
    epsilon: float  # block-defect rate used for index selection
    block_params: object = None
    block_points: list = None
    block_fraction: float = 1.0  # classified fraction of the sampled points

    def to_json(self) -> dict:
        out = {
            "cover": self.cover.to_json(),
            "transitions": self.bounds.to_json(),
            "epsilon": self.epsilon,
            "block_fraction": self.block_fraction,
        }
        if self.block_params is not None:
            out["block_params"] = self.block_params.to_json()
        return out


def build_cover_context(
    system: SystemSpec,
    theta: float,
    seed: int = 0,
    spectrum=None,
    block_samples: int = 200,
    delta: float | None = None,
    max_centers: int = 256,
    sampling_orbit_length: int = 400_000,
    T_floor: int = 1,
    mixing_mode: bool = False,
    h_cap: int = 512,
    epsilon_ratio: float = 0.1,
    block_window=(200, 200, 50),
    spectrum_N: int = 100_000,
) -> CoverContext:
    """Assemble a certificate context: measure the spectrum, classify block
    points, net them with balls of diameter < delta (default 2*theta), and
    estimate transition bounds on one sampling orbit."""
    from .lyapunov import PesinBlockParams, block_sample, lyapunov_spectrum

    rng = np.random.default_rng(seed)
    if spectrum is None:
        x0 = Point2(rng.random(), rng.random(), system.space)
        spectrum = lyapunov_spectrum(system, x0, N=spectrum_N, qr_period=10)
    params = PesinBlockParams.from_spectrum(spectrum, epsilon_ratio=epsilon_ratio, window=block_window)
    samples = block_sample(system, params, block_samples, seed=seed + 1)
    classified = [(p, k) for p, k in samples if k is not None]
    if not classified:
        raise PreconditionError("no block points found; cannot build a cover")
    if delta is None:
        delta = 2.0 * theta
    cover = build_cover(system, classified, delta, max_centers=max_centers)
    bounds = estimate_transitions(
        system,
        cover,
        sampling_orbit_length,
        mixing_mode=mixing_mode,
        T_floor=T_floor,
        seed=seed + 2,
        h_cap=h_cap,
    )
    gamma = SetSpec.cover_balls(cover.centers, cover.radius, space=system.space)
    return CoverContext(
        system=system,
        cover=cover,
        bounds=bounds,
        gamma=gamma,
        epsilon=params.epsilon,
        block_params=params,
        block_points=classified,
        block_fraction=len(classified) / len(samples),
    )


def fixed_point_context(system: SystemSpec, fp: Point2, epsilon: float, radius: float = 0.02, length: int = 2000) -> CoverContext:
    """Degenerate context for a fixed point: one ball, sampling orbit pinned
    at the fixed point, every transition gap witnessed trivially."""
    cover = CoverSpec(centers=fp.as_array()[None, :], radius=radius, r_count=1, delta=2 * radius / 0.98)
    bounds = estimate_transitions(
        system, cover, length, mixing_mode=True, T_floor=1, h_cap=64, x0=fp
    )
    gamma = SetSpec.cover_balls(cover.centers, cover.radius, space=system.space)
    return CoverContext(system=system, cover=cover, bounds=bounds, gamma=gamma, epsilon=epsilon)


# ---------------------------------------------------------------------------
# recurrence-index selection


def select_indices(seq: ReturnTimeSequence, m: int, n: int, eta: float, epsilon: float):
    """Indices (l1, s1, l2, s2) with

        t_{-l1} < -m <= t_{-l1+1},        t_{l2} > n >= t_{l2-1},
        t_{-l1-s1} <= (1 + 2 eta/epsilon) t_{-l1} < t_{-l1-s1+1},
        t_{l2+s2} >= (1 + 2 eta/epsilon) t_{l2} > t_{l2+s2-1}.
    """
    if not (0 < eta <= epsilon / 2):
        raise PreconditionError("need 0 < eta <= epsilon/2")
    factor = 1.0 + 2.0 * eta / epsilon
    fwd = seq.forward
    pos = -seq.backward  # ascending positive magnitudes of backward times

    idx = int(np.searchsorted(fwd, n, side="right"))
    if idx >= len(fwd):
        raise InsufficientHorizonError(
            f"forward sequence exhausted before exceeding n={n}",
            required_horizon=int(factor * (n + 1) * 2) + 64,
        )
    l2 = idx + 1
    target_f = factor * float(fwd[l2 - 1])
    idx2 = int(np.searchsorted(fwd, target_f, side="left"))
    if idx2 >= len(fwd):
        raise InsufficientHorizonError(
            f"forward sequence exhausted before reaching {target_f:.0f}",
            required_horizon=int(target_f * 1.5) + 64,
        )
    s2 = idx2 - (l2 - 1)

    idx = int(np.searchsorted(pos, m, side="right"))
    if idx >= len(pos):
        raise InsufficientHorizonError(
            f"backward sequence exhausted before exceeding m={m}",
            required_horizon=int(factor * (m + 1) * 2) + 64,
        )
    l1 = idx + 1
    target_b = factor * float(pos[l1 - 1])
    idx2 = int(np.searchsorted(pos, target_b, side="left"))
    if idx2 >= len(pos):
        raise InsufficientHorizonError(
            f"backward sequence exhausted before reaching -{target_b:.0f}",
            required_horizon=int(target_b * 1.5) + 64,
        )
    s1 = idx2 + 1 - l1
    return l1, s1, l2, s2


# ---------------------------------------------------------------------------
# certificates


@dataclass
class NsCertificate:
    x: Point2
    m: int
    n: int
    theta: float
    eta: float
    q: SlowVaryingFn
    indices: tuple  # (l1, s1, l2, s2)
    t_minus: int
    t_plus: int
    connector_y: Point2
    connector_N: int
    set_dest: int
    set_src: int
    M_k: int
    K: int
    period: int
    z: Point2
    margins_j: np.ndarray
    margins_distance: np.ndarray
    margins_allowance: np.ndarray
    in_ball: bool
    first_violated_index: int | None
    ratio: float
    residual: float
    newton_iters: int
    below_resolution: bool
    delta: float
    solution_points: np.ndarray = None  # (period, 2); z sits at row 0

    def to_json(self, include_margins: bool = True) -> dict:
        out = {
            "x": [self.x.x, self.x.y],
            "m": self.m,
            "n": self.n,
            "theta": self.theta,
            "eta": self.eta,
            "q": self.q.to_json(),
            "indices": {"l1": self.indices[0], "s1": self.indices[1], "l2": self.indices[2], "s2": self.indices[3]},
            "t_minus": self.t_minus,
            "t_plus": self.t_plus,
            "connector": {"y": [self.connector_y.x, self.connector_y.y], "N": self.connector_N},
            "sets": {"dest": self.set_dest, "src": self.set_src},
            "M_k": self.M_k,
            "K": self.K,
            "period": self.period,
            "z": [self.z.x, self.z.y],
            "in_ball": self.in_ball,
            "first_violated_index": self.first_violated_index,
            "ratio": self.ratio,
            "residual": self.residual,
            "newton_iters": self.newton_iters,
            "below_resolution": self.below_resolution,
            "pseudo_orbit_delta": self.delta,
        }
        if include_margins:
            out["margins"] = {
                "j": self.margins_j.tolist(),
                "distance": self.margins_distance.tolist(),
                "allowance": self.margins_allowance.tolist(),
            }
        return out


def _certificate_window(system, x, m, n, eta, ctx, max_horizon=2_000_000):
    """Return times, selected indices, and the stored orbit window of x
    spanning [t_minus, t_plus]."""
    if not ctx.gamma.membership(x):
        raise PreconditionError("certificate base point must lie in the cover support")
    eps = ctx.epsilon
    factor = 1.0 + 2.0 * eta / eps
    H = int(factor * (max(m, n) + 64) * 2) + 256
    while True:
        seq = return_times(system, x, ctx.gamma, count_fwd=H, count_bwd=H, horizon=H)
        try:
            l1, s1, l2, s2 = select_indices(seq, m, n, eta, eps)
            break
        except InsufficientHorizonError as err:
            if H >= max_horizon:
                raise
            H = min(max_horizon, max(2 * H, (err.required_horizon or 0) + 128))
    t_minus = seq.t(-(l1 + s1))
    t_plus = seq.t(l2 + s2)
    xs = orbit_array(system, x.x, x.y, n_fwd=t_plus, n_bwd=-t_minus)
    return seq, (l1, s1, l2, s2), t_minus, t_plus, xs


def _check_q_along(q, xs, t_minus, m, n, eta):
    """Assert the slow-varying bound on the stored orbit window [-m-1, n+1]."""
    lo = max(0, (-m - 1) - t_minus)
    hi = min(len(xs) - 1, (n + 1) - t_minus)
    qv = q.value_rows(xs[lo : hi + 1])
    ratios = np.maximum(qv[1:] / qv[:-1], qv[:-1] / qv[1:])
    worst = float(ratios.max()) if len(ratios) else 1.0
    if worst > math.exp(eta) + 1e-12:
        raise PreconditionError(
            f"q is not eta-slow-varying along the orbit (worst ratio {worst:.6f} "
            f"> e^eta = {math.exp(eta):.6f})"
        )


def ns_certificate(
    system: SystemSpec,
    x: Point2,
    m: int,
    n: int,
    theta: float,
    eta: float,
    q: SlowVaryingFn,
    ctx: CoverContext,
    connector_gap: int | None = None,
    newton_tol: float = 1e-11,
) -> NsCertificate:
    """Produce one certificate for the orbit window [-m, n] of x.

    connector_gap forces an exact connector length (mixing-mode transitions
    required), which shifts the period to (t_plus - t_minus) + connector_gap;
    otherwise the minimal witnessed connector is used and p <= m + n + K.
    A certificate with in_ball=False is a valid result, not an error.
    """
    if abs(q.eta - eta) > 1e-12:
        raise ValueError("q.eta must equal the certificate eta")
    seq, indices, t_minus, t_plus, xs = _certificate_window(system, x, m, n, eta, ctx)
    _check_q_along(q, xs, t_minus, m, n, eta)

    dest = ctx.cover.locate(xs[0])
    src = ctx.cover.locate(xs[-1])
    if connector_gap is None:
        N, t_w = ctx.bounds.connector(dest, src)
    else:
        N = int(connector_gap)
        t_w = ctx.bounds.connector_at(dest, src, N)
        if t_w is None:
            raise GapInfeasibleError(
                f"no witnessed transition of exact gap {N} for pair ({dest}, {src})"
            )
    y_pts = ctx.bounds.sampling_orbit[t_w : t_w + N + 1].copy()

    sp = system.space
    seg_x = (Point2(float(xs[0, 0]), float(xs[0, 1]), sp), t_plus - t_minus, xs)
    seg_y = (Point2(float(y_pts[0, 0]), float(y_pts[0, 1]), sp), N, y_pts)
    po, _ = assemble([seg_x, seg_y], system, periodic=True)
    sol = newton_refine_periodic(system, po, tol=newton_tol)
    p = sol.period

    j_arr = np.arange(-m, n + 1)
    rows = j_arr - t_minus
    zrows = sol.points[rows % p]
    xrows = xs[rows]
    d = dist_rows(sp, zrows, xrows)
    allowance = theta * q.value_rows(xrows) ** (-2.0)
    ok = d < allowance
    in_ball = bool(ok.all())
    first_bad = None if in_ball else int(j_arr[np.nonzero(~ok)[0][0]])

    K = (t_plus - t_minus) + ctx.bounds.M_k - m - n
    if connector_gap is None and p > m + n + K:
        raise AssertionError("certificate arithmetic violated: p > m + n + K")
    z_index = (-t_minus) % p
    below = theta * float(np.min(q.value_rows(xrows) ** (-2.0))) < 10.0 * max(sol.residual, 5e-16)
    return NsCertificate(
        x=x,
        m=m,
        n=n,
        theta=theta,
        eta=eta,
        q=q,
        indices=indices,
        t_minus=int(t_minus),
        t_plus=int(t_plus),
        connector_y=Point2(float(y_pts[0, 0]), float(y_pts[0, 1]), sp),
        connector_N=N,
        set_dest=dest,
        set_src=src,
        M_k=ctx.bounds.M_k,
        K=int(K),
        period=p,
        z=sol.point(z_index),
        margins_j=j_arr,
        margins_distance=d,
        margins_allowance=allowance,
        in_ball=in_ball,
        first_violated_index=first_bad,
        ratio=K / (m + n),
        residual=sol.residual,
        newton_iters=sol.newton_iters,
        below_resolution=below,
        delta=po.delta,
        solution_points=np.roll(sol.points, -z_index, axis=0),
    )


@dataclass
class SublinearityRow:
    eta: float
    m: int
    n: int
    K: int
    ratio: float
    in_ball: bool


@dataclass
class SublinearityTable:
    rows: list
    summaries: dict  # eta -> max ratio over the largest half of the sizes

    def to_json(self) -> dict:
        return {
            "rows": [
                {"eta": r.eta, "m": r.m, "n": r.n, "K": r.K, "ratio": r.ratio, "in_ball": r.in_ball}
                for r in self.rows
            ],
            "summaries": {f"{k:.10g}": v for k, v in self.summaries.items()},
        }


def sublinearity_scan(
    system: SystemSpec,
    x: Point2,
    theta: float,
    eta_list,
    mn_list,
    q: SlowVaryingFn,
    ctx: CoverContext,
    newton_tol: float = 1e-11,
    workers: int = 1,
) -> SublinearityTable:
    """One certificate per (eta, m, n); the per-eta summary is the max gap
    ratio K/(m+n) over the largest half of the size list.

    The context is read-only after construction, so independent certificates
    may run on up to `workers` threads; results are assembled by task key,
    keeping the table identical to a serial run."""
    sizes = sorted(mn_list, key=lambda mn: mn[0] + mn[1])
    big_half = sizes[len(sizes) // 2 :]
    tasks = [(float(eta), m, n) for eta in eta_list for m, n in sizes]

    def one(task):
        eta, m, n = task
        q_eta = replace(q, eta=eta)
        cert = ns_certificate(system, x, m, n, theta, eta, q_eta, ctx, newton_tol=newton_tol)
        return SublinearityRow(eta=eta, m=m, n=n, K=cert.K, ratio=cert.ratio, in_ball=cert.in_ball)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(zip(tasks, pool.map(one, tasks)))
    else:
        results = {t: one(t) for t in tasks}

    rows = [results[t] for t in tasks]
    summaries = {}
    for eta in (float(e) for e in eta_list):
        summaries[eta] = max(results[(eta, m, n)].ratio for m, n in big_half)
    rows.sort(key=lambda r: (r.eta, r.m + r.n, r.m))
    return SublinearityTable(rows=rows, summaries=summaries)


@dataclass
class GnsSegmentReport:
    x: Point2
    m: int
    n: int
    t_minus: int
    t_plus: int
    K: int
    offset: int
    in_ball: bool
    first_violated_index: int | None
    margins_j: np.ndarray
    margins_distance: np.ndarray
    margins_allowance: np.ndarray

    def to_json(self, include_margins=False) -> dict:
        out = {
            "x": [self.x.x, self.x.y],
            "m": self.m,
            "n": self.n,
            "t_minus": self.t_minus,
            "t_plus": self.t_plus,
            "K": self.K,
            "offset": self.offset,
            "in_ball": self.in_ball,
            "first_violated_index": self.first_violated_index,
        }
        if include_margins:
            out["margins"] = {
                "j": self.margins_j.tolist(),
                "distance": self.margins_distance.tolist(),
                "allowance": self.margins_allowance.tolist(),
            }
        return out


@dataclass
class GnsCertificate:
    segments: list  # of GnsSegmentReport
    gaps: list  # p_i
    connectors: list  # (N_i, y Point2)
    offsets: list
    z: Point2
    period: int
    gap_budget: int  # sum of K_i
    sum_gaps: int
    pair_bound_ok: bool  # p_i <= K_i + K_{i+1} for all i
    residual: float
    newton_iters: int
    bookkeeping_ok: bool
    target_total_gap: int | None

    @property
    def all_in_ball(self) -> bool:
        return all(s.in_ball for s in self.segments)

    def to_json(self, include_margins=False) -> dict:
        return {
            "segments": [s.to_json(include_margins) for s in self.segments],
            "gaps": self.gaps,
            "connectors": [{"N": N, "y": [y.x, y.y]} for N, y in self.connectors],
            "offsets": self.offsets,
            "z": [self.z.x, self.z.y],
            "period": self.period,
            "gap_budget": self.gap_budget,
            "sum_gaps": self.sum_gaps,
            "pair_bound_ok": self.pair_bound_ok,
            "residual": self.residual,
            "newton_iters": self.newton_iters,
            "bookkeeping_ok": self.bookkeeping_ok,
            "target_total_gap": self.target_total_gap,
            "all_in_ball": self.all_in_ball,
        }


def gns_certificate(
    system: SystemSpec,
    segment_list,
    theta: float,
    eta: float,
    q: SlowVaryingFn,
    ctx: CoverContext,
    target_total_gap: int | None = None,
    newton_tol: float = 1e-11,
) -> GnsCertificate:
    """Multi-segment certificate: cycle the extended windows of the given
    (x_i, m_i, n_i) segments through connectors from the sampling record.

    With target_total_gap set (mixing-mode transitions required) the
    connectors are re-chosen so the gap total sum(p_i) hits the target
    exactly; otherwise minimal connectors are used and sum(p_i) <= sum(K_i).
    """
    k = len(segment_list)
    if k < 2:
        raise PreconditionError("GNS certificates need at least 2 segments")
    if abs(q.eta - eta) > 1e-12:
        raise ValueError("q.eta must equal the certificate eta")

    data = []
    for x_i, m_i, n_i in segment_list:
        seq, indices, t_minus, t_plus, xs = _certificate_window(system, x_i, m_i, n_i, eta, ctx)
        _check_q_along(q, xs, t_minus, m_i, n_i, eta)
        data.append(
            {
                "x": x_i,
                "m": m_i,
                "n": n_i,
                "t_minus": t_minus,
                "t_plus": t_plus,
                "xs": xs,
                "dest": ctx.cover.locate(xs[0]),
                "src": ctx.cover.locate(xs[-1]),
            }
        )

    M = ctx.bounds.M_k
    pairs = [(data[(i + 1) % k]["dest"], data[i]["src"]) for i in range(k)]
    Ns = [ctx.bounds.connector(d, s)[0] for d, s in pairs]

    def gap(i, N_i):
        nxt = data[(i + 1) % k]
        return (data[i]["t_plus"] - data[i]["n"]) + N_i - nxt["t_minus"] - nxt["m"]

    K_list = [
        (d["t_plus"] - d["t_minus"]) + M - d["m"] - d["n"] for d in data
    ]
    if target_total_gap is not None:
        if not ctx.bounds.mixing_mode:
            raise GapInfeasibleError("prescribed gap totals require mixing-mode transitions")
        base = sum(gap(i, Ns[i]) for i in range(k))
        delta_total = int(target_total_gap) - base
        if delta_total < 0:
            raise GapInfeasibleError(
                f"target gap total {target_total_gap} below the minimum {base}"
            )
        # round-robin single increments, staying inside the certified
        # contiguous witness ranges [X_pair, h_cap]
        budget = delta_total
        stalled = 0
        i = 0
        while budget > 0:
            d_set, s_set = pairs[i]
            if Ns[i] + 1 <= ctx.bounds.h_cap and ctx.bounds.connector_at(d_set, s_set, Ns[i] + 1) is not None:
                Ns[i] += 1
                budget -= 1
                stalled = 0
            else:
                stalled += 1
                if stalled >= k:
                    raise GapInfeasibleError(
                        f"cannot absorb gap surplus {budget}: witness ranges exhausted"
                    )
            i = (i + 1) % k

    sp = system.space
    segs = []
    conns = []
    for i in range(k):
        xs = data[i]["xs"]
        segs.append(
            (Point2(float(xs[0, 0]), float(xs[0, 1]), sp), data[i]["t_plus"] - data[i]["t_minus"], xs)
        )
        d_set, s_set = pairs[i]
        if ctx.bounds.mixing_mode:
            t_w = ctx.bounds.connector_at(d_set, s_set, Ns[i])
            if t_w is None:
                raise GapInfeasibleError(f"no witness at gap {Ns[i]} for pair {(d_set, s_set)}")
        else:
            _, t_w = ctx.bounds.connector(d_set, s_set)
        y_pts = ctx.bounds.sampling_orbit[t_w : t_w + Ns[i] + 1].copy()
        segs.append((Point2(float(y_pts[0, 0]), float(y_pts[0, 1]), sp), Ns[i], y_pts))
        conns.append((Ns[i], Point2(float(y_pts[0, 0]), float(y_pts[0, 1]), sp)))

    po, _ = assemble(segs, system, periodic=True)
    sol = newton_refine_periodic(system, po, tol=newton_tol)
    p = sol.period

    gaps = [gap(i, Ns[i]) for i in range(k)]
    assert p == sum(d["n"] + d["m"] for d in data) + sum(gaps), "period bookkeeping failed"
    sum_gaps = sum(gaps)
    if target_total_gap is None and sum_gaps > sum(K_list):
        raise AssertionError("gap accounting violated: sum(p_i) > sum(K_i)")
    if target_total_gap is not None and sum_gaps != int(target_total_gap):
        raise AssertionError("gap accounting violated: sum(p_i) != target")

    # assembly position of each x_i's j=0 point and the stated offsets
    pos = []
    c = 0
    for i in range(k):
        pos.append(c + (-data[i]["t_minus"]))
        c += (data[i]["t_plus"] - data[i]["t_minus"]) + Ns[i]
    offsets = [0]
    for i in range(1, k):
        off = sum(data[j]["n"] + gaps[j] for j in range(i)) + sum(data[j]["m"] for j in range(1, i + 1))
        offsets.append(off)
    bookkeeping_ok = all((pos[i] - pos[0]) % p == offsets[i] % p for i in range(k))
    bookkeeping_ok = bookkeeping_ok and sol.residual <= 1e-9

    seg_reports = []
    for i in range(k):
        d_i = data[i]
        j_arr = np.arange(-d_i["m"], d_i["n"] + 1)
        rows = j_arr - d_i["t_minus"]
        zrows = sol.points[(pos[i] + j_arr) % p]
        xrows = d_i["xs"][rows]
        dist = dist_rows(sp, zrows, xrows)
        allowance = theta * q.value_rows(xrows) ** (-2.0)
        ok = dist < allowance
        in_ball = bool(ok.all())
        seg_reports.append(
            GnsSegmentReport(
                x=d_i["x"],
                m=d_i["m"],
                n=d_i["n"],
                t_minus=d_i["t_minus"],
                t_plus=d_i["t_plus"],
                K=int(K_list[i]),
                offset=int(offsets[i]),
                in_ball=in_ball,
                first_violated_index=None if in_ball else int(j_arr[np.nonzero(~ok)[0][0]]),
                margins_j=j_arr,
                margins_distance=dist,
                margins_allowance=allowance,
            )
        )

    pair_ok = all(gaps[i] <= K_list[i] + K_list[(i + 1) % k] for i in range(k))
    return GnsCertificate(
        segments=seg_reports,
        gaps=[int(g) for g in gaps],
        connectors=conns,
        offsets=[int(o) for o in offsets],
        z=sol.point(pos[0]),
        period=p,
        gap_budget=int(sum(K_list)),
        sum_gaps=int(sum_gaps),
        pair_bound_ok=pair_ok,
        residual=sol.residual,
        newton_iters=sol.newton_iters,
        bookkeeping_ok=bookkeeping_ok,
        target_total_gap=None if target_total_gap is None else int(target_total_gap),
    )
