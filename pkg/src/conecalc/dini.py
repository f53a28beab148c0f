"""Multiscale estimation of directional derivative bounds.

Estimates the four one-sided quantities attached to a scalar function f
at a point x and direction u:

    sup_derivative   limsup of (f(x+tv)-f(x))/t as t -> 0+, v -> u
    inf_derivative   the liminf counterpart (via the antipodal identity)
    sup_quotient     as above but the base point y also roams a shrinking
                     ball around x (the "moving base" limsup)
    inf_quotient     its liminf counterpart

plus radial first-order bounds and local Lipschitz constants.  All of
them share one discretization, the ``ScaleLadder``: at scale k the base
ball has radius r_k = t0 * ratio**k, steps t run down a geometric
sub-ladder below r_k, and probe directions are jittered inside a window
that shrinks quadratically in r_k.  Per-scale extrema are extrapolated
by the median of the last three scales; a monotone geometric blow-up
past the cap is reported as an infinite sentinel.

Estimates are heuristic: any finite ladder can be fooled by structure
below its deepest scale.  The full per-scale table is kept on the
returned profile so callers can judge convergence themselves.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import sampling

DIVERGENCE_CAP = 1e3
HARD_CAP = 1e9
T_SUBSTEPS = 30          # t sub-ladder: r_k * 2**-(0..29)
GROWTH_FACTOR = 1.2      # per-scale growth that counts as monotone blow-up
NOISE_BUDGET = 1e-7      # cancellation noise allowed in a single quotient


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get("CONECALC_SEED")
    return int(env) if env else 0


@dataclass(frozen=True)
class ScaleLadder:
    t0: float = 0.1
    ratio: float = 0.5
    k_min: int = 4
    k_max: int = 16
    dir_jitter: int = 32
    base_count: int = 64
    seed: int | None = None

    def __post_init__(self):
        if not (0.0 < self.ratio < 1.0):
            raise ValueError("ratio must lie in (0,1)")
        if self.t0 <= 0 or self.k_min >= self.k_max:
            raise ValueError("need t0 > 0 and k_min < k_max")
        if self.t0 * self.ratio ** self.k_max <= math.sqrt(np.finfo(float).eps):
            raise ValueError("deepest scale is below sqrt(machine epsilon)")

    def radii(self) -> np.ndarray:
        return self.t0 * self.ratio ** np.arange(self.k_min, self.k_max + 1)

    def clamped(self, scale_floor: float | None) -> "ScaleLadder":
        """Restrict scales to radii >= scale_floor, keeping >= 3 scales."""
        if not scale_floor or scale_floor <= 0:
            return self
        deepest = int(math.floor(math.log(scale_floor / self.t0, self.ratio)))
        if deepest >= self.k_max:
            return self
        k_hi = max(deepest, self.k_min + 2)
        k_lo = min(self.k_min, k_hi - 2)
        return replace(self, k_min=k_lo, k_max=k_hi)

    def for_handle(self, f) -> "ScaleLadder":
        meta = getattr(f, "meta", None) or {}
        return self.clamped(meta.get("scale_floor"))

    def resolved_seed(self) -> int:
        return resolve_seed(self.seed)


@dataclass
class QuotientProfile:
    """Per-scale quotient extrema plus the extrapolated limit."""
    direction: np.ndarray
    scales: np.ndarray
    highs: np.ndarray
    lows: np.ndarray
    limit: float
    diverged: bool
    stable: bool

    def table(self) -> list[dict]:
        return [{"radius": float(r), "high": float(h), "low": float(lo)}
                for r, h, lo in zip(self.scales, self.highs, self.lows)]


def _extrapolate(values: np.ndarray) -> tuple[float, bool, bool]:
    """Median-of-last-3 limit with blow-up detection.

    Divergent ladders grow geometrically while convergent ones plateau,
    so a deep-scale level far above both the cap and the early-scale
    level is read as an infinite sentinel.  Comparing medians of the two
    ends is robust to per-scale sampling noise.
    """
    v = np.asarray(values, dtype=float)
    for sign in (1.0, -1.0):
        w = sign * v
        late = float(np.median(w[-min(3, len(w)):]))
        if late >= DIVERGENCE_CAP:
            if np.max(w) >= HARD_CAP:
                return sign * math.inf, True, False
            if len(w) >= 5 and late >= 5.0 * max(float(np.max(w[:3])), 1e-12):
                return sign * math.inf, True, False
    tail = v[-min(3, len(v)):]
    limit = float(np.median(tail))
    spread = float(np.max(tail) - np.min(tail))
    stable = spread <= 0.05 * max(1.0, abs(limit))
    return limit, False, stable


def _base_offsets(m: int, jitter: int, total: int, seed: int) -> np.ndarray:
    """Window offsets: x repeated for each jitter, then a space-filling rest."""
    fixed = np.zeros((jitter, m))
    rest = total - jitter
    if m == 1:
        # deterministic line coverage beats Monte Carlo in one dimension
        line = np.linspace(-1.0, 1.0, max(rest, 2))[:, None]
        return np.vstack([fixed, line[:rest]])
    return np.vstack([fixed, sampling.ball_points(m, rest, seed)])


def _quotient_scan(f, x, U, ladder: ScaleLadder, moving_base: bool) -> list[QuotientProfile]:
    """Sup-side quotient profiles, vectorized across direction rows of U."""
    if f.n != 1:
        raise ValueError("quotient estimation needs a scalar function")
    x = np.asarray(x, dtype=float).reshape(f.m)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != f.m:
        raise ValueError("direction dimension does not match the function")
    lad = ladder.for_handle(f)
    seed = lad.resolved_seed()
    radii = lad.radii()
    q, m = U.shape

    norms = np.linalg.norm(U, axis=1)
    unit = np.divide(U, np.maximum(norms, 1e-300)[:, None])
    zero_dir = norms == 0.0

    meta = getattr(f, "meta", None) or {}
    floor = meta.get("scale_floor")
    t_floor = floor / 64.0 if floor else 0.0

    nk = len(radii)
    highs = np.full((q, nk), -np.inf)
    lows = np.full((q, nk), np.inf)
    # sup at t = r only; the deep sub-ladder hits its noise floor on every
    # shell, so geometric blow-up is only visible on this shallow track
    shallow = np.full((q, nk), -np.inf)

    for ki, r in enumerate(radii):
        k = lad.k_min + ki
        if moving_base:
            offs = _base_offsets(m, lad.dir_jitter, lad.base_count,
                                 sampling.child_seed(seed, 11, k))
        else:
            offs = np.zeros((lad.dir_jitter, m))
        Y = x[None, :] + r * offs
        B = len(Y)
        G = sampling.sphere_points(m, lad.dir_jitter, sampling.child_seed(seed, 23, k))
        Gc = G[np.arange(B) % len(G)]
        # capped so the jitter can never cancel the unit direction (k = 0)
        delta = min(0.5, lad.ratio ** (2 * k))

        V = unit[:, None, :] + delta * Gc[None, :, :]
        V /= np.linalg.norm(V, axis=2, keepdims=True)
        V *= norms[:, None, None]
        if zero_dir.any():
            # probing u = 0: the direction magnitude itself shrinks, but
            # slowly (sqrt rate), so the quotient vanishes iff f is
            # Lipschitz in the window and blows up otherwise
            V[zero_dir] = math.sqrt(r / lad.t0) * Gc[None, :, :]

        FY = f(Y)[:, 0]
        # quotients difference nearly equal numbers; keep t above the
        # level where argument and value roundoff would pollute them
        y_mag = float(np.max(np.abs(Y))) if Y.size else 0.0
        f_mag = float(np.max(np.abs(FY))) if FY.size else 0.0
        eps = np.finfo(float).eps
        noise_floor = eps * max(y_mag, f_mag) / NOISE_BUDGET
        ts = r * 2.0 ** (-np.arange(T_SUBSTEPS))
        ts = ts[ts >= max(t_floor, noise_floor, 1e-300)]
        if len(ts) == 0:
            ts = np.array([r])
        for tj, t in enumerate(ts):
            P = (Y[None, :, :] + t * V).reshape(-1, m)
            quot = (f(P)[:, 0].reshape(q, B) - FY[None, :]) / t
            np.maximum(highs[:, ki], quot.max(axis=1), out=highs[:, ki])
            np.minimum(lows[:, ki], quot.min(axis=1), out=lows[:, ki])
            if tj == 0:
                shallow[:, ki] = quot.max(axis=1)

    out = []
    for i in range(q):
        limit, diverged, stable = _extrapolate(highs[i])
        if (not diverged and len(radii) >= 5 and math.isfinite(limit)
                and limit >= DIVERGENCE_CAP):
            # large level whose t = r quotient still grows geometrically:
            # blow-up, even though the sub-ladder noise floor flattens the
            # per-shell sup and hides the growth from the main test
            sh = shallow[i]
            late_sh = float(np.median(sh[-3:]))
            early_sh = max(float(np.max(sh[:3])), 1e-12)
            if late_sh >= 5.0 * early_sh and float(np.mean(np.diff(sh) >= 0)) >= 0.6:
                limit, diverged, stable = math.inf, True, False
        out.append(QuotientProfile(U[i].copy(), radii.copy(), highs[i].copy(),
                                   lows[i].copy(), limit, diverged, stable))
    return out


def sup_quotient_profile(f, x, u, ladder: ScaleLadder) -> QuotientProfile:
    return _quotient_scan(f, x, u, ladder, moving_base=True)[0]


def sup_quotient(f, x, u, ladder: ScaleLadder) -> float:
    return sup_quotient_profile(f, x, u, ladder).limit


def inf_quotient(f, x, u, ladder: ScaleLadder) -> float:
    """By the antipodal identity inf Q(u) = -sup Q(-u); never re-estimated."""
    return -sup_quotient(f, x, -np.asarray(u, dtype=float), ladder)


def sup_derivative_profile(f, x, u, ladder: ScaleLadder) -> QuotientProfile:
    return _quotient_scan(f, x, u, ladder, moving_base=False)[0]


def sup_derivative(f, x, u, ladder: ScaleLadder) -> float:
    return sup_derivative_profile(f, x, u, ladder).limit


def inf_derivative(f, x, u, ladder: ScaleLadder) -> float:
    return -sup_derivative(f, x, -np.asarray(u, dtype=float), ladder)


def quotient_slabs(f, x, U, ladder: ScaleLadder, moving_base: bool = True):
    """(lows, highs) of the quotient slab for each direction row of U.

    One vectorized scan over U stacked with -U; the low side comes from
    the antipodal identity applied to the second half.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    profs = _quotient_scan(f, x, np.vstack([U, -U]), ladder, moving_base)
    q = len(U)
    highs = np.array([p.limit for p in profs[:q]])
    lows = -np.array([p.limit for p in profs[q:]])
    return lows, highs, profs[:q], profs[q:]


def radial_bounds(f, x, ladder: ScaleLadder) -> tuple[float, float]:
    """liminf / limsup of (f(x+v)-f(x))/|v| over shrinking balls."""
    if f.n != 1:
        raise ValueError("radial bounds need a scalar function")
    x = np.asarray(x, dtype=float).reshape(f.m)
    lad = ladder.for_handle(f)
    seed = lad.resolved_seed()
    radii = lad.radii()
    m = f.m

    grid = sampling.unit_grid(m)
    stride = max(1, len(grid) // 360)
    dirs = grid[::stride]
    fx = f(x[None, :])[0, 0]

    highs, lows = [], []
    for ki, r in enumerate(radii):
        ball = sampling.ball_points(m, 64, sampling.child_seed(seed, 37, lad.k_min + ki))
        offs = np.vstack([r * dirs, 0.5 * r * dirs, r * ball])
        nrm = np.linalg.norm(offs, axis=1)
        keep = nrm > 0
        vals = f(x[None, :] + offs[keep])[:, 0]
        ratio = (vals - fx) / nrm[keep]
        highs.append(ratio.max())
        lows.append(ratio.min())

    hi, _, _ = _extrapolate(np.array(highs))
    lo, _, _ = _extrapolate(-np.array(lows))
    return -lo, hi


def _direction_grid(m: int, count: int) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        ang = np.arange(count) * (2.0 * math.pi / count)
        return np.column_stack([np.cos(ang), np.sin(ang)])
    pts = sampling.sphere_points(m, count // 2, 5)
    return np.vstack([pts, -pts])


def _scalar_slice(f, eta):
    """The scalar function <eta, f>."""
    from .funcs import FunctionHandle

    eta = np.asarray(eta, dtype=float)
    return FunctionHandle(f.m, 1, f"<eta,{f.name}>",
                          lambda X: (f(X) @ eta)[:, None], "composite",
                          dict(getattr(f, "meta", {}) or {}))


def lipschitz_constants(f, x, ladder: ScaleLadder,
                        dir_count: int = 72, covector_count: int = 16):
    """(pointwise, local) Lipschitz constants at x.

    Pointwise: sphere maximum of |sup_derivative| (fixed base).  Local:
    sphere maximum of |sup_quotient| (moving base).  Vector-valued f is
    reduced over a grid of codomain covectors.
    """
    if f.n == 1:
        slices = [f]
    else:
        etas = _direction_grid(f.n, covector_count)
        half = len(etas) // 2 if f.n > 1 else len(etas)
        slices = [_scalar_slice(f, eta) for eta in etas[:max(half, 1)]]

    U = _direction_grid(f.m, dir_count)
    lip_pw = 0.0
    lip = 0.0
    for g in slices:
        for moving, slot in ((False, "pw"), (True, "loc")):
            profs = _quotient_scan(g, x, U, ladder, moving_base=moving)
            worst = 0.0
            for p in profs:
                worst = max(worst, abs(p.limit))
            if slot == "pw":
                lip_pw = max(lip_pw, worst)
            else:
                lip = max(lip, worst)
    # the moving-base window contains the fixed-base one
    if lip < lip_pw and math.isfinite(lip):
        lip = max(lip, lip_pw)
    return lip_pw, lip
