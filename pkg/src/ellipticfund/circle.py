"""Exponent solver for general dim-2 operators via a periodic eigenproblem.

A function u = r^-alpha * phi(theta) (or -log r + phi for the log branch)
solves F(D^2 u) = mu * u * r^-2 exactly when the circle profile phi solves
the pointwise problem F(H[phi]) = mu * phi at r = 1, because every term
scales like r^(-alpha-2).  The principal eigenpair is computed by a
normalized explicit parabolic flow; the scaling exponent is the root of
eta(alpha) = mu(alpha) / alpha, which divides out the spurious constants
root at alpha = 0.  The log branch is tested explicitly when the bracket
straddles zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BracketError, ConvergenceError, InvalidInputError, StepSizeError
from .operators import OperatorSpec, SymMatrix, eval_2x2_batch, operator_hash
from .radial import ExponentResult

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is installed in CI
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass
class CircleProfile:
    """Periodic grid profile of a homogeneous function on the unit circle."""

    n_theta: int
    values: np.ndarray
    alpha: float
    branch: str  # 'power' or 'log'

    def __post_init__(self):
        if self.n_theta & (self.n_theta - 1) or self.n_theta <= 0:
            raise InvalidInputError("n_theta must be a power of two")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n_theta,) or not np.all(np.isfinite(self.values)):
            raise InvalidInputError("profile values must be finite, one per grid angle")
        if self.branch == "power":
            sgn = 1.0 if self.alpha > 0 else -1.0
            m = np.min(sgn * self.values)
            if m <= 0:
                raise InvalidInputError("power-branch profile must be one-signed")
            self.values = self.values / m
        elif self.branch == "log":
            self.values = self.values - self.values.mean()
        else:
            raise InvalidInputError(f"bad branch {self.branch!r}")

    @property
    def thetas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    def interp(self, theta) -> np.ndarray:
        """Periodic linear interpolation at arbitrary angles."""
        theta = np.asarray(theta, dtype=float)
        h = 2.0 * np.pi / self.n_theta
        pos = np.mod(theta, 2.0 * np.pi) / h
        k0 = np.floor(pos).astype(int) % self.n_theta
        k1 = (k0 + 1) % self.n_theta
        w = pos - np.floor(pos)
        return (1.0 - w) * self.values[k0] + w * self.values[k1]

    def as_function(self):
        """Reconstruct u(x) = r^-alpha phi(theta) (power) or -log r + phi (log)."""

        def u(x):
            x = np.asarray(x, dtype=float)
            single = x.ndim == 1
            pts = x[None, :] if single else x
            r = np.hypot(pts[:, 0], pts[:, 1])
            th = np.arctan2(pts[:, 1], pts[:, 0])
            if self.branch == "log":
                vals = -np.log(r) + self.interp(th)
            else:
                vals = r ** (-self.alpha) * self.interp(th)
            return float(vals[0]) if single else vals

        return u


@dataclass
class EigenEstimate:
    """Principal eigenpair of the circle problem at a fixed homogeneity."""

    alpha: float
    mu: float
    eta: float
    profile: CircleProfile
    iterations: int
    converged: bool
    residual: float


@dataclass
class CircleConfig:
    n_theta: int = 256
    dt_safety: float = 0.5
    tol: float = 1e-5
    max_iter: int = 1_500_000
    check_every: int = 512
    init_seed: int | None = None
    alpha_tol: float = 1e-4          # final bisection bracket width
    dead_zone: float = 1e-3          # power branch never evaluated at |alpha| below this
    bracket_pad: float = 0.05
    mu_log_tol: float | None = None  # default picked relative to Lam
    audit_eta: bool = False          # sample eta at 9 bracket points before bisecting
    sign_exit: bool = True           # allow early exit when only sign(mu) is needed


# ---------------------------------------------------------------------------
# homogeneous hessian
# ---------------------------------------------------------------------------

def _polar_entries(phi, dphi, ddphi, alpha: float, branch: str):
    if branch == "log":
        p_rr = np.ones_like(np.asarray(phi, dtype=float))
        p_rt = -np.asarray(dphi, dtype=float)
        p_tt = np.asarray(ddphi, dtype=float) - 1.0
    else:
        p_rr = alpha * (alpha + 1.0) * np.asarray(phi, dtype=float)
        p_rt = -(alpha + 1.0) * np.asarray(dphi, dtype=float)
        p_tt = np.asarray(ddphi, dtype=float) - alpha * np.asarray(phi, dtype=float)
    return p_rr, p_rt, p_tt


def _rotate_to_cartesian(p_rr, p_rt, p_tt, theta):
    c = np.cos(theta)
    s = np.sin(theta)
    h11 = c * c * p_rr - 2.0 * c * s * p_rt + s * s * p_tt
    h12 = c * s * (p_rr - p_tt) + (c * c - s * s) * p_rt
    h22 = s * s * p_rr + 2.0 * c * s * p_rt + c * c * p_tt
    return h11, h12, h22


def hessian_homogeneous_2d(phi: float, dphi: float, ddphi: float, alpha: float,
                           theta: float, branch: str = "power") -> SymMatrix:
    """Cartesian Hessian at radius 1 of u = r^-alpha phi(theta) (or -log r + phi).

    In the polar frame the matrix is [[a(a+1)phi, -(a+1)phi'], [-(a+1)phi',
    phi'' - a phi]]; the log branch replaces the diagonal by (1, phi'' - 1).
    """
    p_rr, p_rt, p_tt = _polar_entries(phi, dphi, ddphi, alpha, branch)
    h11, h12, h22 = _rotate_to_cartesian(p_rr, p_rt, p_tt, np.asarray(theta, dtype=float))
    return SymMatrix.from_array(np.array([[float(h11), float(h12)],
                                          [float(h12), float(h22)]]))


def profile_hessian_batch(profile: CircleProfile):
    """Hessian entries of the reconstructed u at every grid angle (r = 1)."""
    n = profile.n_theta
    h = 2.0 * np.pi / n
    v = profile.values
    dphi = (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * h)
    ddphi = (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / h ** 2
    p_rr, p_rt, p_tt = _polar_entries(v, dphi, ddphi, profile.alpha, profile.branch)
    return _rotate_to_cartesian(p_rr, p_rt, p_tt, profile.thetas)


def profile_residuals(F: OperatorSpec, profile: CircleProfile, mu: float) -> np.ndarray:
    h11, h12, h22 = profile_hessian_batch(profile)
    g = eval_2x2_batch(F, h11, h12, h22)
    if profile.branch == "log":
        return g - mu
    return g - mu * profile.values


# ---------------------------------------------------------------------------
# flow kernels
# ---------------------------------------------------------------------------
# Operator encoding shared by the numpy and numba kernels:
#   kind 0 pucci+ (s0=lam, s1=Lam)      kind 1 pucci- (s0=lam, s1=Lam)
#   kind 2 linear (s0=A11, s1=A22, s2=A12)
#   kind 3 supinf / kind 4 infsup (members rows [A11, A12, A22], offsets)
#   kind 5 eigen_sym dim 2 (s0=c1, s1=c2)

def _encode_operator(F: OperatorSpec):
    if F.dim != 2:
        raise InvalidInputError("circle solver requires a dim-2 operator")
    offsets = np.zeros(1, dtype=np.int64)
    members = np.zeros((0, 3))
    s0 = s1 = s2 = 0.0
    if F.kind == "pucci+":
        kind, s0, s1 = 0, F.pair.lam, F.pair.Lam
    elif F.kind == "pucci-":
        kind, s0, s1 = 1, F.pair.lam, F.pair.Lam
    elif F.kind == "linear":
        kind, s0, s1, s2 = 2, F.A[0, 0], F.A[1, 1], F.A[0, 1]
    elif F.kind in ("supinf", "infsup"):
        kind = 3 if F.kind == "supinf" else 4
        rows = []
        offs = [0]
        for fam in F.families:
            rows.extend([A[0, 0], A[0, 1], A[1, 1]] for A in fam)
            offs.append(len(rows))
        members = np.asarray(rows, dtype=float)
        offsets = np.asarray(offs, dtype=np.int64)
    else:
        kind, s0, s1 = 5, F.coeffs[0], F.coeffs[1]
    return kind, s0, s1, s2, members, offsets


@njit(cache=True)
def _eval_encoded(kind, s0, s1, s2, members, offsets, h11, h12, h22):  # pragma: no cover
    if kind == 2:
        return -(s0 * h11 + 2.0 * s2 * h12 + s1 * h22)
    if kind == 3 or kind == 4:
        nfam = offsets.shape[0] - 1
        outer = -1e300 if kind == 3 else 1e300
        for f in range(nfam):
            inner = 1e300 if kind == 3 else -1e300
            for m in range(offsets[f], offsets[f + 1]):
                v = -(members[m, 0] * h11 + 2.0 * members[m, 1] * h12 + members[m, 2] * h22)
                if kind == 3:
                    inner = v if v < inner else inner
                else:
                    inner = v if v > inner else inner
            if kind == 3:
                outer = inner if inner > outer else outer
            else:
                outer = inner if inner < outer else outer
        return outer
    tr = h11 + h22
    disc = math.sqrt((h11 - h22) * (h11 - h22) + 4.0 * h12 * h12)
    mu1 = 0.5 * (tr - disc)
    mu2 = 0.5 * (tr + disc)
    if kind == 0:
        return -(s0 * max(mu1, 0.0) + s1 * min(mu1, 0.0)) \
            - (s0 * max(mu2, 0.0) + s1 * min(mu2, 0.0))
    if kind == 1:
        return -(s1 * max(mu1, 0.0) + s0 * min(mu1, 0.0)) \
            - (s1 * max(mu2, 0.0) + s0 * min(mu2, 0.0))
    return -(s0 * mu1 + s1 * mu2)


@njit(cache=True)
def _flow_steps(phi, g, cth, sth, alpha, sgn, is_log, dt, n_steps, mu_out,
                kind, s0, s1, s2, members, offsets, inv2h, invh2):  # pragma: no cover
    """Advance the normalized flow n_steps; returns steps done (< n_steps on
    positivity loss)."""
    n = phi.shape[0]
    for step in range(n_steps):
        for k in range(n):
            kp = k + 1 if k + 1 < n else 0
            km = k - 1 if k > 0 else n - 1
            dphi = (phi[kp] - phi[km]) * inv2h
            ddphi = (phi[kp] - 2.0 * phi[k] + phi[km]) * invh2
            if is_log:
                p_rr = 1.0
                p_rt = -dphi
                p_tt = ddphi - 1.0
            else:
                p_rr = alpha * (alpha + 1.0) * phi[k]
                p_rt = -(alpha + 1.0) * dphi
                p_tt = ddphi - alpha * phi[k]
            c = cth[k]
            s = sth[k]
            h11 = c * c * p_rr - 2.0 * c * s * p_rt + s * s * p_tt
            h12 = c * s * (p_rr - p_tt) + (c * c - s * s) * p_rt
            h22 = s * s * p_rr + 2.0 * c * s * p_rt + c * c * p_tt
            g[k] = _eval_encoded(kind, s0, s1, s2, members, offsets, h11, h12, h22)
        if is_log:
            drift = 0.0
            for k in range(n):
                drift += g[k]
            drift /= n
            for k in range(n):
                phi[k] = phi[k] - dt * (g[k] - drift)
            mu_out[step] = drift
        else:
            m = 1e300
            for k in range(n):
                phi[k] = phi[k] - dt * g[k]
                v = sgn * phi[k]
                if v < m:
                    m = v
            if m <= 0.0:
                return step
            for k in range(n):
                phi[k] = phi[k] / m
            mu_out[step] = -math.log(m) / dt
    return n_steps


def _flow_steps_numpy(phi, g, cth, sth, alpha, sgn, is_log, dt, n_steps, mu_out,
                      kind, s0, s1, s2, members, offsets, inv2h, invh2, F):
    """Pure-numpy twin of _flow_steps, used when numba is unavailable."""
    n = phi.shape[0]
    for step in range(n_steps):
        dphi = (np.roll(phi, -1) - np.roll(phi, 1)) * inv2h
        ddphi = (np.roll(phi, -1) - 2.0 * phi + np.roll(phi, 1)) * invh2
        branch = "log" if is_log else "power"
        p_rr, p_rt, p_tt = _polar_entries(phi, dphi, ddphi, alpha, branch)
        h11 = cth * cth * p_rr - 2.0 * cth * sth * p_rt + sth * sth * p_tt
        h12 = cth * sth * (p_rr - p_tt) + (cth * cth - sth * sth) * p_rt
        h22 = sth * sth * p_rr + 2.0 * cth * sth * p_rt + cth * cth * p_tt
        g[:] = eval_2x2_batch(F, h11, h12, h22)
        if is_log:
            drift = g.mean()
            phi -= dt * (g - drift)
            mu_out[step] = drift
        else:
            phi -= dt * g
            m = np.min(sgn * phi)
            if m <= 0.0:
                return step
            phi /= m
            mu_out[step] = -math.log(m) / dt
    return n_steps


def _current_g(F, phi, alpha, branch, cth, sth, inv2h, invh2):
    dphi = (np.roll(phi, -1) - np.roll(phi, 1)) * inv2h
    ddphi = (np.roll(phi, -1) - 2.0 * phi + np.roll(phi, 1)) * invh2
    p_rr, p_rt, p_tt = _polar_entries(phi, dphi, ddphi, alpha, branch)
    h11 = cth * cth * p_rr - 2.0 * cth * sth * p_rt + sth * sth * p_tt
    h12 = cth * sth * (p_rr - p_tt) + (cth * cth - sth * sth) * p_rt
    h22 = sth * sth * p_rr + 2.0 * cth * sth * p_rt + cth * cth * p_tt
    return eval_2x2_batch(F, h11, h12, h22)


# ---------------------------------------------------------------------------
# eigenpair driver
# ---------------------------------------------------------------------------

def eigenpair_at_alpha(F: OperatorSpec, alpha: float, config: CircleConfig | None = None,
                       branch: str = "power", phi0: np.ndarray | None = None,
                       _sign_only: bool = False) -> EigenEstimate:
    """Principal eigenpair of F(H[phi]) = mu phi at homogeneity alpha.

    Runs the normalized parabolic flow phi <- phi - dt F(H[phi]) with periodic
    central differences, CFL step dt = dt_safety h^2 / (4 Lam (1 + alpha^2)).
    The power branch renormalizes sign(alpha) phi to min 1 each step and reads
    mu off the growth factor; the log branch recenters to mean zero and reads
    the drift.  mu is averaged over the trailing 10% of iterations.

    With ``_sign_only`` the flow may stop once the sign of mu is unambiguous;
    the estimate is then flagged unconverged and carries the running mu.
    """
    config = config or CircleConfig()
    if branch == "power" and not (alpha > -1.0 + 1e-3 or alpha < -1.0):
        raise InvalidInputError("power branch needs alpha > -1 + 1e-3")
    if branch == "power" and abs(alpha) < config.dead_zone:
        raise InvalidInputError("power branch is degenerate near alpha = 0; use branch='log'")
    if branch == "log":
        alpha = 0.0

    n = config.n_theta
    h = 2.0 * np.pi / n
    theta = 2.0 * np.pi * np.arange(n) / n
    cth = np.cos(theta)
    sth = np.sin(theta)
    sgn = 1.0 if alpha > 0 else -1.0
    dt = config.dt_safety * h ** 2 / (4.0 * F.pair.Lam * (1.0 + alpha ** 2))

    if phi0 is not None:
        phi = np.array(phi0, dtype=float)
    elif config.init_seed is not None:
        rng = np.random.default_rng(config.init_seed)
        if branch == "log":
            phi = 0.3 * rng.standard_normal(n)
        else:
            phi = sgn * (1.0 + rng.random(n))
    elif branch == "log":
        phi = np.zeros(n)
    else:
        phi = sgn * np.ones(n)
    if branch == "log":
        phi = phi - phi.mean()
    else:
        m = np.min(sgn * phi)
        if m <= 0:
            raise InvalidInputError("initial profile must satisfy sign(alpha) phi > 0")
        phi = phi / m

    is_log = branch == "log"
    kind, s0, s1, s2, members, offsets = _encode_operator(F)
    g = np.zeros(n)
    mu_chunk = np.zeros(config.check_every)
    mu_series = []
    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / h ** 2

    done = 0
    halvings = 0
    sign_history = []  # (iteration, mu_hat, mu_std)
    while done < config.max_iter:
        steps = min(config.check_every, config.max_iter - done)
        snapshot = phi.copy()
        if _HAVE_NUMBA:
            adv = _flow_steps(phi, g, cth, sth, alpha, sgn, is_log, dt, steps,
                              mu_chunk, kind, s0, s1, s2, members, offsets, inv2h, invh2)
        else:
            adv = _flow_steps_numpy(phi, g, cth, sth, alpha, sgn, is_log, dt, steps,
                                    mu_chunk, kind, s0, s1, s2, members, offsets,
                                    inv2h, invh2, F)
        if adv < steps:
            # positivity lost mid-chunk: rewind and halve the step
            halvings += 1
            if halvings > 5:
                raise StepSizeError(
                    f"positivity lost at alpha={alpha} after 5 dt halvings",
                    state=snapshot,
                )
            phi = snapshot
            dt *= 0.5
            continue
        mu_series.append(mu_chunk[:adv].copy())
        done += adv

        window = mu_chunk[:adv]
        mu_hat = float(window.mean())
        mu_std = float(window.std())
        g_now = _current_g(F, phi, alpha, branch, cth, sth, inv2h, invh2)
        scale = float(np.max(np.abs(phi)))
        if is_log:
            residual = float(np.max(np.abs(g_now - mu_hat)))
            res_ok = residual <= config.tol
        else:
            residual = float(np.max(np.abs(g_now - mu_hat * phi)))
            res_ok = residual <= config.tol * (1.0 + abs(mu_hat)) * scale
        if res_ok and mu_std <= config.tol * (1.0 + abs(mu_hat)):
            mu = _trailing_mean(mu_series)
            profile = CircleProfile(n, phi, alpha, branch)
            eta = mu if is_log else mu / alpha
            return EigenEstimate(alpha, mu, eta, profile, done, True, residual)

        if _sign_only and config.sign_exit:
            sign_history.append((done, mu_hat, mu_std))
            if _sign_is_settled(sign_history):
                mu = mu_hat
                profile = CircleProfile(n, phi, alpha, branch)
                eta = mu if is_log else mu / alpha
                return EigenEstimate(alpha, mu, eta, profile, done, False, residual)

    raise ConvergenceError(
        f"circle flow did not converge at alpha={alpha} within {config.max_iter} steps "
        f"(last mu~{mu_hat:.3e}, residual {residual:.3e})",
        state=CircleProfile(n, phi, alpha, branch) if (is_log or np.min(sgn * phi) > 0) else phi,
    )


def _trailing_mean(mu_series) -> float:
    mu_all = np.concatenate(mu_series)
    tail = max(1, len(mu_all) // 10)
    return float(mu_all[-tail:].mean())


def _sign_is_settled(history, min_iters: int = 8192, lead: float = 10.0) -> bool:
    """True when the running mu has a stable sign well clear of its noise."""
    if not history or history[-1][0] < min_iters:
        return False
    it, mu, std = history[-1]
    if abs(mu) <= lead * std:
        return False
    baseline = [h for h in history if h[0] <= it // 2]
    if not baseline:
        return False
    _, mu_prev, std_prev = baseline[-1]
    if np.sign(mu_prev) != np.sign(mu) or abs(mu_prev) <= lead * std_prev:
        return False
    # reject a |mu| still shrinking toward a sign change
    return abs(mu) >= 0.8 * abs(mu_prev)


# ---------------------------------------------------------------------------
# exponent bisection
# ---------------------------------------------------------------------------

def exponent_2d(F: OperatorSpec, config: CircleConfig | None = None) -> ExponentResult:
    """Scaling exponent of a dim-2 operator by bisection on eta(alpha) = mu/alpha.

    eta > 0 iff alpha < alpha*; the bracket is the ellipticity bound interval
    padded by bracket_pad and clipped below at -1 + 1e-3.  The log branch is
    evaluated once to decide the side of zero (or to return the log case).
    """
    config = config or CircleConfig()
    if F.dim != 2:
        raise InvalidInputError("exponent_2d requires a dim-2 operator")
    lam, Lam = F.pair.lam, F.pair.Lam
    lo = max(lam / Lam - 1.0 - config.bracket_pad, -1.0 + 1e-3)
    hi = Lam / lam - 1.0 + config.bracket_pad
    mu_log_tol = config.mu_log_tol
    if mu_log_tol is None:
        mu_log_tol = 1e-3 * (1.0 + Lam)

    evals: list[tuple[float, float, bool]] = []  # (alpha, eta, converged)
    # eta = mu/alpha amplifies the O(h^2) discretization noise of mu near 0
    mu_noise = (mu_log_tol if config.mu_log_tol is None else config.mu_log_tol) / 10.0

    def eta_at(alpha: float, phi0=None, sign_only=True):
        est = eigenpair_at_alpha(F, alpha, config, branch="power", phi0=phi0,
                                 _sign_only=sign_only)
        evals.append((alpha, est.eta, est.converged))
        _check_eta_monotone(evals, mu_noise=mu_noise)
        return est

    if config.audit_eta:
        _audit_eta_grid(F, config, lo, hi)

    # the bracket always straddles zero; settle the log branch first
    log_est = eigenpair_at_alpha(F, 0.0, config, branch="log")
    if abs(log_est.mu) <= mu_log_tol:
        result = ExponentResult(
            alpha_star=0.0, branch="log", method="circle_bisection",
            residual=abs(log_est.mu), bracket_width=0.0,
        )
        result.check_bounds(F.pair, 2, slack=1e-3)
        return result
    if log_est.mu > 0.0:
        lo = config.dead_zone
    else:
        hi = -config.dead_zone

    est_lo = eta_at(lo)
    if est_lo.eta <= 0.0:
        raise BracketError(
            f"eta({lo:.4f}) = {est_lo.eta:.3e} <= 0; no sign change over the bracket",
            samples=evals,
        )
    est_hi = eta_at(hi)
    if est_hi.eta >= 0.0:
        raise BracketError(
            f"eta({hi:.4f}) = {est_hi.eta:.3e} >= 0; no sign change over the bracket",
            samples=evals,
        )

    phi_warm = {1.0: None, -1.0: None}
    while hi - lo > config.alpha_tol:
        mid = 0.5 * (lo + hi)
        warm = phi_warm[np.sign(mid)]
        if warm is not None and np.min(np.sign(mid) * warm) <= 0:
            warm = None
        est = eta_at(mid, phi0=warm)
        phi_warm[np.sign(mid)] = est.profile.values.copy()
        if est.eta > 0.0:
            lo = mid
        else:
            hi = mid

    alpha_star = 0.5 * (lo + hi)
    final = eigenpair_at_alpha(F, alpha_star, config, branch="power",
                               phi0=phi_warm[np.sign(alpha_star)], _sign_only=False)
    result = ExponentResult(
        alpha_star=alpha_star, branch="power", method="circle_bisection",
        residual=abs(final.mu), bracket_width=hi - lo,
    )
    result.check_bounds(F.pair, 2, slack=1e-3)
    return result


def _check_eta_monotone(evals, tol: float = 1e-6, mu_noise: float = 0.0):
    """Abort if converged eta samples are not nonincreasing in alpha."""
    conv = sorted((a, e) for a, e, ok in evals if ok)
    for (a0, e0), (a1, e1) in zip(conv, conv[1:]):
        allowed = tol + mu_noise * (1.0 / abs(a0) + 1.0 / abs(a1))
        if e1 > e0 + allowed:
            raise BracketError(
                f"eta is not nonincreasing: eta({a0:.4f})={e0:.3e} < eta({a1:.4f})={e1:.3e}",
                samples=conv,
            )


def _audit_eta_grid(F, config, lo, hi, n_points: int = 9):
    alphas = [a for a in np.linspace(lo, hi, n_points) if abs(a) >= config.dead_zone]
    samples = []
    for a in alphas:
        est = eigenpair_at_alpha(F, a, config, branch="power")
        samples.append((a, est.eta, est.converged))
    _check_eta_monotone(samples)


def fundamental_profile_2d(F: OperatorSpec, result: ExponentResult,
                           config: CircleConfig | None = None) -> CircleProfile:
    """Converged, normalized eigenprofile at alpha = alpha*(F)."""
    config = config or CircleConfig()
    if result.branch == "log":
        est = eigenpair_at_alpha(F, 0.0, config, branch="log")
    else:
        est = eigenpair_at_alpha(F, result.alpha_star, config, branch="power")
    res = profile_residuals(F, est.profile, 0.0)
    scale = max(1.0, float(np.max(np.abs(est.profile.values))))
    sup = float(np.max(np.abs(res)))
    if sup > 1e-3 * scale * (1.0 + F.pair.Lam) * (1.0 + abs(result.alpha_star)) ** 2:
        raise ConvergenceError(
            f"profile residual {sup:.3e} too large at alpha*={result.alpha_star}",
            state=est,
        )
    return est.profile


def profile_to_csv(F: OperatorSpec, profile: CircleProfile, path):
    """CSV export: theta, phi, residual; header carries alpha, branch, hash."""
    res = profile_residuals(F, profile, 0.0)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# alpha={profile.alpha:.17g} branch={profile.branch} "
                 f"operator={operator_hash(F)}\n")
        fh.write("theta,phi,residual\n")
        for t, v, r in zip(profile.thetas, profile.values, res):
            fh.write(f"{t:.17g},{v:.17g},{r:.17g}\n")
