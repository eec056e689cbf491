"""Radial calculus of the canonical homogeneous functions and the
closed-form exponent solver for rotationally invariant operators.

The canonical radial function of homogeneity degree -alpha is
``|x|^-alpha`` (alpha > 0), ``-log|x|`` (alpha = 0), ``-|x|^-alpha``
(alpha < 0); the signs make the family continuous in alpha after an
affine shift and keep the one-signed convention of the homogeneous
function classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, EllipticFundError, InvalidInputError
from .operators import EllipticityPair, OperatorSpec, SymMatrix, eval_operator

LOG_BRANCH_CUTOFF = 1e-9  # |alpha*| below this is reported as the log branch


@dataclass
class ExponentResult:
    """Scaling exponent of an operator plus solver provenance."""

    alpha_star: float
    branch: str                    # 'power' or 'log'
    method: str                    # 'rotinv_root' or 'circle_bisection'
    residual: float
    bracket_width: float
    a_tilde: float | None = None   # root of a -> F(a e1 x e1 - I) when radial

    def __post_init__(self):
        if self.branch not in ("power", "log"):
            raise InvalidInputError(f"bad branch {self.branch!r}")
        if self.alpha_star <= -1.0:
            raise InvalidInputError(f"alpha_star must exceed -1, got {self.alpha_star}")
        if self.branch == "log" and abs(self.alpha_star) > max(self.bracket_width, LOG_BRANCH_CUTOFF):
            raise InvalidInputError("log branch with alpha_star away from zero")

    def check_bounds(self, pair: EllipticityPair, n: int, slack: float = 1e-6):
        lo = pair.lam / pair.Lam * (n - 1) - 1.0 - slack
        hi = pair.Lam / pair.lam * (n - 1) - 1.0 + slack
        if not (lo <= self.alpha_star <= hi):
            raise EllipticFundError(
                f"alpha* = {self.alpha_star} escapes its ellipticity bounds [{lo}, {hi}]"
            )


def xi_eval(alpha: float, x) -> float:
    """Value of the canonical radial function at x != 0."""
    r = float(np.linalg.norm(x))
    if r <= 0.0:
        raise InvalidInputError("xi is undefined at the origin")
    if alpha > 0.0:
        return r ** (-alpha)
    if alpha == 0.0:
        return -math.log(r)
    return -(r ** (-alpha))


def xi_hessian(alpha: float, x) -> SymMatrix:
    """Hessian of the canonical radial function at x != 0.

    Eigenvalues are |alpha|(alpha+1)|x|^(-alpha-2) in the radial direction
    and -|alpha||x|^(-alpha-2) with multiplicity n-1; the alpha = 0 case
    uses the explicit log-branch formula rather than a limit.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r <= 0.0:
        raise InvalidInputError("xi hessian is undefined at the origin")
    n = x.shape[0]
    if alpha == 0.0:
        h = 2.0 * r ** -4.0 * np.outer(x, x) - r ** -2.0 * np.eye(n)
    else:
        aa = abs(alpha)
        h = aa * (alpha + 2.0) * r ** (-alpha - 4.0) * np.outer(x, x) \
            - aa * r ** (-alpha - 2.0) * np.eye(n)
    return SymMatrix.from_array(h)


def xi_hessian_batch(alpha: float, X: np.ndarray) -> np.ndarray:
    """Hessians of xi at a batch of points, shape (m, n, n)."""
    X = np.asarray(X, dtype=float)
    r = np.linalg.norm(X, axis=1)
    n = X.shape[1]
    eye = np.eye(n)
    outer = X[:, :, None] * X[:, None, :]
    if alpha == 0.0:
        return 2.0 * r[:, None, None] ** -4.0 * outer - r[:, None, None] ** -2.0 * eye
    aa = abs(alpha)
    return aa * (alpha + 2.0) * r[:, None, None] ** (-alpha - 4.0) * outer \
        - aa * r[:, None, None] ** (-alpha - 2.0) * eye


def pucci_of_xi(sign: str, pair: EllipticityPair, n: int, alpha: float, r: float) -> float:
    """Closed-form value of a Pucci extremal operator on the xi hessian at |x| = r.

    Valid for alpha > -1, where the radial Hessian eigenvalue is the positive
    one and the n-1 tangential eigenvalues are negative.
    """
    if r <= 0.0:
        raise InvalidInputError("need r > 0")
    if alpha <= -1.0:
        raise InvalidInputError("closed form holds for alpha > -1")
    if sign not in ("+", "-"):
        raise InvalidInputError("sign must be '+' or '-'")
    lam, Lam = pair.lam, pair.Lam
    if alpha == 0.0:
        factor = (lam * (n - 1) - Lam) if sign == "-" else (Lam * (n - 1) - lam)
        return r ** -2.0 * factor
    if sign == "-":
        factor = lam * (n - 1) - Lam * (alpha + 1.0)
    else:
        factor = Lam * (n - 1) - lam * (alpha + 1.0)
    return abs(alpha) * r ** (-alpha - 2.0) * factor


def rescale_apply(alpha: float, sigma: float, u):
    """Return the rescaled function x -> sigma^alpha u(sigma x) (log rule at 0)."""
    if sigma <= 0.0:
        raise InvalidInputError("need sigma > 0")
    if alpha == 0.0:
        return lambda x: u(sigma * np.asarray(x, dtype=float)) + math.log(sigma)
    s = sigma ** alpha
    return lambda x: s * u(sigma * np.asarray(x, dtype=float))


def is_rotationally_symmetric(F: OperatorSpec, n_samples: int = 64, seed: int = 0,
                              tol: float = 1e-9):
    """Test whether F(a y x y - I) depends on the unit vector y.

    Samples a in [1, Lam/lam (n-1) + 2] and unit pairs (y, z); returns
    (symmetric, worst_gap).
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = F.dim
    a_hi = F.pair.Lam / F.pair.lam * (n - 1) + 2.0
    eye = np.eye(n)
    worst = 0.0
    # include the axis pairs so diagonal anisotropy is always caught
    det_pairs = [(eye[i], eye[j]) for i in range(n) for j in range(i + 1, n)]
    for k in range(n_samples):
        a = rng.uniform(1.0, a_hi)
        if k < len(det_pairs):
            y, z = det_pairs[k]
            a = 1.0 + (a_hi - 1.0) * (k + 1) / (len(det_pairs) + 1)
        else:
            y = rng.standard_normal(n)
            y /= np.linalg.norm(y)
            z = rng.standard_normal(n)
            z /= np.linalg.norm(z)
        gap = abs(eval_operator(F, a * np.outer(y, y) - eye)
                  - eval_operator(F, a * np.outer(z, z) - eye))
        worst = max(worst, gap)
    return worst <= tol, worst


def exponent_rotinv(F: OperatorSpec, n: int | None = None, *,
                    check_symmetry: bool = True, tol: float = 1e-12,
                    max_iter: int = 200) -> ExponentResult:
    """Scaling exponent of a rotationally invariant operator.

    Bisects the strictly decreasing map a -> F(a e1 x e1 - I); the root
    a~ gives alpha* = a~ - 2 and the canonical radial fundamental solution.
    """
    if n is None:
        n = F.dim
    if n != F.dim:
        raise InvalidInputError(f"n = {n} but operator has dim {F.dim}")
    if check_symmetry:
        ok, gap = is_rotationally_symmetric(F)
        if not ok:
            raise InvalidInputError(
                f"operator is not rotationally invariant (worst gap {gap:.3e}); "
                "use the dim-2 circle solver instead"
            )
    eye = np.eye(n)
    e11 = np.outer(eye[0], eye[0])

    def g(a: float) -> float:
        return eval_operator(F, a * e11 - eye)

    lo, hi = 0.0, F.pair.Lam / F.pair.lam * (n - 1) + 2.0
    glo, ghi = g(lo), g(hi)
    if not (glo > 0.0 > ghi):
        raise BracketError(
            "root map not bracketed; operator violates its declared ellipticity",
            samples=[(lo, glo), (hi, ghi)],
        )
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    a_tilde = 0.5 * (lo + hi)
    alpha = a_tilde - 2.0
    branch = "log" if abs(alpha) <= LOG_BRANCH_CUTOFF else "power"
    result = ExponentResult(
        alpha_star=0.0 if branch == "log" else alpha,
        branch=branch,
        method="rotinv_root",
        residual=abs(g(a_tilde)),
        bracket_width=hi - lo,
        a_tilde=a_tilde,
    )
    result.check_bounds(F.pair, n)
    return result
