"""Positively homogeneous uniformly elliptic operators and structural checks.

An operator F maps n-by-n symmetric matrices to reals, decreases under
positive-semidefinite increments of its argument at rates between
``lam * trace`` and ``Lam * trace``, and satisfies F(tM) = t F(M) for t >= 0.
Supported variants: the Pucci extremal operators, linear operators
-trace(A M), finite sup-inf / inf-sup families of linear operators, and
eigenvalue-symmetric operators -sum(c_i * mu_i(M)) with sorted eigenvalues.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

_EIG_TOL = 1e-12  # slack when auditing family eigenvalues against [lam, Lam]
_SYM_TOL = 1e-8   # largest accepted asymmetry when loading matrices

KINDS = ("pucci+", "pucci-", "linear", "supinf", "infsup", "eigen_sym")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix stored as its packed upper triangle (row-major)."""

    dim: int
    entries: tuple

    def __post_init__(self):
        if not (2 <= self.dim <= 8):
            raise InvalidInputError(f"SymMatrix dim must be in [2, 8], got {self.dim}")
        expect = self.dim * (self.dim + 1) // 2
        if len(self.entries) != expect:
            raise InvalidInputError(
                f"SymMatrix dim {self.dim} needs {expect} packed entries, got {len(self.entries)}"
            )
        if not all(math.isfinite(v) for v in self.entries):
            raise InvalidInputError("SymMatrix entries must be finite")

    @classmethod
    def from_array(cls, a, tol: float = _SYM_TOL) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
        asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
        if asym > tol:
            raise InvalidInputError(f"matrix asymmetry {asym:.3e} exceeds {tol:.1e}")
        a = 0.5 * (a + a.T)
        iu = np.triu_indices(a.shape[0])
        return cls(dim=a.shape[0], entries=tuple(float(v) for v in a[iu]))

    def to_array(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        iu = np.triu_indices(self.dim)
        a[iu] = self.entries
        a.T[iu] = self.entries
        return a


def as_matrix(M) -> np.ndarray:
    """Accept a SymMatrix or array-like and return the dense symmetric array."""
    if isinstance(M, SymMatrix):
        return M.to_array()
    a = np.asarray(M, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class EllipticityPair:
    """Ellipticity constants 0 < lam <= Lam."""

    lam: float
    Lam: float

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "Lam", float(self.Lam))
        if not (0.0 < self.lam <= self.Lam) or not math.isfinite(self.Lam):
            raise InvalidInputError(f"need 0 < lam <= Lam, got ({self.lam}, {self.Lam})")


@dataclass(frozen=True)
class OperatorSpec:
    """One operator F together with its declared ellipticity.

    kind is one of 'pucci+', 'pucci-', 'linear', 'supinf', 'infsup',
    'eigen_sym'.  Exactly the payload field that the kind needs is set:
    ``A`` for linear, ``families`` (tuple of tuples of dense arrays) for
    supinf/infsup, ``coeffs`` for eigen_sym.  The declared pair is trusted
    by downstream solvers; verify_h1_h2 is the audit tool.
    """

    kind: str
    dim: int
    pair: EllipticityPair
    A: np.ndarray | None = None
    families: tuple = ()
    coeffs: tuple = ()
    _skip_checks: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown operator kind {self.kind!r}")
        if not (2 <= self.dim <= 8):
            raise InvalidInputError(f"operator dim must be in [2, 8], got {self.dim}")
        if self._skip_checks:
            return
        lam, Lam = self.pair.lam, self.pair.Lam
        if self.kind == "linear":
            a = as_matrix(self.A)
            if a.shape != (self.dim, self.dim):
                raise InvalidInputError("linear coefficient matrix has wrong shape")
            mu = np.linalg.eigvalsh(a)
            if mu[0] < lam - _EIG_TOL or mu[-1] > Lam + _EIG_TOL:
                raise InvalidInputError(
                    f"linear coefficient eigenvalues {mu} escape [{lam}, {Lam}]"
                )
        elif self.kind in ("supinf", "infsup"):
            if not self.families or any(len(f) == 0 for f in self.families):
                raise InvalidInputError("sup-inf form needs at least one nonempty family")
            for fam in self.families:
                for a in fam:
                    a = as_matrix(a)
                    if a.shape != (self.dim, self.dim):
                        raise InvalidInputError("family matrix has wrong shape")
                    mu = np.linalg.eigvalsh(a)
                    if mu[0] < lam - _EIG_TOL or mu[-1] > Lam + _EIG_TOL:
                        raise InvalidInputError(
                            f"family matrix eigenvalues {mu} escape [{lam}, {Lam}]"
                        )
        elif self.kind == "eigen_sym":
            c = np.asarray(self.coeffs, dtype=float)
            if c.shape != (self.dim,):
                raise InvalidInputError("eigen_sym needs one coefficient per dimension")
            if np.any(c < lam - _EIG_TOL) or np.any(c > Lam + _EIG_TOL):
                raise InvalidInputError(f"eigen_sym coefficients {c} escape [{lam}, {Lam}]")


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def pucci_plus(lam: float, Lam: float, dim: int) -> OperatorSpec:
    return OperatorSpec("pucci+", dim, EllipticityPair(lam, Lam))


def pucci_minus(lam: float, Lam: float, dim: int) -> OperatorSpec:
    return OperatorSpec("pucci-", dim, EllipticityPair(lam, Lam))


def _symmetrized(M) -> np.ndarray:
    a = as_matrix(M)
    return 0.5 * (a + a.T)


def linear(A, pair: EllipticityPair | None = None) -> OperatorSpec:
    """Linear operator M -> -trace(A M); pair defaults to the eigenvalue range of A."""
    a = _symmetrized(A)
    if pair is None:
        mu = np.linalg.eigvalsh(a)
        pair = EllipticityPair(float(mu[0]), float(mu[-1]))
    return OperatorSpec("linear", a.shape[0], pair, A=a)


def laplacian(dim: int) -> OperatorSpec:
    return linear(np.eye(dim), EllipticityPair(1.0, 1.0))


def sup_inf(families, pair: EllipticityPair, dim: int | None = None) -> OperatorSpec:
    fams = tuple(tuple(_symmetrized(a) for a in fam) for fam in families)
    if dim is None:
        dim = fams[0][0].shape[0]
    return OperatorSpec("supinf", dim, pair, families=fams)


def inf_sup(families, pair: EllipticityPair, dim: int | None = None) -> OperatorSpec:
    fams = tuple(tuple(_symmetrized(a) for a in fam) for fam in families)
    if dim is None:
        dim = fams[0][0].shape[0]
    return OperatorSpec("infsup", dim, pair, families=fams)


def eigen_symmetric(coeffs, pair: EllipticityPair) -> OperatorSpec:
    """F(M) = -sum(c_i * mu_i(M)) with eigenvalues sorted ascending."""
    c = tuple(float(v) for v in coeffs)
    return OperatorSpec("eigen_sym", len(c), pair, coeffs=c)


def f1_operator(lam: float, Lam: float, dim: int) -> OperatorSpec:
    """Extreme eigenvalues weighted Lam, interior ones lam; self-dual."""
    c = [lam] * dim
    c[0] = Lam
    c[-1] = Lam
    return eigen_symmetric(c, EllipticityPair(lam, Lam))


def f2_operator(lam: float, Lam: float, dim: int) -> OperatorSpec:
    """Extreme eigenvalues weighted lam, interior ones Lam; self-dual."""
    c = [Lam] * dim
    c[0] = lam
    c[-1] = lam
    return eigen_symmetric(c, EllipticityPair(lam, Lam))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eigenvalues_sym(M) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted ascending.

    Closed form for 2x2, LAPACK symmetric solver otherwise.
    """
    a = as_matrix(M)
    if a.shape == (2, 2):
        tr = a[0, 0] + a[1, 1]
        disc = math.hypot(a[0, 0] - a[1, 1], 2.0 * a[0, 1])
        return np.array([0.5 * (tr - disc), 0.5 * (tr + disc)])
    return np.linalg.eigvalsh(a)


def _trace_prod(A: np.ndarray, M: np.ndarray) -> float:
    # trace(A M) = <A, M>_F for symmetric A, M
    return float(np.sum(A * M))


def eval_operator(F: OperatorSpec, M) -> float:
    """Evaluate F(M)."""
    a = as_matrix(M)
    if a.shape[0] != F.dim:
        raise InvalidInputError(f"matrix dim {a.shape[0]} != operator dim {F.dim}")
    lam, Lam = F.pair.lam, F.pair.Lam
    if F.kind == "pucci+":
        mu = eigenvalues_sym(a)
        return float(-lam * mu[mu > 0].sum() - Lam * mu[mu < 0].sum())
    if F.kind == "pucci-":
        mu = eigenvalues_sym(a)
        return float(-Lam * mu[mu > 0].sum() - lam * mu[mu < 0].sum())
    if F.kind == "linear":
        return -_trace_prod(F.A, a)
    if F.kind == "supinf":
        return max(min(-_trace_prod(A, a) for A in fam) for fam in F.families)
    if F.kind == "infsup":
        return min(max(-_trace_prod(A, a) for A in fam) for fam in F.families)
    # eigen_sym
    mu = eigenvalues_sym(a)
    return float(-np.dot(np.asarray(F.coeffs), mu))


def eval_2x2_batch(F: OperatorSpec, h11, h12, h22) -> np.ndarray:
    """Vectorized F evaluation on a batch of 2x2 symmetric matrices.

    The batch is given entrywise; used by the circle solver where F is
    evaluated at every grid angle per flow step.
    """
    if F.dim != 2:
        raise InvalidInputError("eval_2x2_batch requires a dim-2 operator")
    h11 = np.asarray(h11, dtype=float)
    h12 = np.asarray(h12, dtype=float)
    h22 = np.asarray(h22, dtype=float)
    lam, Lam = F.pair.lam, F.pair.Lam
    if F.kind == "linear":
        A = F.A
        return -(A[0, 0] * h11 + 2.0 * A[0, 1] * h12 + A[1, 1] * h22)
    if F.kind in ("supinf", "infsup"):
        fam_vals = []
        for fam in F.families:
            vals = [-(A[0, 0] * h11 + 2.0 * A[0, 1] * h12 + A[1, 1] * h22) for A in fam]
            stack = np.stack(vals)
            fam_vals.append(stack.min(axis=0) if F.kind == "supinf" else stack.max(axis=0))
        stack = np.stack(fam_vals)
        return stack.max(axis=0) if F.kind == "supinf" else stack.min(axis=0)
    # eigenvalue-based kinds share the closed-form 2x2 spectrum
    tr = h11 + h22
    disc = np.sqrt((h11 - h22) ** 2 + 4.0 * h12 ** 2)
    mu1 = 0.5 * (tr - disc)
    mu2 = 0.5 * (tr + disc)
    if F.kind == "pucci+":
        return -(lam * np.maximum(mu1, 0.0) + Lam * np.minimum(mu1, 0.0)) \
            - (lam * np.maximum(mu2, 0.0) + Lam * np.minimum(mu2, 0.0))
    if F.kind == "pucci-":
        return -(Lam * np.maximum(mu1, 0.0) + lam * np.minimum(mu1, 0.0)) \
            - (Lam * np.maximum(mu2, 0.0) + lam * np.minimum(mu2, 0.0))
    c = F.coeffs
    return -(c[0] * mu1 + c[1] * mu2)


def dual_operator(F: OperatorSpec) -> OperatorSpec:
    """The dual operator M -> -F(-M)."""
    if F.kind == "pucci+":
        return OperatorSpec("pucci-", F.dim, F.pair)
    if F.kind == "pucci-":
        return OperatorSpec("pucci+", F.dim, F.pair)
    if F.kind == "linear":
        return F
    if F.kind == "supinf":
        return OperatorSpec("infsup", F.dim, F.pair, families=F.families)
    if F.kind == "infsup":
        return OperatorSpec("supinf", F.dim, F.pair, families=F.families)
    return OperatorSpec("eigen_sym", F.dim, F.pair, coeffs=tuple(reversed(F.coeffs)))


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------

def _sample_sym(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n))
    return 0.5 * (g + g.T)


def _sample_psd(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n)) / math.sqrt(n)
    return g @ g.T


@dataclass
class H1H2Report:
    h1_pass: bool
    h2_pass: bool
    worst_violation: float
    worst_h1: float
    worst_h2: float
    n_samples: int


def verify_h1_h2(F: OperatorSpec, pair: EllipticityPair, n_samples: int, seed: int) -> H1H2Report:
    """Audit uniform ellipticity and positive 1-homogeneity by sampling.

    Checks lam*tr(N) <= F(M-N) - F(M) <= Lam*tr(N) over random (M, N >= 0)
    pairs plus the deterministic axis probes N = e_i e_i^T at M = 0, and
    |F(tM) - t F(M)| <= 1e-9 (1 + t |F(M)|) for t in [0, 10].  Violations
    are reported, never raised.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    lam, Lam = pair.lam, pair.Lam
    worst_h1 = 0.0
    worst_h2 = 0.0
    n = F.dim

    probes = [(np.zeros((n, n)), np.outer(e, e))
              for e in np.eye(n)]
    for k in range(n_samples):
        if k < len(probes):
            M, N = probes[k]
        else:
            M, N = _sample_sym(rng, n), _sample_psd(rng, n)
        diff = eval_operator(F, M - N) - eval_operator(F, M)
        trN = float(np.trace(N))
        if trN > 0.0:
            # violation per unit trace, so the report is scale invariant
            rel = max(lam * trN - diff, diff - Lam * trN) / trN
            worst_h1 = max(worst_h1, rel - 1e-9)

        M = _sample_sym(rng, n)
        fM = eval_operator(F, M)
        for t in (0.0, 0.5, 2.0, 10.0 * rng.random()):
            gap = abs(eval_operator(F, t * M) - t * fM) - 1e-9 * (1.0 + t * abs(fM))
            worst_h2 = max(worst_h2, gap)

    return H1H2Report(
        h1_pass=worst_h1 <= 0.0,
        h2_pass=worst_h2 <= 0.0,
        worst_violation=max(worst_h1, worst_h2),
        worst_h1=worst_h1,
        worst_h2=worst_h2,
        n_samples=n_samples,
    )


@dataclass
class SandwichReport:
    passed: bool
    worst_violation: float
    n_samples: int


def pucci_sandwich_check(F: OperatorSpec, n_samples: int, seed: int) -> SandwichReport:
    """Check P-(M) <= F(M) <= P+(M) on random samples, tolerance 1e-10."""
    rng = np.random.default_rng(seed)
    lo = OperatorSpec("pucci-", F.dim, F.pair)
    hi = OperatorSpec("pucci+", F.dim, F.pair)
    worst = 0.0
    for _ in range(n_samples):
        M = _sample_sym(rng, F.dim)
        v = eval_operator(F, M)
        worst = max(worst,
                    eval_operator(lo, M) - v - 1e-10,
                    v - eval_operator(hi, M) - 1e-10)
    return SandwichReport(passed=worst <= 0.0, worst_violation=worst, n_samples=n_samples)


# ---------------------------------------------------------------------------
# JSON schema and hashing
# ---------------------------------------------------------------------------

def operator_to_dict(F: OperatorSpec) -> dict:
    d = {"kind": F.kind, "dim": F.dim, "lambda": F.pair.lam, "Lambda": F.pair.Lam}
    if F.kind == "linear":
        d["A"] = F.A.tolist()
    elif F.kind in ("supinf", "infsup"):
        d["families"] = [[a.tolist() for a in fam] for fam in F.families]
    elif F.kind == "eigen_sym":
        d["coeffs"] = list(F.coeffs)
    return d


def operator_from_dict(d: dict) -> OperatorSpec:
    try:
        kind = d["kind"]
        dim = int(d["dim"])
        pair = EllipticityPair(float(d["lambda"]), float(d["Lambda"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad operator spec: {exc}") from exc
    if kind in ("pucci+", "pucci-"):
        return OperatorSpec(kind, dim, pair)
    if kind == "linear":
        if "A" not in d:
            raise InvalidInputError("linear operator spec needs field 'A'")
        A = SymMatrix.from_array(np.asarray(d["A"], dtype=float)).to_array()
        return OperatorSpec(kind, dim, pair, A=A)
    if kind in ("supinf", "infsup"):
        if "families" not in d:
            raise InvalidInputError(f"{kind} operator spec needs field 'families'")
        fams = tuple(
            tuple(SymMatrix.from_array(np.asarray(a, dtype=float)).to_array() for a in fam)
            for fam in d["families"]
        )
        return OperatorSpec(kind, dim, pair, families=fams)
    if kind == "eigen_sym":
        if "coeffs" not in d:
            raise InvalidInputError("eigen_sym operator spec needs field 'coeffs'")
        return OperatorSpec(kind, dim, pair, coeffs=tuple(float(c) for c in d["coeffs"]))
    raise InvalidInputError(f"unknown operator kind {kind!r}")


def load_operator_json(path) -> OperatorSpec:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"operator file is not valid JSON: {exc}") from exc
    return operator_from_dict(d)


def canonical_json(obj) -> str:
    """Canonical JSON: sorted keys, no whitespace drift, 17-digit floats."""

    def norm(o):
        if isinstance(o, float):
            if not math.isfinite(o):
                raise InvalidInputError("non-finite float in canonical JSON payload")
            return float(f"{o:.17g}")
        if isinstance(o, dict):
            return {k: norm(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [norm(v) for v in o]
        if isinstance(o, (np.floating,)):
            return norm(float(o))
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, np.ndarray):
            return norm(o.tolist())
        return o

    return json.dumps(norm(obj), sort_keys=True, separators=(",", ":"))


def operator_hash(F: OperatorSpec) -> str:
    return hashlib.sha256(canonical_json(operator_to_dict(F)).encode()).hexdigest()


# ---------------------------------------------------------------------------
# random operators (test and benchmark fodder)
# ---------------------------------------------------------------------------

def _random_family_matrix(rng: np.random.Generator, dim: int, pair: EllipticityPair) -> np.ndarray:
    mu = rng.uniform(pair.lam, pair.Lam, size=dim)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q @ np.diag(mu) @ q.T


def sample_supinf(dim: int, pair: EllipticityPair, rng: np.random.Generator,
                  max_families: int = 4, max_members: int = 3) -> OperatorSpec:
    """Random finite sup-inf operator with family matrices inside [lam I, Lam I]."""
    fams = []
    for _ in range(rng.integers(1, max_families + 1)):
        fams.append([_random_family_matrix(rng, dim, pair)
                     for _ in range(rng.integers(1, max_members + 1))])
    return sup_inf(fams, pair, dim)


def sample_eigen_symmetric(dim: int, pair: EllipticityPair,
                           rng: np.random.Generator) -> OperatorSpec:
    coeffs = rng.uniform(pair.lam, pair.Lam, size=dim)
    return eigen_symmetric(coeffs, pair)
