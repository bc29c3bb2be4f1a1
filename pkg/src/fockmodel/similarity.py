"""Similarity of row contractions (and power-bounded tuples) to Cuntz row
isometries: the asymptotic operator P, the lower-bound test, and the
invertible-characteristic-function criterion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .charfn import char_fn
from .errors import NotCNC, NotConverged, NotPowerBounded
from .multianalytic import MultiAnalyticOp, to_matrix
from .rowcontraction import compute_Hc, mats_of, phi, power_bound, tol_of

# the report fixes this orientation: T_i X = X W_i, i.e. W_i = X^{-1} T_i X
ORIENTATION = "T_i = X W_i X^-1"


def injectivity_check(T, tol=None) -> bool:
    """Is the row operator [T_1 ... T_n] : C^{nd} -> C^d one-to-one?"""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    n, d = len(mats), mats[0].shape[0]
    return nm.rank(np.hstack(mats), tol) == n * d


def lower_bound_check(T, horizon: int = 200) -> float:
    """c = min_{k <= horizon} lambda_min(Phi^k(I)), so that
    sum_{|alpha|=k} ||T_alpha^* h||^2 >= c ||h||^2 on the probed range."""
    mats = mats_of(T)
    d = mats[0].shape[0]
    cur = np.eye(d, dtype=complex)
    c = 1.0
    for _ in range(horizon):
        cur = nm.hermitize(phi(mats, cur))
        lo = float(np.linalg.eigvalsh(cur)[0])
        c = min(c, lo)
        if c <= 0:
            return 0.0
        if not np.isfinite(lo):
            break
    return max(c, 0.0)


@dataclass
class AsymptoticP:
    P: np.ndarray
    fixed_point_residual: float
    upper: float                # a: P <= a I
    lower: float                # b: P >= b I
    iterations: int


def asymptotic_P_power_bounded(T, horizon: int = 200, tol=None,
                               target: float = 1e-13, max_refine: int = 2000) -> AsymptoticP:
    """Cesaro mean of Phi^k(I), refined to a fixed point of Phi by A <- (A + Phi(A)) / 2."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d = mats[0].shape[0]
    M2, bounded = power_bound(mats, horizon)
    if not bounded:
        raise NotPowerBounded(f"||Phi^k(I)|| grows (max {M2:.3e} within {horizon} steps)")
    cur = np.eye(d, dtype=complex)
    acc = np.zeros((d, d), dtype=complex)
    for _ in range(horizon):
        acc += cur
        cur = nm.hermitize(phi(mats, cur))
    P = acc / horizon
    res = nm.opnorm(phi(mats, P) - P)
    it = 0
    while res > target and it < max_refine:
        P = nm.hermitize(0.5 * (P + phi(mats, P)))
        res = nm.opnorm(phi(mats, P) - P)
        it += 1
    if res > max(target, tol.eq_tol):
        raise NotConverged(f"fixed-point refinement stalled at {res:.2e}", residual=res, last=P)
    return AsymptoticP(P, res, M2, lower_bound_check(mats, horizon), it)


@dataclass
class SimilarityReport:
    similar: bool | None
    reason: str
    orientation: str = ORIENTATION
    P: np.ndarray | None = None
    X: np.ndarray | None = None
    W: list | None = None
    cond_X: float | None = None
    c: float | None = None
    residuals: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"similar": self.similar, "reason": self.reason, "orientation": self.orientation,
               "cond_X": self.cond_X, "c": self.c, "residuals": self.residuals}
        for name in ("P", "X"):
            val = getattr(self, name)
            out[name] = None if val is None else nm.to_pairs(val)
        out["W"] = None if self.W is None else [nm.to_pairs(w) for w in self.W]
        return out


def similarity_to_cuntz(T, horizon: int = 200, tol=None) -> SimilarityReport:
    """Search for X with T_i = X W_i X^{-1}, W a Cuntz row isometry.

    Finite-dimensional tuples with n >= 2 are never similar: a Cuntz row
    isometry needs [W_1 ... W_n] unitary from C^{nd} onto C^d.
    """
    tol = tol_of(T, tol)
    mats = mats_of(T)
    n, d = len(mats), mats[0].shape[0]
    if not injectivity_check(mats, tol):
        why = "injectivity: row operator has rank < n*d"
        if n >= 2:
            why += " (n >= 2 forces rank <= d < n*d)"
        return SimilarityReport(False, why)
    try:
        ap = asymptotic_P_power_bounded(mats, horizon, tol)
    except NotPowerBounded as exc:
        return SimilarityReport(False, f"not power bounded: {exc}")
    except NotConverged as exc:
        return SimilarityReport(None, f"undetermined: {exc}")
    c = ap.lower
    if c <= tol.eq_tol:
        return SimilarityReport(False, f"lower bound c = {c:.3e}", P=ap.P, c=c)
    X = nm.psd_sqrt(ap.P, tol)
    Xi = np.linalg.inv(X)
    Wm = [Xi @ t @ X for t in mats]
    row = sum(w @ nm.dagger(w) for w in Wm)
    res = {"fixed_point": ap.fixed_point_residual,
           "intertwining": max(nm.opnorm(t @ X - X @ w) for t, w in zip(mats, Wm)),
           "coisometry": nm.opnorm(row - np.eye(d)),
           "isometry": max(nm.opnorm(nm.dagger(Wm[i]) @ Wm[j] - (np.eye(d) if i == j else 0))
                           for i in range(n) for j in range(n))}
    ok = res["coisometry"] <= tol.eq_tol and res["isometry"] <= tol.eq_tol
    s = np.linalg.svd(X, compute_uv=False)
    return SimilarityReport(ok, "similar" if ok else "Cuntz identities fail", P=ap.P, X=X, W=Wm,
                            cond_X=float(s[0] / s[-1]), c=c, residuals=res)


@dataclass
class InvertibilityVerdict:
    invertible: bool | None
    theta_inv_norm: float | None
    sigma_min: list
    degrees: list


def _sigma_min(theta: MultiAnalyticOp, deg: int) -> float:
    a = to_matrix(theta, deg)
    if a.shape[0] != a.shape[1] or a.size == 0:
        return 0.0
    s = np.linalg.svd(a, compute_uv=False)
    return float(s[-1])


def invertible_charfn_criterion(T=None, degrees=(20, 40, 60), theta: MultiAnalyticOp | None = None,
                                tol=None, floor: float = 1e-3, stable: float = 1e-4,
                                decay: float = 0.9) -> InvertibilityVerdict:
    """Decide invertibility of Theta from sigma_min of its finite sections.

    Stabilized sigma_min above ``floor`` means invertible with
    ||Theta^{-1}|| = 1 / sigma_min; a drop below ``floor`` or a ratio of at most
    ``decay`` between the last two sections means not invertible.
    """
    degrees = sorted(degrees)
    if len(degrees) < 2:
        raise ValueError("need at least two truncation degrees")
    if theta is None:
        if T is None:
            raise ValueError("give T or theta")
        tol = tol_of(T, tol)
        mats = mats_of(T)
        if compute_Hc(mats, tol).dim:
            raise NotCNC("tuple has a nonzero coisometric part")
        theta = char_fn(mats, degrees[-1], tol)
    sig = [_sigma_min(theta, m) for m in degrees]
    last, prev = sig[-1], sig[-2]
    if last < floor or (prev > 0 and last / prev <= decay):
        verdict = False
    elif prev > 0 and abs(1 - last / prev) <= stable:
        verdict = True
    else:
        verdict = None
    inv = 1.0 / last if verdict else None
    return InvertibilityVerdict(verdict, inv, sig, list(degrees))


def weighted_shift_charfn(weights: dict) -> tuple:
    """Characteristic function of the bilateral shift e_k -> w_k e_{k+1} (all
    other weights 1) and the condition number of its diagonal similarity to
    the unweighted shift.

    D is spanned by e_k (k in J) and D_* by e_{k+1}; theta_0 e_k = -w_k e_{k+1}
    and for j = k - k' >= 1, theta_j e_k = sqrt(1-w_k^2) w_{k'+1}...w_{k-1}
    sqrt(1-w_{k'}^2) e_{k'+1}.
    """
    J = sorted(weights)
    w = {k: float(weights[k]) for k in J}
    if any(not 0 < v < 1 for v in w.values()):
        raise ValueError("weights must lie in (0, 1)")
    r = len(J)
    coeffs = {(): np.zeros((r, r), dtype=complex)}
    for a, k in enumerate(J):
        coeffs[()][a, a] = -w[k]
        for b, kp in enumerate(J):
            j = k - kp
            if j < 1:
                continue
            between = np.prod([w.get(l, 1.0) for l in range(kp + 1, k)])
            val = np.sqrt(1 - w[k] ** 2) * between * np.sqrt(1 - w[kp] ** 2)
            key = (1,) * j
            coeffs.setdefault(key, np.zeros((r, r), dtype=complex))
            coeffs[key][b, a] += val
    theta = MultiAnalyticOp(1, r, r, coeffs)
    cond = float(np.prod([1.0 / v for v in w.values()]))
    return theta, cond
