"""Symmetrized with/without-replacement operator means and the norm bounds.

The without-replacement mean is computed exactly for any family size by
Mobius inversion over the partition lattice: the sum over distinct index
tuples equals a signed combination of "collapsed" sums in which tuple
positions are forced equal along the blocks of a partition.  Each collapsed
sum is evaluated by a middle-out dynamic program that only ever keeps the
currently open block indices as array axes, so nothing n^d is enumerated.
Partition-restricted sums ([sigma]) stay enumeration-based and serve as the
independent cross-check at small sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .linalg import min_eig_hermitian, spectral_norm
from .partitions import (
    Partition,
    enumerate_partitions,
    mobius_from_singletons,
    singletons,
    tuples_with_kernel,
)

NORMALIZATION_TOL = 1e-10
PASS_SLACK = 1e-9
MAX_DEGREE = 6


class OperatorFamily:
    """Ordered family A_1..A_n of m x m complex matrices.

    ``normalized`` certifies ||(1/n) sum A_j* A_j - I|| <= 1e-10 (the
    left-handed convention; see ``normalize_family`` for the right-handed
    reading).  ``sup_gram_norm`` is C = sup_k ||A_k* A_k||, cached because
    every bound reuses it.
    """

    def __init__(self, ops):
        stack = np.asarray(ops, dtype=complex)
        if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
            raise ValueError(f"expected n matrices of common square shape, got {stack.shape}")
        if not np.all(np.isfinite(stack)):
            raise ValueError("family has non-finite entries")
        self.ops = stack
        self.n, self.m, _ = stack.shape
        self._sup_gram_norm: Optional[float] = None

    @property
    def mean_gram(self) -> np.ndarray:
        return np.mean(self.ops.conj().transpose(0, 2, 1) @ self.ops, axis=0)

    @property
    def normalization_residual(self) -> float:
        return spectral_norm(self.mean_gram - np.eye(self.m)).value

    @property
    def normalized(self) -> bool:
        return self.normalization_residual <= NORMALIZATION_TOL

    @property
    def sup_gram_norm(self) -> float:
        if self._sup_gram_norm is None:
            self._sup_gram_norm = max(
                spectral_norm(a.conj().T @ a).value for a in self.ops
            )
        return self._sup_gram_norm

    def adjoint(self) -> "OperatorFamily":
        return OperatorFamily(self.ops.conj().transpose(0, 2, 1))

    def to_json(self) -> str:
        """Schema: {"n":..,"m":..,"ops":[[[ [re,im], ... m entries] ... m rows] ... n]}."""
        ops = [
            [[[float(z.real), float(z.imag)] for z in row] for row in op]
            for op in self.ops
        ]
        return json.dumps({"n": self.n, "m": self.m, "ops": ops})

    @staticmethod
    def from_json(text: str) -> "OperatorFamily":
        doc = json.loads(text)
        ops = np.array(
            [[[complex(re, im) for re, im in row] for row in op] for op in doc["ops"]]
        )
        fam = OperatorFamily(ops)
        if fam.n != doc["n"] or fam.m != doc["m"]:
            raise ValueError("declared n/m do not match ops payload")
        return fam


@dataclass
class SymReport:
    """Outcome of one bound check.  passed iff lhs <= rhs + 1e-9 max(1, rhs)."""

    d: int
    lhs: float
    rhs: float
    epsilon: float
    passed: bool
    detail: Optional[List[Tuple[Partition, float, float]]] = None


def normalize_family(ops, side: str = "left") -> OperatorFamily:
    """Rescale a family so the normalization hypothesis holds exactly.

    side="left": returns {A_j M^{-1/2}} with M = (1/n) sum A_j* A_j, so the
    left certificate (1/n) sum B_j* B_j = I holds.  side="right" normalizes
    the right-handed reading (1/n) sum B_j B_j* = I and returns the adjoint
    family, which again carries the left certificate; use it to run every
    bound suite under the opposite adjoint convention.
    """
    fam = OperatorFamily(ops)
    if side == "right":
        stack = fam.ops.conj().transpose(0, 2, 1)
    elif side == "left":
        stack = fam.ops
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    mean_gram = np.mean(stack.conj().transpose(0, 2, 1) @ stack, axis=0)
    eigvals, eigvecs = np.linalg.eigh(mean_gram)
    if eigvals[0] <= 1e-8:
        raise ValueError(
            f"mean Gram matrix is singular (min eigenvalue {eigvals[0]:.3e}); "
            "family cannot be normalized"
        )
    inv_sqrt = (eigvecs * (1.0 / np.sqrt(eigvals))) @ eigvecs.conj().T
    out = OperatorFamily(stack @ inv_sqrt)
    if not out.normalized:
        raise ValueError(
            f"normalization failed: residual {out.normalization_residual:.3e}"
        )
    return out


def _wrap_new_axis(x: np.ndarray, a: np.ndarray, ah: np.ndarray) -> np.ndarray:
    """x (*mid, m, m) -> A_j* x A_j with a fresh j-axis in front: (n, *mid, m, m)."""
    pad = (slice(None),) + (None,) * (x.ndim - 2)
    return ah[pad] @ x[None] @ a[pad]


def _wrap_leading_axis(x: np.ndarray, a: np.ndarray, ah: np.ndarray) -> np.ndarray:
    """x (n, *mid, m, m) -> A_j* x A_j elementwise along the leading j-axis."""
    pad = (slice(None),) + (None,) * (x.ndim - 3)
    return ah[pad] @ x @ a[pad]


def _collapsed_sum(ops: np.ndarray, sigma: Partition, center_last: bool) -> np.ndarray:
    """Sum over all tuples t in {1..n}^d constant on the blocks of sigma of
    the sandwich product.

    center_last=True builds A_{t1}* ... A_{td}* A_{td} ... A_{t1} (innermost
    factor at position d); center_last=False builds
    A_{td}* ... A_{t1}* A_{t1} ... A_{td} (innermost at position 1).
    """
    n, m, _ = ops.shape
    oph = ops.conj().transpose(0, 2, 1)
    order = range(sigma.d, 0, -1) if center_last else range(1, sigma.d + 1)
    pos_to_block = {p: i for i, b in enumerate(sigma.blocks) for p in b}
    remaining = {i: len(b) for i, b in enumerate(sigma.blocks)}
    open_axes: List[int] = []  # block ids; index 0 is the leading array axis
    x = np.eye(m, dtype=complex)
    for p in order:
        b = pos_to_block[p]
        if b not in open_axes:
            if remaining[b] == 1:
                # singleton under this processing order: contract immediately
                x = _wrap_new_axis(x, ops, oph).sum(axis=0)
            else:
                x = _wrap_new_axis(x, ops, oph)
                open_axes.insert(0, b)
        else:
            k = open_axes.index(b)
            if k != 0:
                x = np.moveaxis(x, k, 0)
                open_axes.insert(0, open_axes.pop(k))
            x = _wrap_leading_axis(x, ops, oph)
        remaining[b] -= 1
        if b in open_axes and remaining[b] == 0:
            x = x.sum(axis=0)
            open_axes.pop(0)
    return x


def _distinct_tuple_sum(ops: np.ndarray, d: int, center_last: bool) -> np.ndarray:
    """Exact sum over distinct-index tuples via Mobius inversion on the
    partition lattice."""
    total = np.zeros((ops.shape[1], ops.shape[1]), dtype=complex)
    for sigma in enumerate_partitions(d):
        total += mobius_from_singletons(sigma) * _collapsed_sum(ops, sigma, center_last)
    return total


def _check_degree(fam: OperatorFamily, d: int) -> None:
    if not 1 <= d <= MAX_DEGREE:
        raise ValueError(f"degree d must be in [1, {MAX_DEGREE}], got {d}")


def e_wo(fam: OperatorFamily, d: int) -> np.ndarray:
    """Without-replacement mean ((n-d)!/n!) sum over distinct tuples of
    A_{j1}* ... A_{jd}* A_{jd} ... A_{j1}."""
    _check_degree(fam, d)
    if d > fam.n:
        raise ValueError(f"d = {d} exceeds family size n = {fam.n}: no distinct tuples")
    scale = math.factorial(fam.n - d) / math.factorial(fam.n)
    return scale * _distinct_tuple_sum(fam.ops, d, center_last=True)


def e_wr(fam: OperatorFamily, d: int) -> np.ndarray:
    """With-replacement mean n^{-d} sum over all tuples of
    A_{j1}* ... A_{jd}* A_{jd} ... A_{j1}."""
    _check_degree(fam, d)
    oph = fam.ops.conj().transpose(0, 2, 1)
    x = np.eye(fam.m, dtype=complex)
    for _ in range(d):
        x = np.mean(oph @ x @ fam.ops, axis=0)
    return x


def partition_sum(fam: OperatorFamily, sigma: Partition) -> np.ndarray:
    """[sigma]: sum over tuples with kernel sigma of
    A_{ij}* ... A_{i1}* A_{i1} ... A_{ij} (innermost factor at position 1)."""
    out = np.zeros((fam.m, fam.m), dtype=complex)
    for tup in tuples_with_kernel(fam.n, sigma):
        x = np.eye(fam.m, dtype=complex)
        for p in tup:
            a = fam.ops[p - 1]
            x = a.conj().T @ x @ a
        out += x
    return out


def bound_partition_sum(fam: OperatorFamily, sigma: Partition) -> float:
    """The partition-sum norm bound n^nu * C^(|sigma| - nu) with
    C = sup_k ||A_k* A_k||; requires the normalized-family hypothesis."""
    if not fam.normalized:
        raise ValueError(
            "bound requires a normalized family "
            f"(residual {fam.normalization_residual:.3e})"
        )
    c = fam.sup_gram_norm
    return fam.n ** sigma.nu * c ** (sigma.d - sigma.nu)


def folded_sum(fam: OperatorFamily, sigma: Partition) -> np.ndarray:
    """[[sigma]]: the partition sum with a (1 - A*A) inserted at position 1,
    which must not be a singleton of sigma.

    Evaluated as [gamma] - [sigma] (gamma = sigma with element 1 deleted) and
    cross-checked against the direct enumeration to 1e-10.
    """
    if (1,) in sigma.blocks:
        raise ValueError("position 1 must not be a singleton of sigma")
    gamma = sigma.delete_min()
    via_difference = partition_sum(fam, gamma) - partition_sum(fam, sigma)

    eye = np.eye(fam.m, dtype=complex)
    direct = np.zeros((fam.m, fam.m), dtype=complex)
    for tup in tuples_with_kernel(fam.n, sigma):
        a1 = fam.ops[tup[0] - 1]
        x = eye - a1.conj().T @ a1
        for p in tup[1:]:
            a = fam.ops[p - 1]
            x = a.conj().T @ x @ a
        direct += x
    residual = spectral_norm(direct - via_difference).value
    if residual > 1e-10:
        raise AssertionError(f"folded-sum identity violated: residual {residual:.3e}")
    return via_difference


def folding_residual(mats: Sequence[np.ndarray]) -> float:
    """Residual of the telescoping identity
    I - A_d*...A_1* A_1...A_d = sum_j A_d*...A_{j+1}* (I - A_j*A_j) A_{j+1}...A_d
    for a single tuple of matrices."""
    mats = [np.asarray(a, dtype=complex) for a in mats]
    m = mats[0].shape[0]
    eye = np.eye(m, dtype=complex)
    prod = eye
    for a in mats:
        prod = prod @ a  # builds A_1 A_2 ... A_d, so prod*prod nests A_1 innermost
    lhs = eye - prod.conj().T @ prod
    rhs = np.zeros_like(lhs)
    for j in range(len(mats)):
        x = eye - mats[j].conj().T @ mats[j]
        for a in mats[j + 1 :]:
            x = a.conj().T @ x @ a
        rhs += x
    return spectral_norm(lhs - rhs).value


def _require_normalized(fam: OperatorFamily) -> None:
    if not fam.normalized:
        raise ValueError(
            "check requires a normalized family "
            f"(residual {fam.normalization_residual:.3e})"
        )


def theorem_epsilon(fam: OperatorFamily, d: int) -> float:
    return (1.0 + fam.sup_gram_norm) / fam.n * d * (d - 1) / 2.0


def _partition_detail(fam: OperatorFamily, d: int):
    detail = []
    for sigma in enumerate_partitions(d):
        measured = spectral_norm(partition_sum(fam, sigma)).value
        detail.append((sigma, measured, bound_partition_sum(fam, sigma)))
    return detail


def check_theorem_bound(fam: OperatorFamily, d: int, include_detail: bool = False) -> SymReport:
    """||I - E_wo(fam, d)|| against (1+C)/n * d(d-1)/2."""
    _require_normalized(fam)
    if d > fam.n:
        raise ValueError(f"d = {d} exceeds n = {fam.n}")
    eps = theorem_epsilon(fam, d)
    lhs = spectral_norm(np.eye(fam.m) - e_wo(fam, d)).value
    passed = lhs <= eps + PASS_SLACK * max(1.0, eps)
    detail = _partition_detail(fam, d) if include_detail else None
    return SymReport(d=d, lhs=lhs, rhs=eps, epsilon=eps, passed=passed, detail=detail)


def check_sandwich(fam: OperatorFamily, d: int, include_detail: bool = False) -> SymReport:
    """(1-eps) I <= E_wo(fam, d) <= (1+eps) I as min-eigenvalue order checks."""
    _require_normalized(fam)
    if d > fam.n:
        raise ValueError(f"d = {d} exceeds n = {fam.n}")
    eps = theorem_epsilon(fam, d)
    sd = e_wo(fam, d)
    eye = np.eye(fam.m)
    lower = min_eig_hermitian(sd - (1.0 - eps) * eye)
    upper = min_eig_hermitian((1.0 + eps) * eye - sd)
    worst = max(-lower, -upper, 0.0)
    passed = worst <= PASS_SLACK
    detail = _partition_detail(fam, d) if include_detail else None
    return SymReport(d=d, lhs=worst, rhs=0.0, epsilon=eps, passed=passed, detail=detail)


# --------------------------------------------------------------------------
# Deviation experiment (the O(d*eps) scaling of the random-family version)

FamilySampler = Callable[[int, np.random.Generator], np.ndarray]


def exact_isometry_sampler(m: int) -> FamilySampler:
    """i.i.d. Haar unitaries: A*A = I exactly, so the deviation is zero."""
    from .linalg import haar_unitary

    def draw(n: int, rng: np.random.Generator) -> np.ndarray:
        return np.stack([haar_unitary(m, rng) for _ in range(n)])

    return draw


def perturbed_isometry_sampler(m: int, strength: float = 0.1) -> FamilySampler:
    """A = U (I + eps H) / sqrt(1 + eps^2) with U Haar and H GUE normalized so
    E(H^2) = I, giving E(A*A) = I exactly."""
    from .linalg import haar_unitary

    def draw(n: int, rng: np.random.Generator) -> np.ndarray:
        ops = []
        scale = 1.0 / np.sqrt(1.0 + strength * strength)
        for _ in range(n):
            u = haar_unitary(m, rng)
            g = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
            h = (g + g.conj().T) / np.sqrt(2.0 * m)
            ops.append(scale * (u @ (np.eye(m) + strength * h)))
        return np.stack(ops)

    return draw


@dataclass
class DeviationReport:
    n: int
    d: int
    p: int
    trials: int
    epsilon_hat: float
    epsilon_hat_stderr: float
    delta_wo: float
    delta_wo_stderr: float
    ratio: float
    predicted_delta_scale: float = field(init=False)
    predicted_ratio_scale: float = field(init=False)

    def __post_init__(self):
        self.predicted_delta_scale = self.d * self.epsilon_hat
        self.predicted_ratio_scale = 1.0 + self.d * self.epsilon_hat


def _p_mean(values: np.ndarray, p: int) -> Tuple[float, float]:
    """(E v^p)^(1/p) with a delta-method standard error."""
    powers = values ** p
    mean_p = float(np.mean(powers))
    se_p = float(np.std(powers, ddof=1) / np.sqrt(len(powers))) if len(powers) > 1 else 0.0
    root = mean_p ** (1.0 / p) if mean_p > 0 else 0.0
    se = se_p / (p * mean_p ** ((p - 1) / p)) if mean_p > 0 else se_p
    return root, se


def deviation_experiment(
    sampler: FamilySampler,
    n: int,
    d: int,
    p: int,
    trials: int,
    rng: np.random.Generator,
) -> DeviationReport:
    """Monte Carlo estimate of the deviation quantities for i.i.d. families.

    epsilon_hat = (E ||sum A*A - nI||^p)^(1/p) / n, delta_wo the p-th-moment
    deviation of E_wo,d around its sample mean, and the without/with
    replacement norm ratio.  The Bochner-type norm is realized as a plain
    p-th-moment Monte Carlo estimate; p and the trial count are explicit.
    """
    if trials < 30:
        raise ValueError(f"trials must be >= 30 for a meaningful estimate, got {trials}")
    if p not in (1, 2, 4):
        raise ValueError(f"p must be one of 1, 2, 4, got {p}")
    if d > n // 4:
        raise ValueError(f"d must satisfy d <= n/4 (d << n), got d={d}, n={n}")
    streams = rng.spawn(trials)
    sum_devs = np.empty(trials)
    wo_mats = []
    wo_norms = np.empty(trials)
    wr_norms = np.empty(trials)
    eye = None
    for t, sub in enumerate(streams):
        fam = OperatorFamily(sampler(n, sub))
        if eye is None:
            eye = np.eye(fam.m)
        gram_sum = np.sum(fam.ops.conj().transpose(0, 2, 1) @ fam.ops, axis=0)
        sum_devs[t] = spectral_norm(gram_sum - n * eye).value
        wo = e_wo(fam, d)
        wo_mats.append(wo)
        wo_norms[t] = spectral_norm(wo).value
        wr_norms[t] = spectral_norm(e_wr(fam, d)).value
    eps_hat, eps_se = _p_mean(sum_devs, p)
    eps_hat, eps_se = eps_hat / n, eps_se / n
    mean_wo = np.mean(wo_mats, axis=0)
    centered = np.array([spectral_norm(w - mean_wo).value for w in wo_mats])
    delta_wo, delta_se = _p_mean(centered, p)
    wo_p, _ = _p_mean(wo_norms, p)
    wr_p, _ = _p_mean(wr_norms, p)
    ratio = wo_p / wr_p if wr_p > 0 else float("nan")
    return DeviationReport(
        n=n,
        d=d,
        p=p,
        trials=trials,
        epsilon_hat=eps_hat,
        epsilon_hat_stderr=eps_se,
        delta_wo=delta_wo,
        delta_wo_stderr=delta_se,
        ratio=ratio,
    )
