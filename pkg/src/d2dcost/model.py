"""Network parameters and storage-code profiles.

A code profile carries everything the cost model needs from an erasure code:
how many nodes must be reachable to download (``h``) or repair (``r``), how
many bits each node stores (``alpha``) and how many bits a repair moves.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "CodeFamily",
    "NetworkParams",
    "StorageCode",
    "ValidationReport",
    "make_mds",
    "make_replication",
    "make_msr",
    "make_mbr",
    "validate",
    "reference_network",
    "reference_codes",
]

# n is considered "much smaller" than N while n <= N / SMALL_N_RATIO.
SMALL_N_RATIO = 5


class CodeFamily(str, enum.Enum):
    MDS = "MDS"
    REPLICATION = "Replication"
    MSR = "MSR"
    MBR = "MBR"


@dataclass(frozen=True)
class NetworkParams:
    """Cell-level constants.

    ``lam`` defaults to ``mu`` so that the expected population stays at ``N``.
    """

    N: float = 100.0
    mu: float = 50.0
    omega: float = 0.5
    M: float = 1.0
    Gamma: float = 5.0
    rho_bs: float = 200.0
    rho_d2d: float = 1.0
    lam: float | None = None

    def __post_init__(self):
        if self.lam is None:
            object.__setattr__(self, "lam", self.mu)
        for name in ("N", "M", "rho_d2d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for name in ("mu", "lam", "omega"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if not self.Gamma >= 1:
            raise ValueError(f"Gamma must be >= 1, got {self.Gamma!r}")
        if self.rho_bs < self.rho_d2d:
            raise ValueError("rho_bs < rho_d2d")

    @property
    def rho(self) -> float:
        """BS to D2D cost ratio."""
        return self.rho_bs / self.rho_d2d

    @property
    def request_rate(self) -> float:
        return self.N * self.omega

    @classmethod
    def from_churn(cls, churn_rate: float, **kwargs) -> "NetworkParams":
        return cls(mu=churn_rate, lam=churn_rate, **kwargs)


@dataclass(frozen=True)
class StorageCode:
    """Storage/repair profile of an (n, k) code.

    ``k`` is a float because MBR parameterizations give fractional dimensions.
    """

    family: CodeFamily
    n: int
    k: float
    h: int
    r: int
    alpha: float
    beta: float
    gamma_d2d: float
    gamma_bs: float
    M: float = 1.0

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def label(self) -> str:
        if self.family is CodeFamily.REPLICATION:
            return f"{self.n}-replication"
        return f"{self.family.value}[{self.n},{self.h},{self.r}]"

    def profile(self) -> tuple:
        """Numeric fields only, for comparing codes across families."""
        return (self.n, self.k, self.h, self.r, self.alpha, self.beta,
                self.gamma_d2d, self.gamma_bs, self.M)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"feasible": self.feasible, "violations": list(self.violations),
                "warnings": list(self.warnings)}


def _positive_int(name, value, minimum=1):
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def _file_size(M):
    if not (M > 0 and math.isfinite(M)):
        raise ValueError(f"M must be finite and > 0, got {M!r}")
    return Fraction(M)


def _build(family, n, k, h, r, alpha, beta, M):
    # gamma_d2d is formed as a float product so that gamma_d2d == r * beta holds exactly
    beta = float(beta)
    alpha = float(alpha)
    return StorageCode(family=family, n=n, k=float(k), h=h, r=r, alpha=alpha,
                       beta=beta, gamma_d2d=r * beta, gamma_bs=alpha, M=float(M))


def make_mds(n: int, k: int, M: float = 1.0) -> StorageCode:
    """(n, k) MDS code: any k nodes serve both download and repair."""
    n = _positive_int("n", n)
    k = _positive_int("k", k)
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    Mf = _file_size(M)
    alpha = Mf / k
    return _build(CodeFamily.MDS, n, k, k, k, alpha, alpha, Mf)


def make_replication(n: int, M: float = 1.0) -> StorageCode:
    n = _positive_int("n", n)
    Mf = _file_size(M)
    return _build(CodeFamily.REPLICATION, n, 1, 1, 1, Mf, Mf, Mf)


def make_msr(n: int, k: int, r: int, M: float = 1.0) -> StorageCode:
    """(n, k) minimum-storage regenerating code with repair access ``r``.

    Each of the ``r`` helpers sends ``M / (k (r - k + 1))`` bits.
    """
    n = _positive_int("n", n)
    k = _positive_int("k", k)
    r = _positive_int("r", r)
    if not k <= r <= n - 1:
        raise ValueError(f"MSR repair access r={r} outside [{k}, {n - 1}]")
    Mf = _file_size(M)
    h = k
    beta = Mf / (h * (r - h + 1))
    return _build(CodeFamily.MSR, n, k, h, r, Mf / k, beta, Mf)


def make_mbr(n: int, h: int, r: int, M: float = 1.0) -> StorageCode:
    """Minimum-bandwidth regenerating code given download access ``h``.

    The code dimension follows from ``k = h (2r - h + 1) / (2r)`` and is
    generally fractional.
    """
    n = _positive_int("n", n)
    h = _positive_int("h", h)
    r = _positive_int("r", r)
    if r < h:
        raise ValueError(f"MBR requires r >= h, got r={r}, h={h}")
    if r > n - 1:
        raise ValueError(f"MBR requires r <= n - 1, got r={r}, n={n}")
    Mf = _file_size(M)
    k = Fraction(h * (2 * r - h + 1), 2 * r)
    beta = Mf * 2 / (h * (2 * r - h + 1))
    return _build(CodeFamily.MBR, n, k, h, r, Mf / k, beta, Mf)


def validate(code: StorageCode, params: NetworkParams) -> ValidationReport:
    """Check a code against the cell; problems are reported, never raised."""
    report = ValidationReport()
    rel = 1e-12
    budget = params.Gamma * params.M
    stored = code.n * code.alpha
    if stored > budget * (1 + rel):
        report.violations.append(
            f"storage_budget: n*alpha = {stored:.6g} exceeds Gamma*M = {budget:.6g}")
    if code.rate < (1 / params.Gamma) * (1 - rel):
        report.violations.append(
            f"code_rate: R = {code.rate:.6g} below 1/Gamma = {1 / params.Gamma:.6g}")
    if code.beta > code.alpha * (1 + rel):
        report.violations.append(f"repair_transfer: beta = {code.beta:.6g} exceeds alpha = {code.alpha:.6g}")
    if not math.isclose(code.M, params.M, rel_tol=rel):
        report.violations.append(f"file_size: code built for M = {code.M:.6g}, network has M = {params.M:.6g}")
    if not math.isclose(code.k * code.alpha, code.M, rel_tol=1e-9):
        report.violations.append("per_node_storage: k*alpha != M")
    if not math.ceil(code.k - 1e-9) <= code.h <= code.n:
        report.violations.append(f"download_access: h = {code.h} outside [ceil(k), n]")
    if not 1 <= code.r <= code.n:
        report.violations.append(f"repair_access: r = {code.r} outside [1, n]")
    elif code.r == code.n:
        report.warnings.append("repair_access: r = n, D2D repair is never possible")
    if code.family is CodeFamily.MBR and code.r < code.h:
        report.violations.append(f"repair_access: MBR requires r >= h, got r = {code.r}, h = {code.h}")
    if code.n > params.N / SMALL_N_RATIO:
        report.warnings.append(f"population: n = {code.n} is not much smaller than N = {params.N:g}")
    return report


def reference_network(**overrides) -> NetworkParams:
    """The reference cell (N=100, omega=0.5, rho=200, mu=50)."""
    base = dict(N=100.0, mu=50.0, omega=0.5, M=1.0, Gamma=5.0, rho_bs=200.0, rho_d2d=1.0)
    base.update(overrides)
    return NetworkParams(**base)


def reference_codes(M: float = 1.0) -> list[StorageCode]:
    return [
        make_mds(10, 2, M),
        make_msr(10, 2, 5, M),
        make_msr(10, 2, 9, M),
        make_mbr(10, 3, 5, M),
        make_mbr(10, 3, 9, M),
        make_replication(5, M),
    ]
