"""JSON run configuration.

Every block is optional; omitted fields take the values of the reference
cell (N=100, omega=0.5, rho=200, Gamma=5, mu=50) and the [10,2] MDS code.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .experiments import parse_grid
from .model import (CodeFamily, NetworkParams, StorageCode, make_mbr, make_mds, make_msr,
                    make_replication)

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class NetworkBlock:
    N: float = 100.0
    churn_rate: float = 50.0
    omega: float = 0.5
    M: float = 1.0
    Gamma: float = 5.0
    rho_bs: float = 200.0
    rho_d2d: float = 1.0


@dataclass(frozen=True)
class CodeBlock:
    family: str = "MDS"
    n: int | None = 10
    k: int | None = 2
    h: int | None = None
    r: int | None = None


@dataclass(frozen=True)
class ScheduleBlock:
    delta: float | None = None
    delta_grid: str = "log:1e-4:20:400"
    units: str = "mu_delta"
    rho_grid: str = "lin:1:200:200"
    tol: float = 1e-9


@dataclass(frozen=True)
class SimulationBlock:
    intervals: int = 2000
    seed: int = 0
    replications: int = 1
    track_population: bool = False


@dataclass(frozen=True)
class OutputBlock:
    path: str | None = None
    format: str = "csv"


# parameters each family takes, with defaults matching the reference codes
_FAMILY_PARAMS = {
    CodeFamily.MDS: {"n": 10, "k": 2},
    CodeFamily.REPLICATION: {"n": 5},
    CodeFamily.MSR: {"n": 10, "k": 2, "r": 5},
    CodeFamily.MBR: {"n": 10, "h": 3, "r": 5},
}

_BUILDERS = {
    CodeFamily.MDS: make_mds,
    CodeFamily.REPLICATION: make_replication,
    CodeFamily.MSR: make_msr,
    CodeFamily.MBR: make_mbr,
}


@dataclass(frozen=True)
class RunConfig:
    network: NetworkBlock = field(default_factory=NetworkBlock)
    code: CodeBlock = field(default_factory=CodeBlock)
    schedule: ScheduleBlock = field(default_factory=ScheduleBlock)
    simulation: SimulationBlock = field(default_factory=SimulationBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def network_params(self) -> NetworkParams:
        net = self.network
        return NetworkParams.from_churn(net.churn_rate, N=net.N, omega=net.omega, M=net.M,
                                        Gamma=net.Gamma, rho_bs=net.rho_bs, rho_d2d=net.rho_d2d)

    def storage_code(self) -> StorageCode:
        family = CodeFamily(self.code.family)
        kwargs = {k: getattr(self.code, k) for k in _FAMILY_PARAMS[family]}
        return _BUILDERS[family](M=self.network.M, **kwargs)

    def to_time(self, values):
        """Convert schedule values to t.u. according to ``schedule.units``."""
        if self.schedule.units == "mu_delta":
            return [v / self.network.churn_rate for v in values]
        return list(values)


def _check_keys(data, cls, path):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")


def _number(value, path, *, integer=False, minimum=None, strict=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise ConfigError(path, f"must be {'>' if strict else '>='} {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def _network(data):
    _check_keys(data, NetworkBlock, "network")
    out = {}
    for name in ("N", "churn_rate", "M", "rho_bs", "rho_d2d"):
        if name in data:
            out[name] = _number(data[name], f"network.{name}", minimum=0, strict=True)
    if "omega" in data:
        out["omega"] = _number(data["omega"], "network.omega", minimum=0)
    if "Gamma" in data:
        out["Gamma"] = _number(data["Gamma"], "network.Gamma", minimum=1)
    block = NetworkBlock(**out)
    if block.rho_bs < block.rho_d2d:
        raise ConfigError("network.rho_bs", "rho_bs < rho_d2d")
    return block


def _code(data):
    _check_keys(data, CodeBlock, "code")
    raw = data.get("family", "MDS")
    try:
        family = CodeFamily(raw)
    except ValueError:
        names = ", ".join(f.value for f in CodeFamily)
        raise ConfigError("code.family", f"unknown family {raw!r} (one of {names})") from None
    params = dict(_FAMILY_PARAMS[family])
    for name in ("n", "k", "h", "r"):
        if data.get(name) is None:
            continue
        if name not in params:
            raise ConfigError(f"code.{name}", f"not a parameter of {family.value} codes")
        params[name] = _number(data[name], f"code.{name}", integer=True, minimum=1)
    unused = dict.fromkeys(("n", "k", "h", "r"))
    return CodeBlock(family=family.value, **{**unused, **params})


def _schedule(data):
    _check_keys(data, ScheduleBlock, "schedule")
    out = {}
    if data.get("delta") is not None:
        out["delta"] = _number(data["delta"], "schedule.delta", minimum=0)
    for name in ("delta_grid", "rho_grid"):
        if name in data:
            try:
                parse_grid(data[name])
            except (ValueError, AttributeError) as exc:
                raise ConfigError(f"schedule.{name}", str(exc)) from None
            out[name] = data[name]
    if "units" in data:
        if data["units"] not in ("mu_delta", "time"):
            raise ConfigError("schedule.units", "expected 'mu_delta' or 'time'")
        out["units"] = data["units"]
    if "tol" in data:
        out["tol"] = _number(data["tol"], "schedule.tol", minimum=0, strict=True)
    return ScheduleBlock(**out)


def _simulation(data):
    _check_keys(data, SimulationBlock, "simulation")
    out = {}
    if "intervals" in data:
        out["intervals"] = _number(data["intervals"], "simulation.intervals", integer=True, minimum=1)
    if "seed" in data:
        out["seed"] = _number(data["seed"], "simulation.seed", integer=True, minimum=0)
    if "replications" in data:
        out["replications"] = _number(data["replications"], "simulation.replications",
                                      integer=True, minimum=1)
    if "track_population" in data:
        if not isinstance(data["track_population"], bool):
            raise ConfigError("simulation.track_population", "expected true or false")
        out["track_population"] = data["track_population"]
    return SimulationBlock(**out)


def _output(data):
    _check_keys(data, OutputBlock, "output")
    out = {}
    if data.get("path") is not None:
        if not isinstance(data["path"], str):
            raise ConfigError("output.path", "expected a string")
        out["path"] = data["path"]
    if "format" in data:
        if data["format"] not in ("csv", "json"):
            raise ConfigError("output.format", "expected 'csv' or 'json'")
        out["format"] = data["format"]
    return OutputBlock(**out)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises :class:`ConfigError` naming the offending field.
    """
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON: {exc}") from None
    _check_keys(data, RunConfig, "")
    config = RunConfig(
        network=_network(data.get("network", {})),
        code=_code(data.get("code", {})),
        schedule=_schedule(data.get("schedule", {})),
        simulation=_simulation(data.get("simulation", {})),
        output=_output(data.get("output", {})),
    )
    try:
        config.network_params()
    except ValueError as exc:
        raise ConfigError("network", str(exc)) from None
    try:
        config.storage_code()
    except ValueError as exc:
        raise ConfigError("code", str(exc)) from None
    return config


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
