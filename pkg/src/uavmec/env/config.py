from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

PHI_LEVELS = (0.25, 0.5, 0.75, 1.0)
RHO_LEVELS = (0.2, 0.4, 0.6, 0.8, 1.0)
ALPHA_LOW, ALPHA_HIGH = 0.5, 1.0
ALPHA_LEVELS = (ALPHA_LOW, ALPHA_HIGH)


class ConfigError(ValueError):
    pass


@dataclass
class EnvConfig:
    """Simulator constants.  Defaults follow the reference parameter table."""

    U: int = 10
    N: int = 5
    T: int = 50
    tau: float = 2.0  # slot length, s
    t_fly: float = 1.0
    tau_c: float = 1.0  # compute/offload budget inside a slot
    H: float = 100.0
    a: float = 10.0
    b: float = 0.6
    kappa: float = 0.2
    varsigma: float = 2.3
    g0: float = 1.42e-4
    W_u: float = 1e6
    P_u: float = 0.1
    N0: float = 1e-9
    V_u: float = 1e9
    F_v: float = 1e10
    eta: float = 1e-27
    gamma1: float = 0.002
    gamma2: float = 70.0
    v_hover: float = 1.0  # speed floor used for the propulsion term at v = 0
    E_uav: float = 5e5
    V_max: float = 50.0
    data_bits: tuple[float, float] = (8e6, 16e6)
    cycles: tuple[float, float] = (1e9, 2e9)
    transition: tuple[tuple[float, float], tuple[float, float]] = ((0.7, 0.3), (0.3, 0.7))
    arena_pad: float = 0.1
    arena_min_half_extent: float = 200.0
    points_per_slot: int = 1

    def __post_init__(self):
        self.data_bits = tuple(self.data_bits)
        self.cycles = tuple(self.cycles)
        self.transition = tuple(tuple(r) for r in self.transition)
        self.validate()

    def validate(self) -> None:
        for name in ("U", "N", "T", "points_per_slot"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        positive = ("tau", "t_fly", "tau_c", "H", "a", "b", "kappa", "varsigma", "g0", "W_u",
                    "P_u", "N0", "V_u", "F_v", "eta", "gamma1", "gamma2", "v_hover", "E_uav",
                    "V_max")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("data_bits", "cycles"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must be an increasing positive range")
        for row in self.transition:
            if len(row) != 2 or min(row) < 0 or abs(sum(row) - 1.0) > 1e-12:
                raise ConfigError("transition must be a 2x2 row-stochastic matrix")
        if self.arena_pad < 0 or self.arena_min_half_extent < 0:
            raise ConfigError("arena padding must be non-negative")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["data_bits"] = list(self.data_bits)
        d["cycles"] = list(self.cycles)
        d["transition"] = [list(r) for r in self.transition]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown environment keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class Scenario:
    """Environment constants plus trace source and criticality assignment."""

    env: EnvConfig = field(default_factory=EnvConfig)
    traces: dict = field(default_factory=lambda: {"synthetic": {"seed": 0, "length": 2000}})
    phi: list[float] | None = None
    rho: list[list[float]] | None = None

    def __post_init__(self):
        U, N = self.env.U, self.env.N
        if self.phi is None:
            self.phi = [PHI_LEVELS[u % len(PHI_LEVELS)] for u in range(U)]
        if self.rho is None:
            self.rho = [[RHO_LEVELS[n % len(RHO_LEVELS)] for n in range(N)] for _ in range(U)]
        if len(self.phi) != U or any(p not in PHI_LEVELS for p in self.phi):
            raise ConfigError(f"phi must list {U} values from {PHI_LEVELS}")
        if len(self.rho) != U or any(len(r) != N or any(x not in RHO_LEVELS for x in r) for r in self.rho):
            raise ConfigError(f"rho must be {U}x{N} with values from {RHO_LEVELS}")
        if not ("synthetic" in self.traces) ^ ("path" in self.traces):
            raise ConfigError("traces must name exactly one of 'synthetic' or 'path'")

    def to_dict(self) -> dict:
        d = self.env.to_dict()
        d.update(traces=self.traces, phi=list(self.phi), rho=[list(r) for r in self.rho])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        traces = d.pop("traces", {"synthetic": {"seed": 0, "length": 2000}})
        phi = d.pop("phi", None)
        rho = d.pop("rho", None)
        return cls(EnvConfig.from_dict(d), traces, phi, rho)


def desk_config(**overrides) -> EnvConfig:
    """Reference constants with task sizes scaled so the 1 s budget is attainable.

    With the table ranges (1-2 MB, 1-2 Gcycles) no decision meets the compute
    budget: the best-case uplink is ~0.44 Mbit/s.  The desk ranges keep the
    channel, CPU and energy constants and shrink only the task sizes.
    """
    base = dict(data_bits=(4e4, 8e4), cycles=(2e8, 4e8))
    base.update(overrides)
    return EnvConfig(**base)
