"""Run configuration: a TOML file with fixed sections, strictly validated."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .pde import ParameterDomain, PDEDefinition, get_pde
from .reduced import OnlineConfig, StiffFilter
from .training import TrainConfig


@dataclass
class PdeSection:
    pde: str = "kg"
    domain: Optional[list] = None     # [[lo, hi], ...] overriding the family box
    t_final: Optional[float] = None


@dataclass
class CollocationSection:
    n_interior: int = 2000
    n_boundary: int = 256
    n_initial: int = 256
    strategy: str = "uniform-random"
    seed: int = 0
    filter: Optional[str] = None      # none | max | quantile; unset: "max" for
    filter_threshold: float = 0.8     # burgers (stiff regime), "none" otherwise


@dataclass
class FullPinnSection:
    dims: list = field(default_factory=lambda: [2, 20, 20, 1])
    activation: str = "tanh"
    lr: float = 5e-4
    epochs: int = 10000
    stop_loss: Optional[float] = None
    sa_enabled: bool = False
    sa_lr: Optional[float] = None
    extra_epochs: int = 0
    extra_lr: Optional[float] = None


@dataclass
class OnlineSection:
    lr: float = 0.025
    epochs: int = 2000
    optimizer: str = "plain-gd"


@dataclass
class GreedySection:
    xi_grid: Optional[list] = None    # tensor-grid sizes over the domain
    xi_list: Optional[list] = None    # explicit parameter rows
    xi_file: Optional[str] = None     # CSV of parameter rows
    mu1: Optional[list] = None
    n_max: int = 5
    tol: Optional[float] = None
    seed: int = 0


@dataclass
class EvalSection:
    n_test: int = 20
    grid: list = field(default_factory=lambda: [101, 101])
    seed: int = 0
    svd_snapshots: int = 0


@dataclass
class OutputSection:
    directory: str = "out"


_SECTIONS = {
    "pde": PdeSection,
    "collocation": CollocationSection,
    "full_pinn": FullPinnSection,
    "online": OnlineSection,
    "greedy": GreedySection,
    "eval": EvalSection,
    "output": OutputSection,
}


@dataclass
class RunConfig:
    pde: PdeSection
    collocation: CollocationSection
    full_pinn: FullPinnSection
    online: OnlineSection
    greedy: GreedySection
    eval: EvalSection
    output: OutputSection
    source: Optional[str] = None

    def pde_definition(self) -> PDEDefinition:
        base = get_pde(self.pde.pde)
        changes = {}
        if self.pde.domain is not None:
            changes["domain"] = ParameterDomain(tuple(tuple(b) for b in self.pde.domain))
        if self.pde.t_final is not None:
            changes["t_final"] = float(self.pde.t_final)
        if changes:
            from dataclasses import replace

            base = replace(base, **changes)
        return base

    def train_config(self) -> TrainConfig:
        s = self.full_pinn
        return TrainConfig(
            dims=tuple(s.dims), activation=s.activation, lr=s.lr, epochs=s.epochs,
            stop_loss=s.stop_loss, sa_enabled=s.sa_enabled, sa_lr=s.sa_lr,
            extra_epochs=s.extra_epochs, extra_lr=s.extra_lr,
        )

    def online_config(self) -> OnlineConfig:
        return OnlineConfig(lr=self.online.lr, epochs=self.online.epochs,
                            optimizer=self.online.optimizer)

    def resolved_filter(self) -> str:
        if self.collocation.filter is None:
            return "max" if self.pde.pde == "burgers" else "none"
        return self.collocation.filter

    def stiff_filter(self) -> Optional[StiffFilter]:
        mode = self.resolved_filter()
        if mode == "none":
            return None
        return StiffFilter(threshold=self.collocation.filter_threshold, mode=mode)

    def xi(self) -> np.ndarray:
        g = self.greedy
        given = [k for k, v in (("xi_grid", g.xi_grid), ("xi_list", g.xi_list),
                                ("xi_file", g.xi_file)) if v is not None]
        if len(given) != 1:
            raise ValueError("exactly one of xi_grid, xi_list, xi_file must be set")
        if g.xi_grid is not None:
            return self.pde_definition().domain.tensor_grid(g.xi_grid)
        if g.xi_list is not None:
            return np.asarray(g.xi_list, dtype=np.float64)
        return np.loadtxt(g.xi_file, delimiter=",", ndmin=2)

    def deviations(self) -> list:
        """Flags recording where a run departs from the reference method."""
        out = []
        if self.full_pinn.extra_epochs > 0:
            out.append("lbfgs-phase-replaced-by-decayed-adam")
        if self.online.optimizer != "plain-gd":
            out.append(f"online-optimizer-{self.online.optimizer}")
        return out


def _build_section(name: str, cls, data: dict):
    valid = {f.name for f in fields(cls)}
    unknown = set(data) - valid
    if unknown:
        raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return cls(**data)


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    sections = {
        name: _build_section(name, cls, raw.get(name, {}))
        for name, cls in _SECTIONS.items()
    }
    cfg = RunConfig(**sections, source=str(path))
    if cfg.greedy.xi_file is not None:
        xi_path = Path(cfg.greedy.xi_file)
        if not xi_path.is_absolute():
            xi_path = path.parent / xi_path
            cfg.greedy.xi_file = str(xi_path)
        if not xi_path.exists():
            raise FileNotFoundError(f"xi_file does not exist: {xi_path}")
    get_pde(cfg.pde.pde)   # reject unknown families at load time
    return cfg


def config_hash(cfg: RunConfig) -> str:
    """Digest over the semantic fields; the output location is excluded."""
    payload = {
        name: asdict(getattr(cfg, name))
        for name in _SECTIONS
        if name != "output"
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
