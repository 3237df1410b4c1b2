"""Run configuration: YAML text validated into pydantic models.

Parse errors carry the YAML line; validation errors carry the dotted field
path and, when it can be located, the line of the offending key.
"""

import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSpec(_Strict):
    L: float = Field(2 * math.pi, gt=0)
    d: Literal[1, 2] = 1
    n: int = 128

    @model_validator(mode="after")
    def _pow2(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        return self


class PotentialSpec(_Strict):
    kind: Literal["cosine", "kuramoto", "fourier"] = "cosine"
    modes: Optional[List[List[int]]] = None
    coeffs: Optional[List[float]] = None  # real cosine amplitudes per mode pair

    @model_validator(mode="after")
    def _fourier(self):
        if self.kind == "fourier":
            if not self.modes or self.coeffs is None or len(self.modes) != len(self.coeffs):
                raise ValueError("fourier potential needs matching 'modes' and 'coeffs'")
        return self


class GraphopSpec(_Strict):
    kind: Literal["identity", "constant", "power-law", "spherical", "edge-list", "kernel-csv",
                  "erdos-renyi-graph", "power-law-graph", "complete-graph"] = "identity"
    m: Union[int, List[int]] = 1
    p: Optional[float] = Field(None, ge=0, le=1)
    alpha: Optional[float] = Field(None, gt=0, lt=1)
    beta_edge: Optional[float] = None
    quadrature: Literal["cell", "midpoint"] = "cell"
    n_sphere: int = 32
    m_equator: int = 64
    balance: bool = True
    path: Optional[str] = None
    r_N: float = Field(1.0, gt=0, le=1)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _needs(self):
        need = {"constant": ["p"], "power-law": ["alpha"], "edge-list": ["path"], "kernel-csv": ["path"],
                "erdos-renyi-graph": ["p"], "power-law-graph": ["alpha", "beta_edge"]}
        for key in need.get(self.kind, []):
            if getattr(self, key) is None:
                raise ValueError(f"graphop kind {self.kind!r} requires '{key}'")
        ms = self.m if isinstance(self.m, list) else [self.m]
        if not ms or any(v < 1 for v in ms):
            raise ValueError("node counts must be positive")
        return self

    @property
    def m_list(self):
        return self.m if isinstance(self.m, list) else [self.m]


class TimeSpec(_Strict):
    dt: float = Field(1e-3, gt=0)
    T: float = Field(10.0, ge=0)
    cadence: Optional[float] = Field(0.05, gt=0)
    snapshot_cadence: Optional[float] = Field(None, gt=0)


class InitialSpec(_Strict):
    kind: Literal["perturbed-uniform", "von-mises-mixture"] = "perturbed-uniform"
    eps: float = 0.5
    mode: int = 1
    phase: float = 0.0
    centers: Optional[List[float]] = None
    concentrations: Optional[List[float]] = None
    weights: Optional[List[float]] = None
    modulation: Union[Literal["none", "ramp", "alternating", "sphere-z"], List[float]] = "none"


class FrequencySpec(_Strict):
    kind: Literal["dirac", "gaussian", "uniform", "custom"] = "dirac"
    omega: float = 0.0
    sigma: float = Field(1.0, gt=0)
    mean: float = 0.0
    n_nodes: int = Field(16, ge=1)
    low: float = -1.0
    high: float = 1.0
    atoms: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def _atoms(self):
        if self.kind == "custom" and not self.atoms:
            raise ValueError("custom frequency distribution needs 'atoms' as (omega, weight) pairs")
        return self


class ParticleSpec(_Strict):
    N: List[int] = [250, 1000, 4000]
    seeds: int = Field(8, ge=1)
    dt: float = Field(0.02, gt=0)
    T: float = Field(5.0, gt=0)
    entropy_window: Tuple[float, float] = (1.0, 5.0)
    bandwidth_factor: float = Field(0.9, gt=0)  # h = factor * N^(-1/5)


class CheckSpec(_Strict):
    rate_slack: float = Field(1.1, ge=1)
    mass_tol: float = 1e-9
    positivity_tol: float = 1e-10
    margin_tol: float = 1e-8


class RunConfig(_Strict):
    model: Literal["homogeneous", "graphop", "sakaguchi", "particles"] = "homogeneous"
    grid: GridSpec = GridSpec()
    potential: PotentialSpec = PotentialSpec()
    graphop: GraphopSpec = GraphopSpec()
    kappa: Optional[float] = Field(None, ge=0)
    kappa_fraction: Optional[float] = Field(None, gt=0)  # of the decay threshold
    beta_temp: float = Field(1.0, gt=0)
    frequency: FrequencySpec = FrequencySpec()
    time: TimeSpec = TimeSpec()
    initial: InitialSpec = InitialSpec()
    particles: ParticleSpec = ParticleSpec()
    checks: CheckSpec = CheckSpec()
    seed: int = 0
    output: Optional[str] = None

    @model_validator(mode="after")
    def _consistency(self):
        if (self.kappa is None) == (self.kappa_fraction is None):
            raise ValueError("give exactly one of 'kappa' and 'kappa_fraction'")
        if self.model == "sakaguchi" and self.grid.d != 1:
            raise ValueError("the frequency model needs grid.d = 1")
        if self.model == "homogeneous" and self.graphop.kind != "identity":
            raise ValueError("homogeneous model uses the identity graphop")
        if self.graphop.path is not None and not Path(self.graphop.path).is_file():
            raise ValueError(f"graphop.path {self.graphop.path!r} does not exist")
        if self.potential.kind == "kuramoto" and self.grid.d != 1:
            raise ValueError("kuramoto potential is one-dimensional")
        return self


def _key_line(root, loc):
    """Line (1-based) of the YAML key at path ``loc`` in a composed node tree."""
    node, line = root, None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == str(part):
                    node, line = v, k.start_mark.line + 1
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text, source="<config>"):
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = [p for p in err["loc"] if not isinstance(p, str) or not p.startswith("function-")]
            field = ".".join(str(p) for p in loc) or "<root>"
            line = _key_line(root, loc) if root is not None else None
            where = f"{source}:{line}" if line else source
            msgs.append(f"{where}: field '{field}': {err['msg']}")
        raise ConfigError("\n".join(msgs)) from None


def load_config(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path!r} not found")
    return parse_config(p.read_text(), source=str(p))


def config_from_dict(data):
    return parse_config(yaml.safe_dump(data, sort_keys=False))
