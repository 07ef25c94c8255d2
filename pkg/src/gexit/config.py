"""Run configuration: TOML system descriptions and built-in scheme presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from importlib import resources
import hashlib
import json
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cache import TableCache, default_dir
from .channel import get_constellation
from .coupling import CouplingConfig
from .exit import ComponentCode
from .systems import (
    DetectorLdpcSystem,
    DetectorScTcSystem,
    LdpcSystem,
    NodeType,
    ScTcSystem,
    Settings,
    binary_family,
)
from .trellis import ConvCode

KINDS = ("sctc", "ldpc", "sctc-detector", "ldpc-detector")
PRESETS = tuple(f"S{i}" for i in range(1, 9))


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class Numerics:
    degree: int = 20
    seed: int = 0
    block_len: int = 10_000
    n_blocks: int = 20
    n_bits: int = 200_000
    n_symbols: int = 50_000
    n_mc: int = 10_000
    exit_points: int = 101
    surface_points: int = 51
    detector_h_points: int = 41
    detector_mi_points: int = 26
    dx: float = 1e-3
    dh: float = 1e-2
    dh_fine: float = 1e-3


@dataclass
class CouplingSection:
    b: list = field(default_factory=lambda: [0.5, 0.5])
    L: int = 50
    max_iters: int = 20_000
    tol: float = 1e-4
    bracket: list | None = None


@dataclass
class RunConfig:
    name: str
    kind: str
    modulation: str
    system: dict
    numerics: Numerics = field(default_factory=Numerics)
    coupling: CouplingSection = field(default_factory=CouplingSection)
    description: str = ""
    fast_kernel: bool = False
    cache_dir: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k != "cache_dir"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def settings(self, pool=None) -> Settings:
        n = self.numerics
        return Settings(degree=n.degree, fast_kernel=self.fast_kernel, seed=n.seed, block_len=n.block_len,
                        n_blocks=n.n_blocks, n_bits=n.n_bits, n_symbols=n.n_symbols, n_mc=n.n_mc,
                        exit_points=n.exit_points, surface_points=n.surface_points,
                        detector_h_points=n.detector_h_points, detector_mi_points=n.detector_mi_points,
                        dx=n.dx, cache=TableCache(self.cache_dir or default_dir()), pool=pool)

    def coupling_config(self, paper_scale: bool = False) -> CouplingConfig:
        c = self.coupling
        if paper_scale:
            return CouplingConfig.paper_scale(tuple(c.b))
        return CouplingConfig(b=tuple(c.b), L=c.L, max_iters=c.max_iters, tol=c.tol)

    def build(self, pool=None):
        return build_system(self, self.settings(pool))


def _section(raw: dict, cls, name: str):
    data = raw.get(name, {})
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return cls(**data)


def parse_config(raw: dict) -> RunConfig:
    for key in ("name", "kind", "modulation"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")
    if raw["kind"] not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}")
    system = {k: v for k, v in raw.items()
              if k not in ("name", "kind", "modulation", "numerics", "coupling", "description", "fast_kernel",
                           "cache_dir")}
    cfg = RunConfig(name=raw["name"], kind=raw["kind"], modulation=raw["modulation"], system=system,
                    numerics=_section(raw, Numerics, "numerics"), coupling=_section(raw, CouplingSection, "coupling"),
                    description=raw.get("description", ""), fast_kernel=bool(raw.get("fast_kernel", False)),
                    cache_dir=raw.get("cache_dir"))
    try:
        get_constellation(cfg.modulation)
    except (KeyError, ValueError, OSError) as exc:
        raise ConfigError(f"unknown modulation '{cfg.modulation}': {exc}") from None
    return cfg


def preset_path(name: str):
    return resources.files("gexit") / "presets" / f"{name}.toml"


def load_config(source: str) -> RunConfig:
    """Load a config file, or a built-in preset by name (S1..S8)."""
    if source.upper() in PRESETS and not Path(source).exists():
        text = preset_path(source.upper()).read_text()
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {source}")
        text = path.read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return parse_config(raw)


def _conv(spec: dict) -> ConvCode:
    try:
        return ConvCode(int(spec["feedback"]), tuple(int(g) for g in spec["feedforward"]),
                        systematic=bool(spec.get("systematic", True)), terminate=bool(spec.get("terminate", True)))
    except KeyError as exc:
        raise ConfigError(f"convolutional code needs {exc}") from None


def component_code(spec: dict) -> ComponentCode:
    code = spec.get("code")
    if code == "repetition":
        return ComponentCode.repetition(int(spec["length"]))
    if code == "spc":
        return ComponentCode.spc(int(spec["length"]))
    if code == "hamming-15-11":
        return ComponentCode.hamming_15_11()
    if code == "matrix":
        return ComponentCode.from_matrix(spec["rows"])
    raise ConfigError(f"unknown component code '{code}'")


def _node_types(items, what: str) -> list[NodeType]:
    if not items:
        raise ConfigError(f"at least one {what} type is required")
    return [NodeType(component_code(it), float(it["fraction"])) for it in items]


def _degree_dist(spec: dict) -> tuple[dict, dict]:
    try:
        lam = {int(k): float(v) for k, v in spec["lambda"].items()}
        rho = {int(k): float(v) for k, v in spec["rho"].items()}
    except KeyError as exc:
        raise ConfigError(f"degree_distribution needs {exc}") from None
    return lam, rho


def _dd_node_types(lam: dict, rho: dict):
    """Edge-perspective distributions as node-fraction repetition/SPC types."""
    def node(edge):
        tot = sum(v / k for k, v in edge.items())
        return {k: (v / k) / tot for k, v in edge.items()}

    vn = [NodeType(ComponentCode.repetition(d), f) for d, f in node(lam).items()]
    cn = [NodeType(ComponentCode.spc(d), f) for d, f in node(rho).items()]
    return vn, cn


def build_system(cfg: RunConfig, settings: Settings):
    const = get_constellation(cfg.modulation)
    s = cfg.system
    try:
        if cfg.kind == "sctc":
            return ScTcSystem(binary_family(const), _conv(s["outer"]), _conv(s["inner"]), settings, cfg.name)
        if cfg.kind == "sctc-detector":
            return DetectorScTcSystem(const, _conv(s["outer"]), _conv(s["inner"]), settings, cfg.name)
        if cfg.kind == "ldpc-detector":
            lam, rho = _degree_dist(s["degree_distribution"])
            return DetectorLdpcSystem(const, lam, rho, settings, cfg.name)
        if "degree_distribution" in s:
            vn, cn = _dd_node_types(*_degree_dist(s["degree_distribution"]))
        else:
            vn = _node_types(s.get("variable_nodes"), "variable-node")
            cn = _node_types(s.get("check_nodes"), "check-node")
        return LdpcSystem(binary_family(const), vn, cn, settings, cfg.name)
    except KeyError as exc:
        raise ConfigError(f"missing system section {exc}") from None
