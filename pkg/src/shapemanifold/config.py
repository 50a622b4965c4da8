"""Pipeline configuration: one JSON document driving every CLI stage.

Paths are resolved relative to the directory containing the config file.
All numeric settings have defaults; only the reference geometry path is
mandatory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


from . import ffd as ffd_mod
from . import solver
from .errors import ArtifactError
from .pod import TruncationRule


@dataclass
class SamplingConfig:
    n_train: int = 1500
    n_full: int = 100
    n_reduced: int = 80
    seed: int = 0

    def __post_init__(self):
        if min(self.n_train, self.n_full, self.n_reduced) < 1:
            raise ValueError("sample counts must be >= 1")


@dataclass
class ReductionConfig:
    r2_threshold: float = 0.99
    max_vertices: int | None = 4
    pair: tuple[int, int] | None = None
    polygon_uses_regressed: bool = True


@dataclass
class RomConfig:
    kernel: str = "gaussian"
    epsilon: float | None = None


@dataclass
class OptimizerConfig:
    starts: int = 8
    budget: int = 200
    seed: int | None = None  # falls back to sampling seed + 3


@dataclass
class PipelineConfig:
    reference_stl: Path
    output_dir: Path = Path("out")
    weld_tolerance: float | None = None  # None: scale-relative default
    ffd: ffd_mod.FfdConfig | None = None  # None: built-in lattice over the mesh
    geometry_truncation: TruncationRule = field(
        default_factory=lambda: TruncationRule.energy(0.9999)
    )
    solution_truncation: TruncationRule = field(
        default_factory=lambda: TruncationRule.energy(0.9999)
    )
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    rom: RomConfig = field(default_factory=RomConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    stub: solver.StubConfig = field(default_factory=solver.StubConfig)

    @property
    def optimizer_seed(self) -> int:
        if self.optimizer.seed is not None:
            return self.optimizer.seed
        return self.sampling.seed + 3


def _truncation_from_dict(data: dict) -> TruncationRule:
    if "fixed" in data:
        return TruncationRule.fixed(int(data["fixed"]))
    if "energy" in data:
        return TruncationRule.energy(float(data["energy"]))
    raise ArtifactError("truncation rule needs a 'fixed' or 'energy' key")


def load_pipeline_config(
    path, out_override=None, seed_override: int | None = None
) -> PipelineConfig:
    """Parse a pipeline JSON file, applying CLI overrides."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict) or "reference_stl" not in data:
        raise ArtifactError(f"{path}: config must set 'reference_stl'")
    base = path.resolve().parent

    try:
        cfg = PipelineConfig(reference_stl=(base / data["reference_stl"]))
        if "output_dir" in data:
            cfg.output_dir = base / data["output_dir"]
        if data.get("weld_tolerance") is not None:
            cfg.weld_tolerance = float(data["weld_tolerance"])
        if data.get("ffd") is not None:
            cfg.ffd = ffd_mod.config_from_dict(data["ffd"])
        trunc = data.get("truncation", {})
        if "geometry" in trunc:
            cfg.geometry_truncation = _truncation_from_dict(trunc["geometry"])
        if "solution" in trunc:
            cfg.solution_truncation = _truncation_from_dict(trunc["solution"])
        if "sampling" in data:
            cfg.sampling = SamplingConfig(**data["sampling"])
        if "reduction" in data:
            red = dict(data["reduction"])
            if red.get("pair") is not None:
                red["pair"] = tuple(int(i) for i in red["pair"])
            cfg.reduction = ReductionConfig(**red)
        if "rom" in data:
            cfg.rom = RomConfig(**data["rom"])
        if "optimizer" in data:
            cfg.optimizer = OptimizerConfig(**data["optimizer"])
        if "stub" in data:
            cfg.stub = solver.stub_from_dict(data["stub"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{path}: invalid configuration ({exc})") from exc

    if out_override is not None:
        cfg.output_dir = Path(out_override)
    if seed_override is not None:
        cfg.sampling.seed = seed_override
        cfg.optimizer.seed = seed_override + 3
    return cfg
