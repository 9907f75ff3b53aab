"""Sectioned key=value run configuration: parsing, validation, serialization and model builders.

User units in the file (GHz, MHz, us); angular units (rad/us) once built into models.
"""

import configparser
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from app.exceptions import ConfigError, StateValidationError
from app.models.control import ControlChannel, ControlParameterization
from app.models.run import (
    ControlSection, InitialStateMode, ObjectiveSection, ObjectiveSpec, OptimizerOptions, OutputSection,
    PropagationGrid, RunConfig, TargetSection,
)
from app.models.system import TWO_PI, CompositeSystem, SubsystemSpec
from app.services.basis import ensemble_state, ensemble_state_partial

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

ABSENT = ("", "--", "inf", "infinity", "none")
LIST_KEYS = {"carrier_freqs_mhz", "basis_subsystems"}
GRID_KEYS = {"t_us": "final_time", "steps": "steps"}
SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")

STATE_TOL = 1e-10


def _line_index(text: str) -> Dict[Tuple[str, Optional[str]], int]:
    """1-based line numbers of every section header and key."""
    index: Dict[Tuple[str, Optional[str]], int] = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = SECTION_RE.match(line)
        if header:
            section = header.group(1).strip()
            index[(section, None)] = number
            continue
        key = KEY_RE.match(line)
        if key and section is not None:
            index[(section, key.group(1).strip())] = number
    return index


class _Reader:
    def __init__(self, text: str, base_dir: Path):
        self.lines = _line_index(text)
        self.base_dir = base_dir
        self.parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        self.parser.optionxform = str
        try:
            self.parser.read_string(text)
        except configparser.DuplicateOptionError as e:
            raise ConfigError(f"Duplicate key '{e.option}'", section=e.section, key=e.option, line=e.lineno)
        except configparser.DuplicateSectionError as e:
            raise ConfigError("Duplicate section", section=e.section, line=e.lineno)
        except configparser.MissingSectionHeaderError as e:
            raise ConfigError("Key outside any section", line=e.lineno)
        except configparser.ParsingError as e:
            line = e.errors[0][0] if e.errors else None
            raise ConfigError("Malformed line", line=line)

    def line(self, section: str, key: Optional[str] = None) -> Optional[int]:
        return self.lines.get((section, key), self.lines.get((section, None)))

    def raw(self, section: str) -> Dict[str, Any]:
        values: Dict[str, Any] = {}
        for key, value in self.parser.items(section):
            value = value.strip()
            if key in LIST_KEYS:
                values[key] = [item.strip() for item in value.split(",") if item.strip()]
            elif value.lower() in ABSENT and key in ("t1_us", "t2_us", "lab_amp_bound_mhz", "sample_rate_ghz",
                                                     "init_amplitude_scale", "unitary_file", "state_file"):
                values[key] = None
            else:
                values[key] = value
        return values

    def model(self, cls: Type[ModelT], section: str, values: Dict[str, Any],
              aliases: Optional[Dict[str, str]] = None) -> ModelT:
        aliases = aliases or {}
        renamed = {aliases.get(key, key): value for key, value in values.items()}
        try:
            return cls(**renamed)
        except ValidationError as e:
            error = e.errors()[0]
            field = str(error["loc"][0]) if error["loc"] else None
            reverse = {v: k for k, v in aliases.items()}
            key = reverse.get(field, field)
            raise ConfigError(error["msg"], section=section, key=key, line=self.line(section, key),
                              details={"type": error["type"]})

    def resolve(self, section: str, key: str, value: Optional[str]) -> Optional[str]:
        if value is None:
            return None
        path = Path(value)
        if not path.is_absolute():
            path = (self.base_dir / path).resolve()
        if not path.is_file():
            raise ConfigError(f"File not found: {value}", section=section, key=key, line=self.line(section, key))
        return str(path)


def _numbered(sections: List[str], prefix: str) -> List[Tuple[int, str]]:
    numbered = []
    for section in sections:
        if section.startswith(prefix + "."):
            suffix = section[len(prefix) + 1:]
            if not suffix.isdigit():
                raise ConfigError("Section index must be an integer", section=section)
            numbered.append((int(suffix), section))
    numbered.sort()
    expected = list(range(1, len(numbered) + 1))
    if [q for q, _ in numbered] != expected:
        raise ConfigError(f"[{prefix}.<q>] sections must be numbered 1..{len(numbered)} without gaps",
                          details={"found": [q for q, _ in numbered]})
    return numbered


def parse_config_text(text: str, base_dir: Union[str, Path] = ".") -> RunConfig:
    reader = _Reader(text, Path(base_dir))
    sections = reader.parser.sections()
    known = {"crosskerr", "grid", "target", "objective", "optimizer", "output"}
    for section in sections:
        if section not in known and not re.match(r"^(subsystem|control)\.", section):
            raise ConfigError("Unknown section", section=section, line=reader.line(section))

    subsystem_sections = _numbered(sections, "subsystem")
    if not subsystem_sections:
        raise ConfigError("At least one [subsystem.<q>] section is required")
    subsystems = [reader.model(SubsystemSpec, name, reader.raw(name)) for _, name in subsystem_sections]

    crosskerr: Dict[Tuple[int, int], float] = {}
    if reader.parser.has_section("crosskerr"):
        for key, value in reader.raw("crosskerr").items():
            match = re.fullmatch(r"(\d+)\s*-\s*(\d+)", key)
            line = reader.line("crosskerr", key)
            if not match:
                raise ConfigError("Cross-Kerr keys must look like '<p>-<q>'", section="crosskerr", key=key, line=line)
            p, q = int(match.group(1)), int(match.group(2))
            if not (1 <= p <= len(subsystems) and 1 <= q <= len(subsystems)) or p == q:
                raise ConfigError(f"Cross-Kerr pair ({p},{q}) references an invalid subsystem pair",
                                  section="crosskerr", key=key, line=line)
            try:
                crosskerr[(p, q)] = float(value)
            except ValueError:
                raise ConfigError(f"Malformed number '{value}'", section="crosskerr", key=key, line=line)
    try:
        system = CompositeSystem(subsystems=subsystems, crosskerr_mhz=crosskerr)
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], section="crosskerr", line=reader.line("crosskerr"))

    control_sections = _numbered(sections, "control")
    controls = [reader.model(ControlSection, name, reader.raw(name)) for _, name in control_sections]

    if not reader.parser.has_section("grid"):
        raise ConfigError("Missing [grid] section", section="grid")
    grid = reader.model(PropagationGrid, "grid", reader.raw("grid"), aliases=GRID_KEYS)

    def optional(cls: Type[ModelT], section: str) -> ModelT:
        values = reader.raw(section) if reader.parser.has_section(section) else {}
        return reader.model(cls, section, values)

    target = optional(TargetSection, "target")
    target = target.model_copy(update={
        "unitary_file": reader.resolve("target", "unitary_file", target.unitary_file),
        "state_file": reader.resolve("target", "state_file", target.state_file),
    })

    try:
        config = RunConfig(
            system=system,
            controls=controls,
            grid=grid,
            target=target,
            objective=optional(ObjectiveSection, "objective"),
            optimizer=optional(OptimizerOptions, "optimizer"),
            output=optional(OutputSection, "output"),
        )
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], details={"type": e.errors()[0]["type"]})
    logger.debug(f"Parsed configuration: dims={system.dims}, steps={grid.steps}, T={grid.final_time} us")
    return config


def parse_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read configuration file {path}: {e.strerror}")
    return parse_config_text(text, base_dir=path.parent)


def _format(value: Any) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, InitialStateMode):
        return value.value
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(item) for item in value)
    return str(value)


def dump_config(config: RunConfig) -> str:
    """Inverse of parse_config_text for any parsed configuration."""
    lines: List[str] = []

    def section(name: str, values: Dict[str, Any]) -> None:
        lines.append(f"[{name}]")
        for key, value in values.items():
            text = _format(value)
            if text is not None:
                lines.append(f"{key} = {text}")
        lines.append("")

    for q, sub in enumerate(config.system.subsystems, start=1):
        section(f"subsystem.{q}", sub.model_dump())
    if config.system.crosskerr_mhz:
        section("crosskerr", {f"{p}-{q}": value for (p, q), value in sorted(config.system.crosskerr_mhz.items())})
    for q, control in enumerate(config.controls, start=1):
        section(f"control.{q}", control.model_dump())
    section("grid", {"t_us": config.grid.final_time, "steps": config.grid.steps})
    section("target", config.target.model_dump())
    section("objective", config.objective.model_dump())
    section("optimizer", config.optimizer.model_dump())
    section("output", config.output.model_dump())
    return "\n".join(lines)


def load_matrix_csv(path: Union[str, Path], n: Optional[int] = None) -> np.ndarray:
    """Complex matrix from `row,col,re,im` rows."""
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read matrix file {path}: {e}")
    if table.shape[1] != 4:
        raise ConfigError(f"Matrix file {path} must have columns row,col,re,im")
    rows, cols = table[:, 0].astype(int), table[:, 1].astype(int)
    size = n if n is not None else int(max(rows.max(), cols.max())) + 1
    if rows.min() < 0 or cols.min() < 0 or rows.max() >= size or cols.max() >= size:
        raise ConfigError(f"Matrix file {path} has indices outside dimension {size}")
    matrix = np.zeros((size, size), dtype=complex)
    matrix[rows, cols] = table[:, 2] + 1j * table[:, 3]
    return matrix


def build_controls(config: RunConfig) -> ControlParameterization:
    channels = [ControlChannel(num_splines=c.num_splines, carrier_freqs=[TWO_PI * f for f in c.carrier_freqs_mhz])
                for c in config.controls]
    return ControlParameterization(channels=channels, final_time=config.grid.final_time)


def amplitude_bounds(config: RunConfig) -> List[Optional[float]]:
    """Lab amplitude bounds in rad/us, None where unbounded."""
    return [TWO_PI * c.lab_amp_bound_mhz if c.lab_amp_bound_mhz is not None else None for c in config.controls]


def build_objective(config: RunConfig) -> ObjectiveSpec:
    unitary = None
    if config.target.unitary_file is not None:
        unitary = load_matrix_csv(config.target.unitary_file, config.system.dim)
    return ObjectiveSpec(
        target_index=config.target.index,
        unitary=unitary,
        gamma1=config.objective.gamma1,
        gamma2=config.objective.gamma2,
        penalty_width=config.objective.penalty_width_us,
    )


def check_density_matrix(rho: np.ndarray) -> None:
    if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
        raise StateValidationError("Initial state is not Hermitian")
    if abs(np.trace(rho) - 1.0) > STATE_TOL:
        raise StateValidationError("Initial state does not have unit trace",
                                   details={"trace": float(np.trace(rho).real)})
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -STATE_TOL:
        raise StateValidationError("Initial state is not positive semi-definite")


def build_initial_state(config: RunConfig) -> np.ndarray:
    dims = config.system.dims
    mode = config.target.initial_state
    if mode is InitialStateMode.FULL_ENSEMBLE:
        return ensemble_state(config.system.dim)
    if mode is InitialStateMode.PARTIAL_ENSEMBLE:
        return ensemble_state_partial(dims, config.target.basis_subsystems)
    rho = load_matrix_csv(config.target.state_file, config.system.dim)
    check_density_matrix(rho)
    return rho


def basis_register(config: RunConfig) -> List[int]:
    """Subsystems spanned by the ensemble of the configured initial state."""
    if config.target.initial_state is InitialStateMode.PARTIAL_ENSEMBLE:
        return sorted(config.target.basis_subsystems)
    return list(range(1, config.system.count + 1))
