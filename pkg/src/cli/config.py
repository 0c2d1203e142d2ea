# stdlib imports
import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

# internal imports
from src.dec_pomdp.core import DecPomdpEnv
from src.dec_pomdp.gridworld import TeamGridworld
from src.dec_pomdp.matrix_game import MatrixGame
from src.dec_pomdp.null_agent import NullAgentWrapper
from src.exceptions import ConfigError
from src.trainer.core import Hyperparams, load_default_hyperparameters

ENV_KINDS = ("matrix_game", "gridworld")
SECTIONS = ("env", "trainer", "run")


@dataclass(frozen=True)
class EnvConfig:
    """
    Environment selection and parameters.

    Gridworld fields are ignored by the matrix game. ``starts`` is a
    ``;``-separated list of ``row,col`` cells (empty for seeded random starts)
    and ``required = 0`` means every target.
    """

    kind: str = "matrix_game"
    null_agent: bool = False
    width: int = 5
    height: int = 5
    n_agents: int = 3
    sight: int = 1
    episode_limit: int = 30
    step_penalty: float = 0.01
    required: int = 0
    starts: str = ""

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ConfigError("env.kind", f"must be one of {list(ENV_KINDS)}, got {self.kind!r}")
        for name in ("width", "height", "n_agents", "episode_limit"):
            if getattr(self, name) < 1:
                raise ConfigError(f"env.{name}", "must be a positive integer")
        if self.sight < 0:
            raise ConfigError("env.sight", "must be non-negative")
        if self.required < 0:
            raise ConfigError("env.required", "must be non-negative")
        if self.starts:
            cells = self.start_cells()
            if self.kind == "gridworld" and len(cells) != self.n_agents:
                raise ConfigError("env.starts", f"needs {self.n_agents} cells, got {len(cells)}")

    def start_cells(self) -> Optional[List[Tuple[int, int]]]:
        if not self.starts:
            return None
        try:
            return [
                tuple(int(v) for v in cell.split(",")) for cell in self.starts.split(";") if cell.strip()
            ]
        except ValueError:
            raise ConfigError("env.starts", f"cannot parse {self.starts!r} as row,col;row,col")


@dataclass(frozen=True)
class RunConfig:
    """
    Attributes:
        env (EnvConfig)
        hp (Hyperparams): the ``[trainer]`` section, credit strategy and seed included.
        out_dir (Path): run directory for metrics, summaries and checkpoints.
        checkpoint_interval (int): episodes between checkpoints (0 = final only).
        name (str)
    """

    env: EnvConfig = field(default_factory=EnvConfig)
    hp: Hyperparams = field(default_factory=Hyperparams.defaults)
    out_dir: Path = Path("runs/latest")
    checkpoint_interval: int = 0
    name: str = "run"

    def __post_init__(self):
        if self.checkpoint_interval < 0:
            raise ConfigError("run.checkpoint_interval", "must be non-negative")
        if self.out_dir.exists() and not self.out_dir.is_dir():
            raise ConfigError("run.out_dir", f"{self.out_dir} exists and is not a directory")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "env": asdict(self.env),
            "trainer": self.hp.as_dict(),
            "run": {
                "out_dir": str(self.out_dir),
                "checkpoint_interval": self.checkpoint_interval,
                "name": self.name,
            },
        }


def _coerce(section: str, key: str, raw: str, kind: type) -> Any:
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(raw)
            return configparser.ConfigParser.BOOLEAN_STATES[lowered]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is Path:
            return Path(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} as {kind.__name__}")


def _read_section(
    parser: configparser.ConfigParser, section: str, types: Dict[str, type]
) -> Dict[str, Any]:
    if not parser.has_section(section):
        return {}
    values = {}
    for key, raw in parser.items(section):
        if key not in types:
            raise ConfigError(f"{section}.{key}", "unknown key")
        values[key] = _coerce(section, key, raw, types[key])
    return values


def parse_config(text: str) -> RunConfig:
    """Parse an INI run configuration.

    Raises:
        ConfigError: unknown section or key, unparsable value, or a violated invariant.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError("config", str(e).splitlines()[0])
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")

    env_types = {f.name: f.type for f in fields(EnvConfig)}
    trainer_types = {k: type(v) for k, v in load_default_hyperparameters().items()}
    run_types = {"out_dir": Path, "checkpoint_interval": int, "name": str}

    env = EnvConfig(**_read_section(parser, "env", env_types))
    trainer = _read_section(parser, "trainer", trainer_types)
    try:
        hp = Hyperparams.defaults(**trainer)
    except ConfigError as e:
        raise ConfigError(f"trainer.{e.field}", str(e).split(": ", 1)[-1])
    return RunConfig(env=env, hp=hp, **_read_section(parser, "run", run_types))


def load_config(path: Path) -> RunConfig:
    with open(path) as f:
        return parse_config(f.read())


def dump_config(config: RunConfig) -> str:
    """Serialize ``config`` so that ``parse_config(dump_config(c)) == c``."""
    lines = []
    for section, values in config.as_dict().items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in values.items()]
        lines.append("")
    return "\n".join(lines)


def with_overrides(
    config: RunConfig, seed: Optional[int] = None, out_dir: Optional[Path] = None
) -> RunConfig:
    if seed is not None:
        config = replace(config, hp=replace(config.hp, seed=seed))
    if out_dir is not None:
        config = replace(config, out_dir=Path(out_dir))
    return config


def make_env(env: EnvConfig, gamma: float = 0.99) -> DecPomdpEnv:
    """Build the configured environment, wrapped with a null agent when requested."""
    if env.kind == "matrix_game":
        built: DecPomdpEnv = MatrixGame(gamma=gamma)
    else:
        try:
            built = TeamGridworld(
                width=env.width,
                height=env.height,
                n_agents=env.n_agents,
                required=env.required or None,
                sight=env.sight,
                episode_limit=env.episode_limit,
                step_penalty=env.step_penalty,
                starts=env.start_cells(),
                gamma=gamma,
            )
        except ValueError as e:
            raise ConfigError("env", str(e))
    return NullAgentWrapper(built) if env.null_agent else built
