# stdlib imports
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

# external imports
import numpy as np
from loguru import logger

# internal imports
from src.approximator.agent import AgentNet
from src.approximator.core import ParamVector
from src.approximator.critic import CriticNet
from src.exceptions import CheckpointError

FORMAT_VERSION = 1
MANIFEST = "manifest.json"


def _describe(params: ParamVector, payload: str, config: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "payload": payload,
        "size": len(params),
        "version": params.version,
        "config": config,
        "segments": [
            {"name": s.name, "offset": s.offset, "shape": list(s.shape)} for s in params
        ],
    }


def save_checkpoint(
    directory: Path,
    critic: CriticNet,
    agents: Sequence[AgentNet],
    episode: int = 0,
    extra: Dict[str, Any] = None,
) -> Path:
    """Write a manifest plus one flat ``.npy`` payload per network into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "episode": episode,
        "critic": _describe(critic.params, "critic.npy", critic.config()),
        "agents": [
            _describe(agent.params, f"agent{i}.npy", agent.config()) for i, agent in enumerate(agents)
        ],
        "extra": extra or {},
    }
    np.save(directory / "critic.npy", critic.params.data)
    for i, agent in enumerate(agents):
        np.save(directory / f"agent{i}.npy", agent.params.data)
    with open(directory / MANIFEST, "w") as f:
        json.dump(manifest, f, indent=2)
    logger.debug(f"checkpoint for episode {episode} written to {directory}")
    return directory


def _restore(params: ParamVector, entry: Dict[str, Any], directory: Path) -> None:
    expected = [(s["name"], tuple(s["shape"])) for s in entry["segments"]]
    if expected != params.layout:
        raise CheckpointError(f"Segment layout of {entry['payload']} does not match the network.")
    try:
        data = np.load(directory / entry["payload"])
    except (OSError, ValueError) as e:
        raise CheckpointError(f"Cannot read payload {entry['payload']}: {e}")
    if data.shape != (entry["size"],) or len(params) != entry["size"]:
        raise CheckpointError(
            f"Payload {entry['payload']} holds {data.size} values, manifest says {entry['size']}."
        )
    params.data[:] = data
    params.version = int(entry.get("version", 0))


def read_manifest(directory: Path) -> Dict[str, Any]:
    try:
        with open(Path(directory) / MANIFEST) as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Cannot read checkpoint manifest in {directory}: {e}")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"Checkpoint format version {version} is not supported (expected {FORMAT_VERSION})."
        )
    return manifest


def load_checkpoint(directory: Path) -> Tuple[CriticNet, List[AgentNet], Dict[str, Any]]:
    """Rebuild the critic and agents stored in ``directory``.

    Raises:
        CheckpointError: missing or unreadable files, version or layout mismatch.
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    try:
        critic = CriticNet(**manifest["critic"]["config"])
        agents = [AgentNet(**entry["config"]) for entry in manifest["agents"]]
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"Malformed network config in manifest: {e}")
    _restore(critic.params, manifest["critic"], directory)
    for agent, entry in zip(agents, manifest["agents"]):
        _restore(agent.params, entry, directory)
    return critic, agents, manifest
