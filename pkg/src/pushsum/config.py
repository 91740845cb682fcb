"""Experiment configuration: schema validation, preset loading, and
construction of the graph / model / params objects from a config tree."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import stats
from .errors import ConfigError
from .graph import DirectedGraph, parse_graph_file, standard_topology
from .schedule import NetworkParams

PRESET_NAMES = ("star-hi", "star-lo", "path-hi", "path-lo", "cycle-hi", "cycle-lo")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    graph: DirectedGraph
    model: stats.HypothesisModel
    params: NetworkParams
    horizon: int
    seed: int
    mode: str  # learning | raps | audit
    raps_x0: tuple[float, ...]
    raw: dict


def _require(tree: dict, key: str, path: str):
    if key not in tree:
        raise ConfigError(f"missing key {path}.{key}" if path else f"missing key {key}")
    return tree[key]


def _build_distribution(tree, path: str):
    if not isinstance(tree, dict) or "kind" not in tree:
        raise ConfigError(f"{path} must be a mapping with a 'kind'")
    kind = tree["kind"]
    try:
        if kind == "truncated_normal":
            return stats.TruncatedNormal(
                mean=float(_require(tree, "mean", path)),
                var=float(_require(tree, "var", path)),
                a=float(_require(tree, "a", path)),
                b=float(_require(tree, "b", path)),
            )
        if kind == "categorical":
            return stats.Categorical(
                values=tuple(_require(tree, "values", path)),
                probs=tuple(float(p) for p in _require(tree, "probs", path)),
            )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown distribution kind {kind!r}")


def _build_model(tree, path: str) -> stats.HypothesisModel:
    agents = _require(tree, "agents", path)
    if not isinstance(agents, list) or not agents:
        raise ConfigError(f"{path}.agents must be a non-empty list")
    truths = []
    likelihoods = []
    for idx, block in enumerate(agents):
        apath = f"{path}.agents[{idx}]"
        truths.append(_build_distribution(_require(block, "truth", apath), f"{apath}.truth"))
        hyps = _require(block, "hypotheses", apath)
        likelihoods.append(
            tuple(
                _build_distribution(h, f"{apath}.hypotheses[{t}]")
                for t, h in enumerate(hyps)
            )
        )
    try:
        return stats.HypothesisModel(
            likelihoods=tuple(likelihoods),
            truths=tuple(truths),
            beta=float(tree.get("beta", stats.DEFAULT_BETA)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build_params(tree, path: str) -> NetworkParams:
    for key in ("l_del", "l_u", "l_f", "p_w", "p_l"):
        _require(tree, key, path)
    try:
        return NetworkParams(
            l_del=int(tree["l_del"]),
            l_u=int(tree["l_u"]),
            l_f=int(tree["l_f"]),
            p_w=float(tree["p_w"]),
            p_l=float(tree["p_l"]),
        )
    except ValueError as exc:
        # Name the first offending key for the error message.
        for key in ("l_del", "l_u", "l_f", "p_w", "p_l"):
            try:
                NetworkParams(**{key: tree[key]})
            except ValueError:
                raise ConfigError(f"{path}.{key}: {exc}") from exc
        raise ConfigError(f"{path}: {exc}") from exc


def build_config(tree: dict, name: str = "config", base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a config tree and construct all referenced objects."""
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    n = int(_require(tree, "n", ""))
    if "graph_file" in tree:
        gpath = Path(tree["graph_file"])
        if base_dir is not None and not gpath.is_absolute():
            gpath = base_dir / gpath
        try:
            graph = parse_graph_file(gpath.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"graph_file: {exc}") from exc
        if graph.n != n:
            raise ConfigError(f"graph_file has n={graph.n}, config says n={n}")
    else:
        kind = _require(tree, "topology", "")
        if kind not in ("path", "star", "cycle"):
            raise ConfigError(f"topology: unknown kind {kind!r}")
        graph = standard_topology(kind, n)
    mode = tree.get("mode", "learning")
    if mode not in ("learning", "raps", "audit"):
        raise ConfigError(f"mode: must be learning, raps, or audit, got {mode!r}")
    model = _build_model(_require(tree, "model", ""), "model")
    if model.n != n:
        raise ConfigError(f"model.agents has {model.n} entries, config says n={n}")
    params = _build_params(_require(tree, "params", ""), "params")
    horizon = int(_require(tree, "horizon", ""))
    if horizon < 1:
        raise ConfigError("horizon: must be >= 1")
    seed = int(tree.get("seed", 0))
    raps_x0 = tuple(float(v) for v in tree.get("raps_x0", range(1, n + 1)))
    if len(raps_x0) != n:
        raise ConfigError(f"raps_x0 has {len(raps_x0)} entries, config says n={n}")
    return ExperimentConfig(
        name=name,
        graph=graph,
        model=model,
        params=params,
        horizon=horizon,
        seed=seed,
        mode=mode,
        raps_x0=raps_x0,
        raw=tree,
    )


def load_config_file(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        tree = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return build_config(tree, name=path.stem, base_dir=path.parent)


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESET_NAMES:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    text = (
        importlib.resources.files("pushsum").joinpath(f"presets/{name}.yaml").read_text()
    )
    return build_config(yaml.safe_load(text), name=name)
