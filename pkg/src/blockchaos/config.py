"""Experiment configuration: per-command schemas, JSON loading and validation.

Values are layered as schema defaults < config file < command-line flags. Every
field is validated before any computation starts and the normalized form is
what gets written into output headers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from .errors import ConfigError, DimensionError
from .model import Ensemble, InteractionSpec, ModelConfig, load_interaction_file

_COMPLEX_RE = re.compile(r"\s*[-+0-9.eEij ]+\s*")


def parse_complex(value) -> complex:
    """Parse ``0+1i``, ``0.2+0.05j``, ``1e-3i`` or ``[re, im]``."""
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float, complex)) and not isinstance(value, bool):
        return complex(value)
    text = str(value).strip().replace(" ", "").replace("i", "j")
    if not text or not _COMPLEX_RE.fullmatch(text):
        raise ValueError(f"not a complex number: {value!r}")
    try:
        return complex(text)
    except ValueError:
        raise ValueError(f"not a complex number: {value!r}") from None


def _list_of(conv):
    def parse(value):
        if isinstance(value, str):
            parts = [p for p in value.split(",") if p.strip()]
        elif isinstance(value, (list, tuple)):
            parts = list(value)
            # a single [re, im] pair given for a complex list
            if conv is parse_complex and len(parts) == 2 and all(isinstance(p, (int, float)) for p in parts):
                parts = [parts]
        else:
            parts = [value]
        if not parts:
            raise ValueError("empty list")
        return [conv(p) for p in parts]
    return parse


def _positive_int(value) -> int:
    if isinstance(value, bool):
        raise ValueError("expected an integer")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"expected an integer, got {value}")
    out = int(value)
    if out < 1:
        raise ValueError(f"must be positive, got {out}")
    return out


def _seed(value) -> int:
    if isinstance(value, bool):
        raise ValueError("expected an integer")
    out = int(value)
    if not 0 <= out < 2 ** 64:
        raise ValueError("must be an unsigned 64-bit integer")
    return out


def _float(value) -> float:
    if isinstance(value, bool):
        raise ValueError("expected a number")
    return float(value)


def _positive_float(value) -> float:
    out = _float(value)
    if not out > 0:
        raise ValueError(f"must be positive, got {out}")
    return out


def _kappa(value) -> float:
    out = _float(value)
    if not 0.0 <= out < 0.5:
        raise ValueError(f"must lie in [0, 0.5), got {out}")
    return out


def _choice(*options):
    def parse(value):
        text = str(value)
        lowered = {o.lower(): o for o in options}
        if text.lower() not in lowered:
            raise ValueError(f"must be one of {', '.join(options)}, got {value!r}")
        return lowered[text.lower()]
    return parse


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if str(value).lower() in ("1", "true", "yes"):
        return True
    if str(value).lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _str(value) -> str:
    return str(value)


REQUIRED = object()


@dataclass(frozen=True)
class Field:
    parse: Callable[[Any], Any]
    default: Any = None
    help: str = ""


MODEL_FIELDS = {
    "d": Field(_positive_int, REQUIRED, "number of blocks D"),
    "n": Field(_positive_int, REQUIRED, "block size N"),
    "ensemble": Field(_choice("GUE", "GOE"), "GUE", "block ensemble"),
    "a_scalar": Field(_float, None, "interaction A = a I"),
    "a_file": Field(_str, None, "JSON file with a dense interaction matrix A"),
    "seed": Field(_seed, 0, "root seed"),
}
RUNTIME_FIELDS = {
    "out": Field(_str, REQUIRED, "output path"),
    "format": Field(_choice("csv", "json"), None, "output format (default from the file extension)"),
    "threads": Field(_positive_int, None, "worker threads (default BLOCKCHAOS_THREADS or 1)"),
    "deterministic": Field(_bool, False, "omit timestamps from output metadata"),
}

COMMAND_FIELDS: Dict[str, Dict[str, Field]] = {
    "sample": {
        "matrix": Field(_choice("H", "Lambda", "HLambda"), "HLambda", "which matrix to emit"),
        "realization": Field(lambda v: int(v), 0, "realization index"),
    },
    "dyson": {
        "z": Field(_list_of(parse_complex), None, "spectral parameters, comma separated"),
        "z2": Field(parse_complex, None, "second spectral parameter; adds M-hat and K"),
        "energies": Field(_list_of(_float), None, "energies for a density table (CSV E,rho)"),
        "quantiles": Field(_list_of(_positive_int), None, "1-based quantile indices (CSV k,gamma_k)"),
        "eta0": Field(_positive_float, 1e-4, "eta used for the density extrapolation"),
    },
    "spectrum": {
        "realization": Field(lambda v: int(v), 0, "realization index"),
    },
    "gaps": {
        "realizations": Field(_positive_int, 1, "number of realizations pooled"),
        "kappa": Field(_kappa, 0.05, "bulk window parameter"),
        "hist_out": Field(_str, None, "also write a gap histogram CSV here"),
    },
    "que": {
        "realizations": Field(_positive_int, 1, "number of realizations"),
        "k": Field(lambda v: int(v), None, "0-based eigenvector index (default DN/2 - 1)"),
        "kappa": Field(_kappa, 0.05, "bulk window parameter"),
    },
    "twores": {
        "z1": Field(parse_complex, REQUIRED, "first spectral parameter"),
        "z2": Field(parse_complex, REQUIRED, "second spectral parameter"),
        "realizations": Field(_positive_int, 2, "number of realizations (>= 2)"),
    },
    "flow": {
        "z0": Field(parse_complex, REQUIRED, "initial spectral parameter, Im z0 > 0"),
        "t_end": Field(_positive_float, None, "final time (default: just past the crossing time)"),
        "im_floor": Field(_positive_float, 1e-6, "stop when Im z_t reaches this value"),
        "points": Field(_positive_int, 50, "number of output times"),
    },
    "sweep": {
        "lambda_exponents": Field(_list_of(_float), None, "grid of exponents e with lambda = N^e"),
        "lambda_values": Field(_list_of(_float), None, "grid of absolute lambda values"),
        "realizations": Field(_positive_int, 20, "realizations per grid point"),
        "kappa": Field(_kappa, 0.05, "bulk window parameter"),
        "index_mode": Field(_choice("center", "bulk"), "center", "eigenvector indices used for QUE statistics"),
    },
}


def fields_for(command: str) -> Dict[str, Field]:
    if command not in COMMAND_FIELDS:
        raise ConfigError(f"unknown command {command!r}")
    out = dict(MODEL_FIELDS)
    out.update(COMMAND_FIELDS[command])
    out.update(RUNTIME_FIELDS)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment: the command, its model and the normalized parameters."""

    command: str
    model: ModelConfig
    params: Dict[str, Any]

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_dict(self) -> Dict[str, Any]:
        out = {"command": self.command}
        out.update(self.params)
        return out


def load_config_file(path) -> Dict[str, Any]:
    """Read a JSON object from ``path``; an empty file is an empty object."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def build_config(command: str, file_values: Optional[Dict[str, Any]] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Merge defaults, file values and overrides, then validate every field."""
    schema = fields_for(command)
    file_values = dict(file_values or {})
    file_command = file_values.pop("command", None)
    if file_command is not None and file_command != command:
        raise ConfigError(f"config.command: file is for {file_command!r}, not {command!r}")
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise ConfigError(f"config: unknown field(s) for {command}: {', '.join(unknown)}")
    merged = {k: f.default for k, f in schema.items()}
    merged.update(file_values)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    missing = sorted(k for k, v in merged.items() if v is REQUIRED)
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    params = {}
    for key, value in merged.items():
        if value is None:
            params[key] = None
            continue
        try:
            params[key] = schema[key].parse(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config.{key}: {exc}") from None
    _check_command(command, params)
    return ExperimentConfig(command, _model_config(params), params)


def _model_config(params) -> ModelConfig:
    if params.get("a_scalar") is not None and params.get("a_file") is not None:
        raise ConfigError("config.a_scalar / config.a_file: give at most one interaction")
    if params.get("a_file") is not None:
        try:
            interaction = load_interaction_file(params["a_file"], params["n"])
        except DimensionError as exc:
            raise ConfigError(f"config.a_file: {exc}") from None
        except OSError as exc:
            raise ConfigError(f"config.a_file: cannot read {params['a_file']}: {exc}") from None
    elif params.get("a_scalar") is not None:
        interaction = InteractionSpec.scalar(params["a_scalar"])
    else:
        interaction = InteractionSpec.zero()
    return ModelConfig(params["d"], params["n"], Ensemble.parse(params["ensemble"]), interaction, params["seed"])


def _check_command(command, params) -> None:
    if command == "dyson":
        if not any(params.get(k) for k in ("z", "energies", "quantiles")):
            raise ConfigError("dyson: give at least one of --z, --energies, --quantiles")
        if params.get("z2") is not None and not params.get("z"):
            raise ConfigError("config.z2: needs --z")
    if command == "twores" and params["realizations"] < 2:
        raise ConfigError("config.realizations: two-resolvent estimates need at least 2 realizations")
    if command == "sweep":
        exps, vals = params.get("lambda_exponents"), params.get("lambda_values")
        if (exps is None) == (vals is None):
            raise ConfigError("sweep: give exactly one of --lambda-exponents and --lambda-values")
    if command in ("twores", "dyson"):
        for key in ("z", "z1", "z2"):
            zs = params.get(key)
            zs = zs if isinstance(zs, list) else [zs]
            for z in zs:
                if z is not None and z.imag == 0:
                    raise ConfigError(f"config.{key}: spectral parameters need Im z != 0")
    if command == "flow" and params["z0"].imag <= 0:
        raise ConfigError("config.z0: the flow needs Im z0 > 0")


def normalized_form(cfg: ExperimentConfig) -> Dict[str, Any]:
    """JSON-ready normalized config (complex as [re, im]); reloads to the same config."""
    from .io import to_jsonable

    return to_jsonable({k: v for k, v in cfg.to_dict().items() if v is not None})
