"""Command-line front end.

Four subcommands, each driven by a JSON config document:

* ``rate``     -- bounds, secrecy budget and key rate for one channel/profile
* ``table``    -- channel-averaged rates over cases x y_max x ell_raw (CSV)
* ``optimize`` -- intensity/probability/bias optimization for one channel
* ``errstudy`` -- relative-error study of the bounds (CSV)

Exit codes: 0 success, 1 config error (with a line-numbered diagnostic),
2 rate degraded to zero by an ill-defined phase-error inflation.
Infinity is spelled ``"inf"`` in configs and outputs.  Identical config
and seed produce byte-identical outputs.
"""

import argparse
import csv
import io
import json
import math
import sys

from . import backend
from .channel import FiberChannelModel, SamplerConfig, channel_truth_from_dict
from .experiments import (
    CASES,
    CaseDefinition,
    average_key_rate,
    baseline_error_study,
    generalized_error_study,
)
from .keyrate import evaluate_rate
from .optimize import MU_CAP_DEFAULT, MU_MIN_DEFAULT, optimize_profile
from .profiles import IntensityProfile, ProtocolParams

__all__ = ["main", "ConfigError", "load_report", "load_csv_rows"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ILL_GAMMA = 2

PRESETS = {
    "paper-defaults": {
        "channel": {
            "type": "fiber",
            "p_ap": 4e-2,
            "p_dc": 6e-7,
            "e_mis": 5e-3,
            "eta_ch": 1e-2,
            "eta_sys": 1e-3,
        },
        "protocol": {
            "s_x": 1e9,
            "eps_cor": 1e-15,
            "kappa": 1e-15,
            "chi_policy": "general",
            "mode": "finite",
        },
    }
}


class ConfigError(Exception):
    """Invalid run configuration; message carries a line hint when known."""


def _find_line(raw: str, key: str) -> str:
    needle = f'"{key}"'
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if needle in line:
            return f" (line {lineno})"
    return ""


def _reject_unknown(obj: dict, allowed, raw: str, where: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(
                f"unknown key {key!r} in {where}{_find_line(raw, key)}; "
                f"allowed: {sorted(allowed)}"
            )


def _require(obj: dict, keys, raw: str, where: str):
    for key in keys:
        if key not in obj:
            raise ConfigError(f"missing required key {key!r} in {where}")


def _as_number(value, where: str, raw: str) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number or \"inf\"{_find_line(raw, where.split('.')[-1])}")
    return float(value)


def load_config(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path} (line {exc.lineno}): {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config root must be a JSON object (line 1)")
    return obj, raw


def _merge_preset(config: dict, preset_name: str | None) -> dict:
    if preset_name is None:
        return config
    if preset_name not in PRESETS:
        raise ConfigError(f"unknown preset {preset_name!r}; available: {sorted(PRESETS)}")
    merged = {}
    for key, value in PRESETS[preset_name].items():
        merged[key] = dict(value) if isinstance(value, dict) else value
    for key, value in config.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    return merged


def _build_channel(obj: dict, raw: str):
    _require(obj, ["type"], raw, "channel")
    kind = obj["type"]
    if kind == "fiber":
        _reject_unknown(obj, {"type", "p_ap", "p_dc", "e_mis", "eta_ch", "eta_sys"}, raw, "channel")
        kwargs = {k: v for k, v in obj.items() if k != "type"}
        try:
            return FiberChannelModel(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid fiber channel: {exc}") from exc
    if kind == "truth":
        _reject_unknown(obj, {"type", "m_max", "y_x", "y_z", "e_x", "e_z"}, raw, "channel")
        try:
            return channel_truth_from_dict({k: v for k, v in obj.items() if k != "type"})
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid explicit channel: {exc}") from exc
    raise ConfigError(f"channel.type must be 'fiber' or 'truth', got {kind!r}")


def _build_profile(obj: dict, raw: str) -> IntensityProfile:
    _reject_unknown(obj, {"intensities", "probabilities", "p_x"}, raw, "profile")
    _require(obj, ["intensities", "probabilities", "p_x"], raw, "profile")
    try:
        return IntensityProfile(obj["intensities"], obj["probabilities"], obj["p_x"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid profile: {exc}") from exc


def _build_protocol(obj: dict, raw: str, default_mode: str = "finite") -> ProtocolParams:
    _reject_unknown(obj, {"s_x", "eps_cor", "kappa", "chi_policy", "mode"}, raw, "protocol")
    kwargs = dict(obj)
    if "s_x" in kwargs:
        kwargs["s_x"] = _as_number(kwargs["s_x"], "protocol.s_x", raw)
    kwargs.setdefault("mode", default_mode)
    if kwargs.get("s_x") == math.inf:
        kwargs["mode"] = "asymptotic"
        kwargs["s_x"] = 1e9
    try:
        return ProtocolParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid protocol parameters: {exc}") from exc


def _json_safe(value):
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return repr(float(value))


# --- subcommands -----------------------------------------------------------


def cmd_rate(args) -> int:
    config, raw = load_config(args.config)
    config = _merge_preset(config, args.preset)
    _reject_unknown(config, {"channel", "profile", "protocol"}, raw, "config")
    _require(config, ["channel", "profile"], raw, "config")
    channel = _build_channel(config["channel"], raw)
    profile = _build_profile(config["profile"], raw)
    params = _build_protocol(config.get("protocol", {}), raw)

    result = evaluate_rate(profile, params, channel)
    bounds = result.bounds
    report = {
        "command": "rate",
        "backend": backend.backend_name(),
        "rate": result.rate,
        "eps_sec": result.eps_sec,
        "final_length": result.final_length,
        "converged": result.converged,
        "iterations": result.iterations,
        "status": result.status,
        "bounds": None
        if bounds is None
        else {
            "y_x0": bounds.y_x0,
            "y_x1": bounds.y_x1,
            "y_z0": bounds.y_z0,
            "y_z1": bounds.y_z1,
            "y1e1_z": bounds.y1e1_z,
            "e_z1": bounds.e_z1,
            "e_p": bounds.e_p,
        },
        "profile": {
            "intensities": list(profile.intensities.values),
            "probabilities": list(profile.probabilities),
            "p_x": profile.p_x,
        },
        "mode": params.mode,
    }
    _emit(json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n", args.output)
    return EXIT_ILL_GAMMA if result.status == "ill_gamma" else EXIT_OK


def _case_list(config: dict, raw: str):
    cases = []
    for label in config.get("cases", []):
        if label not in CASES:
            raise ConfigError(f"unknown case label {label!r}; available: {sorted(CASES)}")
        cases.append(CASES[label])
    for spec_ in config.get("profiles", []):
        _reject_unknown(spec_, {"label", "intensities", "probabilities"}, raw, "profiles[]")
        _require(spec_, ["label", "intensities", "probabilities"], raw, "profiles[]")
        cases.append(
            CaseDefinition(
                str(spec_["label"]),
                tuple(spec_["intensities"]),
                tuple(spec_["probabilities"]),
            )
        )
    if not cases:
        raise ConfigError("no cases given: provide 'cases' labels or explicit 'profiles'")
    return cases


def cmd_table(args) -> int:
    config, raw = load_config(args.config)
    config = _merge_preset(config, args.preset)
    allowed = {"cases", "profiles", "p_x", "y_max", "e_max", "ell_raw", "m_max", "protocol", "channel"}
    _reject_unknown(config, allowed, raw, "config")
    cases = _case_list(config, raw)
    p_x = float(config.get("p_x", 0.5))
    y_maxes = config.get("y_max", [0.1])
    if not isinstance(y_maxes, list):
        y_maxes = [y_maxes]
    e_max = float(config.get("e_max", 0.01))
    ells = config.get("ell_raw", [1e9])
    if not isinstance(ells, list):
        ells = [ells]
    ells = [_as_number(v, "ell_raw", raw) for v in ells]
    m_max = int(config.get("m_max", 30))
    proto_base = config.get("protocol", {})

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["case", "k", "p_x", "y_max", "e_max", "ell_raw", "n_samples", "seed",
         "mean_rate", "std_error", "zero_fraction", "ill_gamma_fraction"]
    )
    for case in cases:
        for y_max in y_maxes:
            sampler = SamplerConfig(
                y_max=float(y_max), e_max=e_max, seed=args.seed,
                n_samples=args.samples, m_max=m_max,
            )
            for ell in ells:
                proto = dict(proto_base)
                proto["s_x"] = ell if math.isfinite(ell) else "inf"
                params = _build_protocol(proto, raw)
                res = average_key_rate(case, sampler, params, p_x, threads=args.threads)
                writer.writerow(
                    [case.label, case.k, _fmt(p_x), _fmt(y_max), _fmt(e_max), _fmt(ell),
                     res.n_samples, args.seed, _fmt(res.mean_rate), _fmt(res.std_error),
                     _fmt(res.zero_fraction), _fmt(res.ill_gamma_fraction)]
                )
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_optimize(args) -> int:
    config, raw = load_config(args.config)
    config = _merge_preset(config, args.preset)
    allowed = {"k", "channel", "protocol", "restarts", "mu_min", "mu_cap"}
    _reject_unknown(config, allowed, raw, "config")
    _require(config, ["k", "channel"], raw, "config")
    k = config["k"]
    if not isinstance(k, int):
        raise ConfigError(f"k must be an integer{_find_line(raw, 'k')}")
    channel = _build_channel(config["channel"], raw)
    params = _build_protocol(config.get("protocol", {}), raw)
    try:
        result = optimize_profile(
            channel,
            k,
            params,
            mu_min=float(config.get("mu_min", MU_MIN_DEFAULT)),
            mu_cap=float(config.get("mu_cap", MU_CAP_DEFAULT)),
            restarts=int(config.get("restarts", 20)),
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = {
        "command": "optimize",
        "backend": backend.backend_name(),
        "k": k,
        "rate": result.rate,
        "eps_sec": result.rate_result.eps_sec,
        "final_length": result.rate_result.final_length,
        "status": result.rate_result.status,
        "profile": {
            "intensities": list(result.profile.intensities.values),
            "probabilities": list(result.profile.probabilities),
            "p_x": result.profile.p_x,
        },
        "restarts": result.restarts,
        "best_restart": result.best_restart,
        "restart_rates": result.restart_rates,
        "n_evaluations": result.n_evaluations,
        "seed": args.seed,
    }
    _emit(json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n", args.output)
    return EXIT_OK


def _error_rows(writer, label, n, seed, errors):
    for quantity, st in errors.items():
        writer.writerow(
            [label, quantity, n, seed, _fmt(st.mean_rel), _fmt(st.max_rel),
             _fmt(st.rel_bias), _fmt(st.excluded_fraction), _fmt(st.analytic_estimate)]
        )


def cmd_errstudy(args) -> int:
    config, raw = load_config(args.config)
    config = _merge_preset(config, args.preset)
    allowed = {"mode", "intensities", "cases", "y_max", "e_max", "m_max", "channel", "protocol"}
    _reject_unknown(config, allowed, raw, "config")
    _require(config, ["mode"], raw, "config")
    mode = config["mode"]
    y_max = float(config.get("y_max", 1.0))
    e_max = float(config.get("e_max", 0.5))
    m_max = int(config.get("m_max", 30))
    sampler = SamplerConfig(
        y_max=y_max, e_max=e_max, seed=args.seed, n_samples=args.samples, m_max=m_max
    )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["label", "quantity", "n_samples", "seed", "mean_rel", "max_rel",
         "rel_bias", "excluded_fraction", "analytic_estimate"]
    )
    if mode == "baseline":
        triples = config.get("intensities")
        if not triples:
            raise ConfigError("baseline errstudy needs 'intensities': list of [mu1, mu2, mu3]")
        if not isinstance(triples[0], list):
            triples = [triples]
        for triple in triples:
            res = baseline_error_study(triple, sampler)
            _error_rows(writer, res.label, res.n_samples, args.seed, res.errors)
    elif mode == "generalized":
        labels = config.get("cases") or sorted(CASES)
        cases = []
        for label in labels:
            if label not in CASES:
                raise ConfigError(f"unknown case label {label!r}")
            cases.append(CASES[label])
        results = generalized_error_study(cases, sampler)
        for label in labels:
            res = results[label]
            _error_rows(writer, res.label, res.n_samples, args.seed, res.errors)
    else:
        raise ConfigError(f"mode must be 'baseline' or 'generalized', got {mode!r}")
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


# --- output loaders (round-trip helpers) ------------------------------------


def load_report(path: str) -> dict:
    """Parse a JSON report emitted by ``rate`` or ``optimize``."""
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _coerce(value: str):
    if value == "inf":
        return math.inf
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def load_csv_rows(path: str) -> list:
    """Parse a CSV emitted by ``table`` or ``errstudy`` into dicts."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [
            {key: _coerce(val) for key, val in row.items()}
            for row in csv.DictReader(fh)
        ]


# --- entry point -------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decoyrate",
        description="Decoy-state BB84 finite-key rate toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, needs_samples in (
        ("rate", cmd_rate, False),
        ("table", cmd_table, True),
        ("optimize", cmd_optimize, False),
        ("errstudy", cmd_errstudy, True),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
        p.add_argument("--output", default=None, help="output path (default: stdout)")
        p.add_argument("--preset", default=None, choices=sorted(PRESETS),
                       help="named default parameter set, overridden by the config")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sample loops")
        if needs_samples:
            p.add_argument("--samples", type=int, default=1000, help="Monte Carlo sample count")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
