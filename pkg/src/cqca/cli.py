"""Command-line entry point.

Four subcommands: ``simulate`` runs a statistics-only Monte Carlo and
prints the figures of merit beside their closed-form expectations,
``protocol`` runs a full session and writes the transcript plus the sifted
keys, ``analyze`` tabulates the security curve to CSV, and ``threshold``
prints the probe-strength and error-rate thresholds.

Options may come from flags or from a flat ``key = value`` config file
(flags win).  Every run echoes its effective configuration to stderr in the
same format, so a run is reproducible from its own output.  Exit codes:
0 success, 1 usage or configuration error, 2 protocol abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, metrics, parties
from .channel import AttackConfig, AttackKind, AttackTarget, ChannelConfig, FakeStrategy


class CliError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    n: int = 100_000
    f: float = 0.25
    seed: int = 1
    attack: str = "none"
    theta: float = 0.3
    p: float = 0.25
    strategy: str = "random-quarter"
    target: str = "random"
    knows_schedule: bool = True
    loss: float = 0.0
    dark_rate: float = 0.0
    timing_jitter: bool = False
    floor: float = 0.02
    z: float = 4.0
    grid_points: int = 200
    output: str | None = None
    format: str = "text"

    def attack_config(self) -> AttackConfig:
        return AttackConfig(
            kind=AttackKind(self.attack),
            theta=self.theta,
            p=self.p,
            target=AttackTarget(self.target),
            strategy=FakeStrategy(self.strategy),
            knows_schedule=self.knows_schedule,
        )

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(
            loss_rate=self.loss, dark_rate=self.dark_rate, timing_jitter=self.timing_jitter
        )

    def tolerance_policy(self) -> metrics.TolerancePolicy:
        return metrics.TolerancePolicy(
            floor=self.floor,
            z=self.z,
            expected_coincidence=self.dark_rate,
            expected_multi=metrics.expected_multi_rate(self.dark_rate, self.loss),
            expected_loss=self.loss,
        )


_FIELD_PARSERS = {
    "command": str,  # accepted for round-tripping echoes; the subcommand wins
    "n": int,
    "f": float,
    "seed": int,
    "attack": str,
    "theta": float,
    "p": float,
    "strategy": str,
    "target": str,
    "knows_schedule": None,  # bool, parsed below
    "loss": float,
    "dark_rate": float,
    "timing_jitter": None,
    "floor": float,
    "z": float,
    "grid_points": int,
    "output": str,
    "format": str,
}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise CliError(f"not a boolean: {text!r}")


def parse_config_file(text: str) -> dict:
    """Flat ``key = value`` format, ``#`` comments, unknown keys rejected."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_PARSERS:
            raise CliError(f"line {lineno}: unknown config key {key!r}")
        parser = _FIELD_PARSERS[key]
        if parser is None:
            values[key] = _parse_bool(value)
        elif key == "output" and value in ("", "none"):
            values[key] = None
        else:
            try:
                values[key] = parser(value)
            except ValueError as exc:
                raise CliError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return values


def format_effective_config(cfg: RunConfig) -> str:
    lines = [f"command = {cfg.command}"]
    for fld in dataclasses.fields(cfg):
        if fld.name == "command":
            continue
        value = getattr(cfg, fld.name)
        if value is None:
            value = "none"
        lines.append(f"{fld.name} = {value}")
    return "\n".join(lines)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise CliError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="cqca", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    defaults = RunConfig(command="simulate")

    def add_common(p: argparse.ArgumentParser, with_run_knobs: bool = True) -> None:
        p.add_argument("--config", type=str, default=None, help="flat key = value config file")
        p.add_argument("--output", type=str, default=None)
        p.add_argument("--format", choices=["csv", "json-lines", "text"], default=None)
        if with_run_knobs:
            p.add_argument("--n", type=int, default=None)
            p.add_argument("--seed", type=int, default=None)
            p.add_argument(
                "--attack",
                choices=[k.value for k in AttackKind],
                default=None,
            )
            p.add_argument("--theta", type=float, default=None)
            p.add_argument("--p", type=float, default=None)
            p.add_argument(
                "--strategy", choices=[s.value for s in FakeStrategy], default=None
            )
            p.add_argument("--target", choices=[t.value for t in AttackTarget], default=None)
            p.add_argument(
                "--knows-schedule",
                dest="knows_schedule",
                action=argparse.BooleanOptionalAction,
                default=None,
            )
            p.add_argument("--loss", type=float, default=None)
            p.add_argument("--dark-rate", dest="dark_rate", type=float, default=None)
            p.add_argument(
                "--timing-jitter",
                dest="timing_jitter",
                action=argparse.BooleanOptionalAction,
                default=None,
            )
            p.add_argument("--floor", type=float, default=None)
            p.add_argument("--z", type=float, default=None)

    sim = sub.add_parser("simulate", help="statistics run with merit report")
    add_common(sim)
    proto = sub.add_parser("protocol", help="full session with transcript and keys")
    add_common(proto)
    proto.add_argument("--f", type=float, default=None, help=f"test fraction (default {defaults.f})")
    ana = sub.add_parser("analyze", help="security curve CSV over a theta grid")
    add_common(ana, with_run_knobs=False)
    ana.add_argument("--grid-points", dest="grid_points", type=int, default=None)
    thr = sub.add_parser("threshold", help="probe-strength and error-rate thresholds")
    add_common(thr, with_run_knobs=False)
    return parser


def _build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        values.update(parse_config_file(path.read_text()))
    for key in _FIELD_PARSERS:
        if key == "command":
            continue
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    values.pop("command", None)
    cfg = RunConfig(command=args.command, **values)
    if cfg.n < 1:
        raise CliError("n must be positive")
    if not 0.0 < cfg.f < 1.0:
        raise CliError("f must lie in (0, 1)")
    if cfg.grid_points < 1:
        raise CliError("grid_points must be positive")
    try:
        cfg.attack_config().validate()
        cfg.channel_config().validate()
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    return cfg


def _emit(text: str, output: str | None) -> None:
    if output is None:
        print(text)
    else:
        Path(output).write_text(text if text.endswith("\n") else text + "\n")


def _report_payload(cfg: RunConfig, report, verdict, expected) -> str:
    if cfg.format == "csv":
        return metrics.CSV_HEADER + "\n" + metrics.report_csv_row(report, verdict)
    if cfg.format == "json-lines":
        payload = {
            "n": report.n,
            "kappa": report.coincidence_rate,
            "visibility": report.visibility,
            "bias": report.bias,
            "errorRate": report.error_rate,
            "r": report.multi_rate,
            "lambda": report.loss_rate,
            "expected": expected,
            "counts": report.counts,
            "verdict": str(verdict),
        }
        return json.dumps(payload)
    return metrics.report_text_block(report, verdict, expected)


def cmd_simulate(cfg: RunConfig) -> int:
    attack = cfg.attack_config()
    channel_cfg = cfg.channel_config()
    result = parties.run_rounds(cfg.n, attack, channel_cfg, cfg.seed)
    report = metrics.compute_merit_report(result.rounds, result.rounds, cfg.n)
    verdict = metrics.abort_decision(report, cfg.tolerance_policy())
    expected = analysis.theoretical_merits(attack, channel_cfg)
    _emit(_report_payload(cfg, report, verdict, expected), cfg.output)
    if not verdict.key_produced:
        print(f"ABORT reasons={','.join(verdict.abort_reasons)}")
        return 2
    return 0


def cmd_protocol(cfg: RunConfig) -> int:
    transcript = parties.run_protocol(
        cfg.n,
        cfg.f,
        attack=cfg.attack_config(),
        seed=cfg.seed,
        channel_cfg=cfg.channel_config(),
        policy=cfg.tolerance_policy(),
    )
    out_path = Path(cfg.output) if cfg.output else Path("cqca-transcript.txt")
    out_path.write_text("\n".join(parties.transcript_lines(transcript)) + "\n")
    print(f"transcript = {out_path}")
    print(f"rounds = {len(transcript.rounds)}")
    print(f"verdict = {transcript.verdict}")
    if not transcript.verdict.key_produced:
        print(f"ABORT reasons={','.join(transcript.verdict.abort_reasons)}")
        return 2
    keys_path = out_path.with_suffix(out_path.suffix + ".keys")
    key_lines = [
        f"key_bits = {len(transcript.key_bob)}",
        f"key_bob_hex = {parties.key_to_hex(transcript.key_bob)}",
        f"key_charlie_hex = {parties.key_to_hex(transcript.key_charlie)}",
        "key_round_ids = " + ",".join(str(i) for i in transcript.key_round_ids),
    ]
    keys_path.write_text("\n".join(key_lines) + "\n")
    print(f"key_bits = {len(transcript.key_bob)}")
    print(f"key_bob_hex = {parties.key_to_hex(transcript.key_bob)}")
    print(f"key_charlie_hex = {parties.key_to_hex(transcript.key_charlie)}")
    print(f"keys_file = {keys_path}")
    return 0


def cmd_analyze(cfg: RunConfig) -> int:
    grid = np.linspace(0.0, math.pi / 2, cfg.grid_points)
    points = analysis.sweep_security_curve(grid.tolist())
    _emit(analysis.curve_to_csv(points), cfg.output)
    return 0


def cmd_threshold(cfg: RunConfig) -> int:
    theta_star, e_star = analysis.security_threshold()
    text = f"theta_star = {theta_star:.10g}\ne_star = {e_star:.10g}"
    _emit(text, cfg.output)
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "protocol": cmd_protocol,
    "analyze": cmd_analyze,
    "threshold": cmd_threshold,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _build_config(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print("# effective-config", file=sys.stderr)
    print(format_effective_config(cfg), file=sys.stderr)
    return _COMMANDS[cfg.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
