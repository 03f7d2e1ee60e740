"""Command-line entry point.

    centralarp run join --mode secure --seed 7
    centralarp run attack-type1 --seed 1..100
    centralarp decode 020000...
    centralarp encode frame.json
"""

from __future__ import annotations

import argparse
import enum
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import wire
from .crypto import AuthMaterial, SharedKey, sign, tag_message
from .protocol import Mode
from .scenarios import (
    Scenario,
    ValidationError,
    builtin_names,
    builtin_scenarios,
    check_expectations,
    compare,
    get_builtin,
    has_baseline,
    load_scenario,
    merge,
    run_scenario,
)
from .simnet import TimeLimitExceeded

SEED_ENV = "CENTRALARP_SEED"


class ExitCode(enum.IntEnum):
    OK = 0
    ASSERTION = 1
    USAGE = 2
    DECODE = 3


class DescriptionError(ValueError):
    pass


# -- frame descriptions -----------------------------------------------------

_MAC_FIELDS = {"dest", "src", "host_mac", "client_mac", "central_mac"}
_IP_FIELDS = {"ip", "your_ip"}


def _need(d: dict[str, Any], key: str) -> Any:
    if key not in d:
        raise DescriptionError(f"missing field {key!r}")
    return d[key]


def _mac(d: dict[str, Any], key: str) -> wire.MacAddr:
    try:
        return wire.MacAddr.parse(str(_need(d, key)))
    except ValueError as exc:
        raise DescriptionError(f"{key}: {exc}") from None


def _ip(d: dict[str, Any], key: str) -> wire.IPv4Address:
    try:
        return wire.IPv4Address(str(_need(d, key)))
    except ValueError as exc:
        raise DescriptionError(f"{key}: {exc}") from None


def _arp(d: dict[str, Any], op: wire.ArpOp | None = None) -> wire.StdArp:
    if op is None:
        try:
            op = wire.ArpOp[str(_need(d, "op")).upper()]
        except KeyError:
            raise DescriptionError(f"op must be 'request' or 'reply', got {d['op']!r}") from None
    return wire.StdArp(op, _mac(d, "sender_mac"), _ip(d, "sender_ip"), _mac(d, "target_mac"), _ip(d, "target_ip"))


def _body(d: dict[str, Any]) -> wire.Body:
    kind = _need(d, "type")
    if kind == "IpSend":
        return wire.IpSend(_ip(d, "ip"), _mac(d, "mac"))
    if kind == "IpReply":
        return wire.IpReply(_ip(d, "ip"), _mac(d, "mac"), bool(d.get("ack", True)))
    if kind in ("ArpCheck", "ArpNoChange", "ArpAck"):
        return getattr(wire, kind)(_ip(d, "ip"))
    if kind == "StdArp":
        return _arp(d)
    if kind == "SignedArpReply":
        return wire.SignedArpReply(_arp(d, wire.ArpOp.REPLY))
    if kind == "Dhcp":
        try:
            op = wire.DhcpOp[str(_need(d, "op")).upper()]
        except KeyError:
            raise DescriptionError(f"unknown DHCP op {d['op']!r}") from None
        your_ip = _ip(d, "your_ip") if "your_ip" in d else wire.ZERO_IP
        central = _mac(d, "central_mac") if "central_mac" in d else wire.ZERO_MAC
        return wire.DhcpMessage(op, int(d.get("xid", 0)), _mac(d, "client_mac"), your_ip, central)
    raise DescriptionError(f"unknown frame type {kind!r}")


def _hex_field(d: dict[str, Any], key: str) -> bytes:
    try:
        return wire.parse_hex(str(_need(d, key)))
    except wire.HexError as exc:
        raise DescriptionError(f"{key}: {exc}") from None


def frame_from_description(d: dict[str, Any]) -> wire.Frame:
    """Build a frame from the JSON description accepted by ``encode``.

    ``auth`` may be ``"none"`` (zero-filled placeholder where the type needs
    auth), ``{"tag": hex}``, ``{"shared_key": hex}``, ``{"signature": hex,
    "cert": hex}`` or ``{"seed": text}`` to sign/tag with demo material.
    """
    if not isinstance(d, dict):
        raise DescriptionError("frame description must be a JSON object")
    dest, src, body = _mac(d, "dest"), _mac(d, "src"), _body(d)
    want = wire.required_auth_kind(body)
    auth = d.get("auth", "none")
    if auth == "none":
        section = {
            wire.AuthKind.NONE: wire.NO_AUTH,
            wire.AuthKind.KEYED_TAG: wire.AuthSection.keyed(bytes(wire.TAG_LEN)),
            wire.AuthKind.SIGNATURE: wire.AuthSection.signed(bytes(wire.SIGNATURE_LEN), b""),
        }[want]
    elif not isinstance(auth, dict):
        raise DescriptionError("auth must be 'none' or an object")
    elif want == wire.AuthKind.NONE:
        raise DescriptionError(f"{d['type']} carries no auth section")
    elif "seed" in auth or "shared_key" in auth:
        covered = wire.signed_bytes(dest, src, body)
        if want == wire.AuthKind.KEYED_TAG:
            key = (
                SharedKey(_hex_field(auth, "shared_key"))
                if "shared_key" in auth
                else AuthMaterial.derive(auth["seed"]).shared_key
            )
            section = wire.AuthSection.keyed(tag_message(key, covered))
        else:
            if "seed" not in auth:
                raise DescriptionError("signed frames need 'seed' (or explicit signature/cert)")
            material = AuthMaterial.derive(auth["seed"])
            section = wire.AuthSection.signed(
                sign(material.central_keys, covered), material.central_cert.to_bytes()
            )
    elif want == wire.AuthKind.KEYED_TAG:
        section = wire.AuthSection.keyed(_hex_field(auth, "tag"))
    else:
        section = wire.AuthSection.signed(_hex_field(auth, "signature"), _hex_field(auth, "cert"))
    try:
        return wire.Frame(dest, src, body, section)
    except ValueError as exc:
        raise DescriptionError(str(exc)) from None


def sample_descriptions() -> dict[str, dict[str, Any]]:
    central, dhcp, host = "02:00:00:00:00:02", "02:00:00:00:00:01", "02:00:00:00:01:00"
    arp = {"sender_mac": host, "sender_ip": "10.0.0.10", "target_mac": central, "target_ip": "0.0.0.0"}
    seed = {"seed": "sample"}
    return {
        "IpSend": {"type": "IpSend", "dest": central, "src": dhcp, "ip": "10.0.0.10", "mac": host, "auth": seed},
        "IpReply": {"type": "IpReply", "dest": dhcp, "src": central, "ip": "10.0.0.10", "mac": host,
                    "ack": True, "auth": seed},
        "ArpCheck": {"type": "ArpCheck", "dest": host, "src": central, "ip": "10.0.0.10", "auth": seed},
        "ArpNoChange": {"type": "ArpNoChange", "dest": host, "src": central, "ip": "10.0.0.10", "auth": seed},
        "ArpAck": {"type": "ArpAck", "dest": host, "src": central, "ip": "10.0.0.10", "auth": seed},
        "StdArp": {"type": "StdArp", "dest": central, "src": host, "op": "reply", **arp},
        "SignedArpReply": {"type": "SignedArpReply", "dest": host, "src": central, **arp, "auth": seed},
        "Dhcp": {"type": "Dhcp", "dest": host, "src": dhcp, "op": "ack", "xid": 1, "client_mac": host,
                 "your_ip": "10.0.0.10", "central_mac": central},
    }


# -- field dump -------------------------------------------------------------


def _format_field(name: str, raw: bytes) -> str:
    leaf = name.rsplit(".", 1)[-1]
    if leaf in _MAC_FIELDS or leaf.endswith("_mac"):
        return str(wire.MacAddr(raw))
    if leaf in _IP_FIELDS or leaf.endswith("_ip"):
        return str(wire.IPv4Address(raw))
    if leaf == "marker":
        return f'"{raw.decode("ascii", "replace")}"'
    if leaf == "msg_type":
        return f"0x{raw[0]:02x} {wire.MsgType(raw[0]).name}"
    if leaf == "auth_kind":
        return f"0x{raw[0]:02x} {wire.AuthKind(raw[0]).name}"
    if leaf == "ack":
        return f"{raw[0]} ({'acknowledged' if raw[0] else 'not acknowledged'})"
    if leaf in ("cert_len", "htype", "hlen", "plen", "xid"):
        return str(int.from_bytes(raw, "big"))
    if leaf == "oper":
        return wire.ArpOp(int.from_bytes(raw, "big")).name
    if leaf == "dhcp_op":
        return wire.DhcpOp(raw[0]).name
    text = raw.hex()
    return text if len(text) <= 48 else f"{text[:48]}... ({len(raw)} bytes)"


def dump_frame(frame: wire.Frame) -> str:
    lines = [f"frame: {frame.kind}  ({len(wire.encode_frame(frame))} bytes)"]
    lines.append(f"  {'field':<16} {'offset':>6} {'width':>5}  value")
    for f in wire.field_layout(frame):
        value = f"0x{f.raw.hex()} OK" if f.name == "fcs" else _format_field(f.name, f.raw)
        if f.name == "ethertype":
            value = f"0x{f.raw.hex()}"
        lines.append(f"  {f.name:<16} {f.offset:>6} {f.width:>5}  {value}")
    auth = frame.auth
    if wire.required_auth_kind(frame.body) == wire.AuthKind.NONE:
        lines.append("auth: none (no auth section)")
    elif auth.kind == wire.AuthKind.KEYED_TAG:
        lines.append("auth: KEYED_TAG (32-byte tag)")
    else:
        lines.append(f"auth: SIGNATURE (64-byte signature, {len(auth.cert)}-byte certificate)")
    lines.append("FCS: OK")
    return "\n".join(lines)


# -- commands ---------------------------------------------------------------


def _parse_seeds(text: str | None) -> list[int] | None:
    if text is None:
        text = os.environ.get(SEED_ENV)
        if not text:
            return None
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError
            return list(range(lo_i, hi_i + 1))
        return [int(text)]
    except ValueError:
        raise ValidationError(f"bad seed {text!r}; use N or A..B") from None


def _resolve_scenarios(name: str, mode: str | None) -> list[Scenario]:
    path = Path(name)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise ValidationError(f"no such scenario file: {name}")
        scenario = load_scenario(path)
        return [scenario.with_overrides(mode=Mode(mode)).validate() if mode else scenario]
    if name not in builtin_names() and name != "mac-change":
        raise ValidationError(f"unknown scenario {name!r}; builtins: {', '.join(builtin_names())}")
    if mode:
        return [get_builtin(name, mode)]
    out = [get_builtin(name)]
    if has_baseline(name) and out[0].mode == Mode.SECURE:
        out.append(get_builtin(name, Mode.BASELINE))
    return out


def _summary(scenario: Scenario, report, failures: list[str]) -> str:
    lines = [f"scenario {report.scenario} ({report.mode}, seed {report.seed}): {scenario.description}"]
    if report.measured:
        lines.append(f"  measured {report.measured['episode']}: {report.measured['count']} messages")
    for episode, info in report.episodes.items():
        kinds = ", ".join(f"{k}={v}" for k, v in info["by_kind"].items())
        lines.append(f"  {episode:<22} {info['total']:>4}  {kinds}")
    if report.table:
        lines.append("  central table: " + ", ".join(f"{ip}->{mac}" for ip, mac in report.table.items()))
    lines.append(f"  verdict: {report.verdict}")
    mc = report.monte_carlo
    if mc:
        exp = f", expected {mc['expected']:.5f}" if mc["expected"] is not None else ""
        lines.append(
            f"  monte carlo: {mc['successes']}/{mc['trials']} blocked, "
            f"estimate {mc['estimate']:.5f} +/- {mc['stderr']:.5f}{exp}"
        )
    lines.append("  expectations: " + ("OK" if not failures else "FAILED"))
    lines.extend(f"    - {f}" for f in failures)
    return "\n".join(lines)


def cmd_run(args: argparse.Namespace) -> int:
    scenarios = _resolve_scenarios(args.scenario, args.mode)
    seeds = _parse_seeds(args.seed)
    if args.repeat is not None and args.repeat < 1:
        raise ValidationError("--repeat must be at least 1")
    reports, failed, comparisons = [], False, []
    for seed in seeds or [None]:
        by_mode = {}
        for base in scenarios:
            scenario = base.with_overrides(seed=seed, repeat=args.repeat).validate()
            report = run_scenario(scenario)
            failures = check_expectations(scenario, report)
            failed |= bool(failures)
            print(_summary(scenario, report, failures))
            reports.append(report)
            by_mode[scenario.mode] = report
        if len(by_mode) == 2 and all(r.measured for r in by_mode.values()):
            comparisons.append(compare(by_mode[Mode.SECURE], by_mode[Mode.BASELINE]))
    if comparisons:
        print()
        print(merge(comparisons[0]).to_table())
    if args.out:
        payload = [r.to_dict() for r in reports]
        Path(args.out).write_text(json.dumps(payload[0] if len(payload) == 1 else payload, indent=2, sort_keys=True))
    if args.trace:
        Path(args.trace).write_text("".join(r.trace_lines() for r in reports))
    return ExitCode.ASSERTION if failed else ExitCode.OK


def cmd_compare(args: argparse.Namespace) -> int:
    rows, failed = [], False
    for name in ("join", "resolve", "mac-change-clean"):
        secure, baseline = get_builtin(name, Mode.SECURE), get_builtin(name, Mode.BASELINE)
        rs, rb = run_scenario(secure), run_scenario(baseline)
        failed |= bool(check_expectations(secure, rs) or check_expectations(baseline, rb))
        rows.append(compare(rs, rb))
    table = merge(*rows)
    print(json.dumps(table.to_dict(), indent=2) if args.json else table.to_table())
    return ExitCode.ASSERTION if failed else ExitCode.OK


def cmd_list(args: argparse.Namespace) -> int:
    for s in builtin_scenarios():
        print(f"{s.name:<24} {s.mode.value:<9} {s.description}")
    return ExitCode.OK


def _read_input(arg: str | None, file: str | None) -> str:
    if arg is not None:
        return arg
    if file is not None:
        return Path(file).read_text()
    return sys.stdin.read()


def cmd_decode(args: argparse.Namespace) -> int:
    try:
        data = wire.parse_hex(_read_input(args.hex, args.file))
        frame = wire.decode_frame(data)
    except (wire.HexError, wire.DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitCode.DECODE
    print(dump_frame(frame))
    return ExitCode.OK


def cmd_encode(args: argparse.Namespace) -> int:
    if args.sample:
        samples = sample_descriptions()
        if args.sample not in samples:
            raise ValidationError(f"no sample {args.sample!r}; choose from {', '.join(samples)}")
        desc = samples[args.sample]
    else:
        if args.description is None:
            raise ValidationError("give a description file, '-' for stdin, or --sample")
        text = sys.stdin.read() if args.description == "-" else Path(args.description).read_text()
        try:
            desc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"description is not valid JSON: {exc}") from None
    print(wire.frame_hex(frame_from_description(desc)))
    return ExitCode.OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="centralarp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a builtin scenario or a scenario JSON file")
    run.add_argument("scenario")
    run.add_argument("--seed", help=f"seed or inclusive range A..B (default: ${SEED_ENV} or the scenario's)")
    run.add_argument("--mode", choices=[m.value for m in Mode])
    run.add_argument("--repeat", type=int, help="Monte Carlo trial count")
    run.add_argument("--out", help="write the JSON report here")
    run.add_argument("--trace", help="write trace records (one per line) here")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="secure vs baseline message counts")
    cmp_.add_argument("--json", action="store_true")
    cmp_.set_defaults(func=cmd_compare)

    lst = sub.add_parser("list", help="list builtin scenarios")
    lst.set_defaults(func=cmd_list)

    dec = sub.add_parser("decode", help="decode a hex frame (argument, --file or stdin)")
    dec.add_argument("hex", nargs="?")
    dec.add_argument("--file")
    dec.set_defaults(func=cmd_decode)

    enc = sub.add_parser("encode", help="encode a JSON frame description to hex")
    enc.add_argument("description", nargs="?", help="JSON file, or '-' for stdin")
    enc.add_argument("--sample", help="encode a builtin sample frame by type name")
    enc.set_defaults(func=cmd_encode)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ExitCode.USAGE if exc.code else ExitCode.OK
    try:
        return int(args.func(args))
    except (ValidationError, DescriptionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitCode.USAGE
    except TimeLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitCode.ASSERTION


if __name__ == "__main__":
    raise SystemExit(main())
