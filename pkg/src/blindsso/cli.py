"""Command-line front end.

Subcommands: ``scenario`` (bulk logins plus account-consistency checks),
``security`` (the adversarial case suite and the shared-blinded-identity
collusion construction), ``privacy`` (issuer unlinkability and RP linkage
structure over a scenario run), ``bench`` (three-phase timing), and
``serve-demo`` (long-running issuer and RP for the browser demo).
Exits nonzero when any suite reports a violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .bench import BenchConfig, bench
from .harness import (
    Report,
    ScenarioConfig,
    check_account_consistency,
    check_idp_unlinkability,
    check_rp_linkage_structure,
    run_collusion_case,
    run_scenario,
    run_security_suite,
)


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--group", choices=("p256", "toy"), default="toy")
    sub.add_argument("--users", type=int, default=2)
    sub.add_argument("--rps", type=int, default=2)
    sub.add_argument("--logins", type=int, default=3, help="logins per (user, rp) pair")
    sub.add_argument("--seed", type=int, default=1)
    sub.add_argument("--validity-secs", type=int, default=180)
    sub.add_argument("--out", choices=("table", "json"), default="table")


def _scenario_cfg(args) -> ScenarioConfig:
    return ScenarioConfig(
        group_id=args.group,
        num_users=args.users,
        num_rps=args.rps,
        logins_per_pair=args.logins,
        seed=args.seed,
        validity_secs=args.validity_secs,
    )


def _emit(reports: dict[str, Report], out: str) -> int:
    ok = all(r.passed for r in reports.values())
    if out == "json":
        print(json.dumps({name: r.to_json() for name, r in reports.items()}, indent=1))
    else:
        for name, report in reports.items():
            print(f"== {name}")
            for line in report.lines():
                print(f"  {line}")
    return 0 if ok else 1


def cmd_scenario(args) -> int:
    ts = run_scenario(_scenario_cfg(args))
    if args.transcripts:
        with open(args.transcripts, "w") as fh:
            for t in ts.transcripts:
                fh.write(t.to_json_line() + "\n")
    print(f"ran {len(ts.transcripts)} logins "
          f"({args.users} users x {args.rps} rps x {args.logins})")
    return _emit({"account-consistency": check_account_consistency(ts)}, args.out)


def cmd_security(args) -> int:
    reports = {
        "security-suite": run_security_suite(args.group, seed=args.seed),
        "collusion-construction": run_collusion_case(seed=args.seed),
    }
    return _emit(reports, args.out)


def cmd_privacy(args) -> int:
    ts = run_scenario(_scenario_cfg(args))
    print(f"ran {len(ts.transcripts)} logins for the privacy suite")
    reports = {
        "issuer-unlinkability": check_idp_unlinkability(ts),
        "rp-linkage-structure": check_rp_linkage_structure(ts),
    }
    return _emit(reports, args.out)


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        group_id=args.group,
        flows=args.logins,
        plain_baseline=args.baseline_plain,
        seed=args.seed if args.group == "toy" else None,
        validity_secs=args.validity_secs,
    )
    report = bench(cfg)
    if args.out == "json":
        print(json.dumps(report.to_json(), indent=1))
    else:
        print(report.to_table())
    return 0


def cmd_serve_idp(args) -> int:
    from .idp import IdpConfig, IdpHttp
    from .stack import build_idp_from_config

    config = IdpConfig.from_file(args.config)
    idp = build_idp_from_config(config)
    if args.register_user:
        username, _, password = args.register_user.partition(":")
        idp.register_user(username, password)
        if config.registry_path:
            idp.save_registry(config.registry_path)
        print(f"registered user {username!r}")
        return 0
    if args.register_rp:
        cert = idp.register_rp(args.register_rp)
        if config.registry_path:
            idp.save_registry(config.registry_path)
        from .tokens import cert_to_wire

        out = args.cert_out or "rp_cert.json"
        Path(out).write_text(json.dumps(cert_to_wire(cert), indent=1))
        print(f"registered rp for {args.register_rp!r}; certificate written to {out}")
        return 0
    http = IdpHttp(idp).start()
    print(f"issuer listening on {http.url}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        http.stop()
    return 0


def cmd_serve_rp(args) -> int:
    from .rp import RpConfig, RpHttp
    from .stack import build_rp_from_config

    rp = build_rp_from_config(RpConfig.from_file(args.config))
    http = RpHttp(rp).start()
    print(f"rp listening on {http.url} (endpoint {rp.endpoint})")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        http.stop()
    return 0


def cmd_serve_demo(args) -> int:
    from .stack import boot_stack

    static_root = Path(args.static_dir) if args.static_dir else None
    stack = boot_stack(
        args.group,
        num_rps=args.rps,
        validity_secs=args.validity_secs,
        users={args.demo_user: args.demo_password},
        idp_static_dir=str(static_root / "idp") if static_root else None,
        rp_static_dir=str(static_root / "rp") if static_root else None,
        host=args.host,
        idp_port=args.idp_port,
        rp_ports=[args.rp_port + i for i in range(args.rps)] if args.rp_port else None,
    )
    print(f"issuer:  {stack.idp_url}")
    for i, url in enumerate(stack.rp_urls):
        print(f"rp {i}:    {url}  (visit {url}/demo/ to log in)")
    print(f"demo user: {args.demo_user!r} password: {args.demo_password!r}")
    print("Ctrl-C stops the services")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        stack.stop()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="blindsso",
                                     description="privacy-preserving SSO testbed")
    subs = parser.add_subparsers(dest="command", required=True)

    sc = subs.add_parser("scenario", help="run bulk logins and consistency checks")
    _common_flags(sc)
    sc.add_argument("--transcripts", help="write transcripts as JSON lines to this file")
    sc.set_defaults(fn=cmd_scenario)

    se = subs.add_parser("security", help="run the adversarial rejection suite")
    _common_flags(se)
    se.set_defaults(fn=cmd_security)

    pr = subs.add_parser("privacy", help="run the privacy property suite")
    _common_flags(pr)
    pr.set_defaults(fn=cmd_privacy)

    be = subs.add_parser("bench", help="measure the three login phases")
    _common_flags(be)
    be.add_argument("--baseline-plain", action="store_true",
                    help="also measure a no-blinding baseline flow")
    be.set_defaults(fn=cmd_bench)

    si = subs.add_parser("serve-idp", help="run a standalone issuer from a config file")
    si.add_argument("--config", required=True, help="JSON config: issuer, group_id, "
                    "key_path, registry_path, validity_secs, host, port, static_dir")
    si.add_argument("--register-user", metavar="USER:PASSWORD",
                    help="register a user against the configured registries and exit")
    si.add_argument("--register-rp", metavar="ENDPOINT",
                    help="register an rp endpoint, write its certificate, and exit")
    si.add_argument("--cert-out", help="certificate output path for --register-rp")
    si.set_defaults(fn=cmd_serve_idp)

    sr = subs.add_parser("serve-rp", help="run a standalone relying party from a config file")
    sr.add_argument("--config", required=True, help="JSON config: group_id, cert_path, "
                    "idp_pk_path, idp_script_url, accounts_path, host, port, static_dir")
    sr.set_defaults(fn=cmd_serve_rp)

    sd = subs.add_parser("serve-demo", help="serve issuer and rp for the browser demo")
    _common_flags(sd)
    sd.add_argument("--static-dir", help="directory with built browser assets (frontend/dist)")
    sd.add_argument("--host", default="127.0.0.1")
    sd.add_argument("--idp-port", type=int, default=8600)
    sd.add_argument("--rp-port", type=int, default=8700)
    sd.add_argument("--demo-user", default="alice")
    sd.add_argument("--demo-password", default="correct horse")
    sd.set_defaults(fn=cmd_serve_demo)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
