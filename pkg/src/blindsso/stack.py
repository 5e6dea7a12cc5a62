"""Boot helpers: an issuer plus N relying parties on loopback, and
standalone single-service boot from config files.

The in-process stack is used by the integration tests, the scenario
harness, the bench and the demo server.  Ports are OS-assigned; the RP
port is reserved up front because the certificate must bind the final
token endpoint URL.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .group import GroupParams, Rng, SYSTEM_RNG, get_group
from .idp import IdpConfig, IdpHttp, IdpService
from .rp import RpConfig, RpHttp, RpService
from .signing import SigningKeyPair, public_key_from_pem
from .tokens import Clock, cert_from_wire, system_clock


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@dataclass
class Stack:
    params: GroupParams
    idp: IdpService
    idp_http: IdpHttp
    rps: list[RpService] = field(default_factory=list)
    rp_https: list[RpHttp] = field(default_factory=list)

    @property
    def idp_url(self) -> str:
        return self.idp_http.url

    @property
    def rp_urls(self) -> list[str]:
        return [h.url for h in self.rp_https]

    def stop(self) -> None:
        for h in self.rp_https:
            h.stop()
        self.idp_http.stop()

    def __enter__(self) -> "Stack":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def load_or_create_keypair(key_path: Optional[str]) -> SigningKeyPair:
    if key_path and Path(key_path).is_file():
        return SigningKeyPair.from_pem(Path(key_path).read_bytes())
    kp = SigningKeyPair.generate()
    if key_path:
        path = Path(key_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(kp.private_pem())
        path.with_suffix(".pub.pem").write_bytes(kp.public_pem())
    return kp


def build_idp_from_config(config: IdpConfig, clock: Clock = system_clock,
                          rng: Rng = SYSTEM_RNG) -> IdpService:
    """Standalone issuer: key and registries come from the config paths."""
    keypair = load_or_create_keypair(config.key_path)
    idp = IdpService(get_group(config.group_id), keypair, config, clock=clock, rng=rng)
    if config.registry_path and Path(config.registry_path).is_file():
        idp.load_registry(config.registry_path)
    return idp


def build_rp_from_config(config: RpConfig, clock: Clock = system_clock,
                         rng: Rng = SYSTEM_RNG) -> RpService:
    """Standalone relying party: trust anchors come from the config paths."""
    if not (config.cert_path and config.idp_pk_path and config.idp_script_url):
        raise ValueError("rp config needs cert_path, idp_pk_path and idp_script_url")
    params = get_group(config.group_id)
    cert = cert_from_wire(json.loads(Path(config.cert_path).read_text()), params)
    idp_pk = public_key_from_pem(Path(config.idp_pk_path).read_bytes())
    return RpService(cert.id_rp, cert.endpoint, cert, idp_pk,
                     config.idp_script_url, params, config, clock=clock, rng=rng)


def boot_stack(
    group_id: str = "toy",
    num_rps: int = 1,
    validity_secs: int = 180,
    clock: Clock = system_clock,
    rng: Rng = SYSTEM_RNG,
    users: Optional[dict[str, str]] = None,
    allow_plain: bool = False,
    keypair: Optional[SigningKeyPair] = None,
    idp_static_dir: Optional[str] = None,
    rp_static_dir: Optional[str] = None,
    host: str = "127.0.0.1",
    idp_port: int = 0,
    rp_ports: Optional[list[int]] = None,
) -> Stack:
    params = get_group(group_id)
    keypair = keypair or SigningKeyPair.generate()
    idp = IdpService(
        params,
        keypair,
        IdpConfig(validity_secs=validity_secs, allow_plain=allow_plain,
                  static_dir=idp_static_dir, host=host, port=idp_port),
        clock=clock,
        rng=rng,
    )
    idp_http = IdpHttp(idp).start()
    stack = Stack(params, idp, idp_http)

    for username, password in (users or {}).items():
        idp.register_user(username, password)

    for i in range(num_rps):
        port = rp_ports[i] if rp_ports else free_port()
        endpoint = f"http://{host}:{port}/uploadToken"
        cert = idp.register_rp(endpoint, {"cn": f"rp-{i}"})
        rp = RpService(
            cert.id_rp,
            endpoint,
            cert,
            keypair.public_key,
            f"{idp_http.url}/demo/",
            params,
            RpConfig(host=host, port=port, static_dir=rp_static_dir),
            clock=clock,
            rng=rng,
        )
        stack.rps.append(rp)
        stack.rp_https.append(RpHttp(rp).start())
    return stack
