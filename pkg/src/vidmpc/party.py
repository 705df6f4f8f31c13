"""Networked party: JSON config, share loading and one TCP session.

A party only ever opens its own share files, its preprocessing files and
the public model manifest. Plaintext video and weight files have no code
path here.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .containers import Role, ShareFile, load_share, save_share
from .errors import ContainerFormatError
from .model import ModelSpec
from .nn import split_params
from .plan import DEFAULT_PLAN
from .preproc import MaterialStore
from .prf import KEY_BYTES
from .protocols import SessionContext
from .sharing import PARTIES, ZeroShareSource, check_party, next_party, prev_party
from .transport import TcpTransport, Transcript
from .video import pi_labelvideo

log = logging.getLogger(__name__)

SHARE_KINDS = ("video", "selection", "weights")
_ROLES = {"video": Role.VIDEO, "selection": Role.SELECTION, "weights": Role.WEIGHTS}


def _address(text: str) -> tuple[str, int]:
    host, _, port = str(text).rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address {text!r} is not host:port")
    return host, int(port)


@dataclass
class PartyConfig:
    party: int
    listen: tuple[str, int]
    peers: dict[int, tuple[str, int]]
    key_next: bytes  # shared with the next party
    key_prev: bytes  # shared with the previous party
    manifest: Path
    shares: dict[str, Path]
    preproc: Path
    output: Path
    timeout: float = 60.0
    base: Path = field(default_factory=Path)

    def __post_init__(self) -> None:
        check_party(self.party)
        if set(self.peers) != set(PARTIES) - {self.party}:
            raise ValueError(f"party {self.party} needs exactly peers {sorted(set(PARTIES) - {self.party})}")
        if len(self.key_next) != KEY_BYTES or len(self.key_prev) != KEY_BYTES:
            raise ValueError(f"PRF keys must be {KEY_BYTES} bytes")
        missing = set(SHARE_KINDS) - set(self.shares)
        if missing:
            raise ValueError(f"config lacks share paths for {sorted(missing)}")

    @property
    def addresses(self) -> dict[int, tuple[str, int]]:
        return {self.party: self.listen, **self.peers}

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "PartyConfig":
        def resolve(p) -> Path:
            p = Path(p)
            return p if p.is_absolute() else base / p

        try:
            return cls(
                party=int(d["party"]),
                listen=_address(d["listen"]),
                peers={int(k): _address(v) for k, v in d["peers"].items()},
                key_next=bytes.fromhex(d["keys"]["next"]),
                key_prev=bytes.fromhex(d["keys"]["prev"]),
                manifest=resolve(d["manifest"]),
                shares={k: resolve(v) for k, v in d["shares"].items()},
                preproc=resolve(d["preproc"]),
                output=resolve(d["output"]),
                timeout=float(d.get("timeout", 60.0)),
                base=base,
            )
        except KeyError as exc:
            raise ValueError(f"config missing field {exc}") from exc

    @classmethod
    def load(cls, path) -> "PartyConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)


def make_configs(
    out_dir,
    *,
    host: str = "127.0.0.1",
    base_port: int = 47100,
    manifest: str = "model.json",
    shares_dir: str = "shares",
    preproc_dir: str = "preproc",
    output_dir: str = "out",
    timeout: float = 60.0,
    keys: list[bytes] | None = None,
) -> list[Path]:
    """Write party1.json .. party3.json; key k_i is shared by parties i and i+1."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keys = keys or [os.urandom(KEY_BYTES) for _ in PARTIES]
    addr = {i: f"{host}:{base_port + i}" for i in PARTIES}
    written = []
    for i in PARTIES:
        cfg = {
            "party": i,
            "listen": addr[i],
            "peers": {str(j): addr[j] for j in PARTIES if j != i},
            "keys": {"next": keys[i - 1].hex(), "prev": keys[prev_party(i) - 1].hex()},
            "manifest": manifest,
            "shares": {k: f"{shares_dir}/{k}.p{i}.mpct" for k in SHARE_KINDS},
            "preproc": preproc_dir,
            "output": f"{output_dir}/label.p{i}.mpct",
            "timeout": timeout,
        }
        path = out_dir / f"party{i}.json"
        path.write_text(json.dumps(cfg, indent=2) + "\n")
        written.append(path)
    return written


def load_party_shares(cfg: PartyConfig, session_id: bytes) -> dict[str, ShareFile]:
    return {
        kind: load_share(cfg.shares[kind], role=_ROLES[kind], session_id=session_id, holder=cfg.party)
        for kind in SHARE_KINDS
    }


def run_party(cfg: PartyConfig, session_id: bytes) -> tuple[Path, Transcript]:
    """Run one party to completion and write its label share."""
    model = ModelSpec.load(cfg.manifest)
    shares = load_party_shares(cfg, session_id)
    if shares["weights"].share.size != model.n_params:
        raise ContainerFormatError(f"weight share has {shares['weights'].share.size} entries, manifest needs {model.n_params}")
    preproc = MaterialStore.load(cfg.preproc, cfg.party, session_id)
    zeros = ZeroShareSource(cfg.party, cfg.key_next, cfg.key_prev)
    log.info("party %d: connecting (next=%d, prev=%d)", cfg.party, next_party(cfg.party), prev_party(cfg.party))
    transport = TcpTransport(cfg.party, cfg.addresses, session_id, cfg.timeout)
    try:
        transport.connect()
        ctx = SessionContext(cfg.party, transport, zeros, preproc, DEFAULT_PLAN)
        params = split_params(model, shares["weights"].share.reshape(-1))
        label = pi_labelvideo(ctx, shares["video"].share, shares["selection"].share, model, params)
    finally:
        transport.close()
    cfg.output.parent.mkdir(parents=True, exist_ok=True)
    save_share(cfg.output, ShareFile(label, session_id, Role.LABEL))
    return cfg.output, transport.transcript
