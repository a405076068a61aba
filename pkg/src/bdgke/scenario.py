"""Scenario configuration, run reports, transcript files, and the honest runner."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigurationError
from .group import GroupElement, GroupParams, resolve_group, substream
from .netsim import Network, Transcript, honest_parties, run_to_quiescence
from .protocol import PartyState, party_product_check

MODES = ("honest", "attack")
SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    n: int
    victim: Optional[int] = None
    group: str = "schnorr-256"
    seed: int = 0
    check_product: bool = False
    evasion: bool = True
    out: Optional[str] = None

    def validate(self) -> ScenarioConfig:
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        if not isinstance(self.n, int) or self.n < 3:
            raise ConfigurationError("n must be an integer >= 3")
        if not 0 <= self.seed < SEED_LIMIT:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.mode == "attack":
            if self.victim is None or not 1 <= self.victim <= self.n:
                raise ConfigurationError(f"attack mode needs a victim in 1..{self.n}")
        elif self.victim is not None:
            raise ConfigurationError("a victim is only meaningful in attack mode")
        return self

    def to_dict(self) -> dict[str, Any]:
        """Everything needed to re-run the scenario; the output path is left out."""
        d = asdict(self)
        d.pop("out")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioConfig:
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class RunReport:
    mode: str
    n: int
    victim: Optional[int]
    group: str
    params_digest: str
    seed: int
    keys: dict[str, str]
    agreement: bool
    victim_detects: Optional[bool]
    detected_by: list[int] = field(default_factory=list)
    event_counts: dict[str, int] = field(default_factory=dict)
    evasion: bool = True
    check_product: bool = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls(**json.loads(text))


@dataclass
class Execution:
    """Everything a run produced, including state the report does not expose."""

    config: ScenarioConfig
    params: GroupParams
    parties: dict[int, PartyState]
    keys: dict[Any, GroupElement]
    transcript: Transcript
    report: RunReport
    attacker: Any = None


def party_rngs(seed: int, n: int):
    return {i: substream(seed, f"party-{i}") for i in range(1, n + 1)}


def build_report(config: ScenarioConfig, params: GroupParams, parties: dict[int, PartyState],
                 keys: dict[Any, GroupElement], transcript: Transcript) -> RunReport:
    hex_keys = {str(actor): key.hex() for actor, key in keys.items()}
    detected_by: list[int] = []
    victim_detects = None
    if config.check_product:
        detected_by = [i for i in sorted(parties) if not party_product_check(parties[i])]
        if config.mode == "attack":
            victim_detects = config.victim in detected_by
    return RunReport(
        mode=config.mode,
        n=config.n,
        victim=config.victim,
        group=config.group,
        params_digest=params.digest(),
        seed=config.seed,
        keys=hex_keys,
        agreement=len(set(hex_keys.values())) == 1,
        victim_detects=victim_detects,
        detected_by=detected_by,
        event_counts=transcript.counts(),
        evasion=config.evasion,
        check_product=config.check_product,
    )


def run_honest(config: ScenarioConfig, params: Optional[GroupParams] = None,
               shuffle_seed: Optional[int] = None) -> Execution:
    config.validate()
    params = params or resolve_group(config.group)
    net = Network(config.n)
    shuffle_rng = substream(shuffle_seed, "shuffle") if shuffle_seed is not None else None
    result = run_to_quiescence(net, honest_parties(params, config.n),
                               party_rngs(config.seed, config.n), shuffle_rng=shuffle_rng)
    report = build_report(config, params, result.parties, result.keys, result.transcript)
    return Execution(config, params, result.parties, result.keys, result.transcript, report)


def transcript_header(config: ScenarioConfig, params: GroupParams) -> str:
    return json.dumps({"config": config.to_dict(), "params": params.to_dict()},
                      separators=(",", ":"))


def transcript_text(execution: Execution) -> str:
    return transcript_header(execution.config, execution.params) + "\n" + \
        execution.transcript.to_jsonl()


def write_transcript(execution: Execution, path) -> None:
    Path(path).write_text(transcript_text(execution))


def read_transcript(path) -> tuple[ScenarioConfig, GroupParams, list[str]]:
    """Split a transcript file into its embedded config, group and raw event lines."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ConfigurationError(f"{path}: empty transcript")
    try:
        header = json.loads(lines[0])
        config = ScenarioConfig.from_dict(header["config"])
        params = GroupParams.from_dict(header["params"]).validate()
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"{path}: bad transcript header ({exc})") from exc
    return config, params, lines[1:]

