"""Command-line scenario runner.

Exit codes: 0 expected outcome, 1 outcome not met (or sweep failure),
2 usage error, 3 stuck run, 4 replay mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .attack import run_attack
from .errors import ConfigurationError, GKEError, InvalidParamsError, StuckRunError
from .group import GroupParams
from .scenario import (
    Execution,
    RunReport,
    ScenarioConfig,
    read_transcript,
    run_honest,
    transcript_header,
    write_transcript,
)

log = logging.getLogger("bdgke")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_STUCK = 3
EXIT_MISMATCH = 4


def execute(config: ScenarioConfig, params: Optional[GroupParams] = None) -> Execution:
    if config.mode == "attack":
        return run_attack(config, params)
    return run_honest(config, params)


def exit_code(report: RunReport) -> int:
    """Map a report to its exit status; depends on nothing else."""
    if not report.agreement:
        return EXIT_FAIL
    if report.mode == "honest":
        return EXIT_OK if len(report.keys) == report.n else EXIT_FAIL
    if len(report.keys) != report.n + 1:
        return EXIT_FAIL
    if report.evasion and report.victim_detects:
        return EXIT_FAIL
    return EXIT_OK


def run(config: ScenarioConfig) -> tuple[RunReport, int]:
    execution = execute(config)
    if config.out:
        write_transcript(execution, config.out)
    return execution.report, exit_code(execution.report)


@dataclass
class ReplayVerdict:
    match: bool
    line: Optional[int] = None  # 0 is the header, i >= 1 is event i
    expected: Optional[str] = None
    actual: Optional[str] = None

    def describe(self) -> str:
        if self.match:
            return "transcript replay: match"
        where = "header" if self.line == 0 else f"event {self.line}"
        return (f"transcript replay: mismatch at {where}\n"
                f"  recorded: {self.expected}\n  replayed: {self.actual}")


def replay(path) -> ReplayVerdict:
    """Re-run the scenario embedded in a transcript and compare line by line."""
    config, params, recorded = read_transcript(path)
    execution = execute(config, params)
    with open(path) as fh:
        recorded_header = fh.readline().rstrip("\n")
    fresh_header = transcript_header(config, params)
    if recorded_header != fresh_header:
        return ReplayVerdict(False, 0, recorded_header, fresh_header)
    fresh = execution.transcript.lines()
    for i in range(max(len(recorded), len(fresh))):
        want = recorded[i] if i < len(recorded) else None
        got = fresh[i] if i < len(fresh) else None
        if want != got:
            return ReplayVerdict(False, i + 1, want, got)
    return ReplayVerdict(True)


def _sweep_cell(args) -> tuple[int, str, int, int, bool]:
    n, mode, victim, seed, group, check_product = args
    config = ScenarioConfig(mode=mode, n=n, victim=victim, group=group, seed=seed,
                            check_product=check_product)
    try:
        _, code = run(config)
    except GKEError:
        return n, mode, victim or 0, seed, False
    return n, mode, victim or 0, seed, code == EXIT_OK


def sweep(n_values, seeds, modes, group: str = "toy", check_product: bool = True,
          jobs: int = 1) -> dict[tuple[int, str], tuple[int, int]]:
    """Run every (n, mode, seed) cell, attacking each possible victim in attack mode.

    Returns {(n, mode): (passed, total)}.
    """
    n_values, seeds, modes = list(n_values), list(seeds), list(modes)
    if not n_values or not seeds or not modes:
        raise ConfigurationError("sweep ranges must be non-empty")
    tasks = []
    for n in n_values:
        for mode in modes:
            victims = range(1, n + 1) if mode == "attack" else [None]
            for victim in victims:
                for seed in seeds:
                    tasks.append((n, mode, victim, seed, group, check_product))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, tasks, chunksize=64))
    else:
        results = [_sweep_cell(t) for t in tasks]

    table: dict[tuple[int, str], tuple[int, int]] = {}
    for n, mode, _victim, _seed, ok in results:
        passed, total = table.get((n, mode), (0, 0))
        table[(n, mode)] = (passed + ok, total + 1)
    return table


def format_sweep(table, modes) -> str:
    n_values = sorted({n for n, _ in table})
    width = max(len(m) for m in modes) + 12
    lines = ["n".rjust(3) + "".join(m.rjust(width) for m in modes)]
    for n in n_values:
        cells = []
        for m in modes:
            passed, total = table[(n, m)]
            verdict = "PASS" if passed == total else "FAIL"
            cells.append(f"{verdict} {passed}/{total}".rjust(width))
        lines.append(str(n).rjust(3) + "".join(cells))
    return "\n".join(lines)


def parse_range(text: str) -> list[int]:
    """Parse '3-10', '1,2,5' or a mix such as '0-4,9'."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdgke",
        description="Simulate the Burmester-Desmedt group key exchange, honestly or under "
                    "an active attack on one party's link.",
    )
    parser.add_argument("--mode", choices=["honest", "attack"], default="honest")
    parser.add_argument("--n", type=int, default=4, help="number of parties (>= 3)")
    parser.add_argument("--victim", type=int, help="index of the attacked party (attack mode)")
    parser.add_argument("--group", default="schnorr-256",
                        help="toy, schnorr-256 or file:<path to JSON params>")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--check-product", action="store_true",
                        help="have every party verify that all X values multiply to 1")
    parser.add_argument("--no-evasion", dest="evasion", action="store_false",
                        help="fill the victim's unused X slot with a random element")
    parser.add_argument("--out", help="write the JSON-lines transcript here")
    parser.add_argument("--replay", metavar="TRANSCRIPT",
                        help="re-run a transcript and check it is byte-identical")
    parser.add_argument("--sweep", action="store_true",
                        help="run a pass/fail matrix over --n-range x --seeds x --modes")
    parser.add_argument("--n-range", default="3-10")
    parser.add_argument("--seeds", default="0-99")
    parser.add_argument("--modes", default="honest,attack")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.replay:
        try:
            verdict = replay(args.replay)
        except (OSError, GKEError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(verdict.describe())
        return EXIT_OK if verdict.match else EXIT_MISMATCH

    if args.sweep:
        try:
            modes = [m for m in args.modes.split(",") if m]
            if any(m not in ("honest", "attack") for m in modes):
                raise ConfigurationError(f"unknown mode in {args.modes!r}")
            table = sweep(parse_range(args.n_range), parse_range(args.seeds), modes,
                          group=args.group, check_product=True,
                          jobs=args.jobs)
        except (ValueError, GKEError) as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(format_sweep(table, modes))
        ok = all(passed == total for passed, total in table.values())
        return EXIT_OK if ok else EXIT_FAIL

    victim = args.victim if args.mode == "attack" else None
    if args.mode == "honest" and args.victim is not None:
        log.warning("--victim ignored in honest mode")
    config = ScenarioConfig(mode=args.mode, n=args.n, victim=victim, group=args.group,
                            seed=args.seed, check_product=args.check_product,
                            evasion=args.evasion, out=args.out)
    try:
        config.validate()
        report, code = run(config)
    except (ConfigurationError, InvalidParamsError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StuckRunError as exc:
        print(f"stuck run: {exc}", file=sys.stderr)
        return EXIT_STUCK
    print(report.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())
