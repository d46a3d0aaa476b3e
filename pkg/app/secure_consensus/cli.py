#!/usr/bin/env python3
"""
Command Implementations

Each cmd_* takes parsed arguments and returns the process exit code:

    0  success / feasible / PASS
    1  IO, parse or usage error
    2  infeasible synthesis or failed verification
    3  runtime invariant violation (step index on stderr)

Author: ThinkCraft
"""

from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional
import argparse
import functools
import logging
import re
import sys
import time

from .artifacts import RunSummary, write_json, write_series, write_sweep, write_trace
from .baseline import compare_protocols, run_baseline
from .core.config import settings
from .core.errors import ConfigError, Infeasible, InvariantViolation, NoConvergence, SecureConsensusError
from .gain_synthesis import VerificationReport, compute_protocol_constants, verify_theorem_conditions
from .models.schemas import (
    ScenarioConfig,
    default_scenario_config,
    load_gains_document,
    load_scenario_config,
    table_config,
)
from .scenario import LoadedScenario, build_scenario, gains_from_document, gains_to_document
from .sim_harness import monte_carlo, run_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_INFEASIBLE = 2
EXIT_INVARIANT = 3

BANNER = "=" * 70


def _banner(title: str) -> None:
    print(BANNER)
    print(title)
    print(BANNER)


def parse_seeds(text: Optional[str]) -> List[int]:
    """
    "1,2,3" -> [1, 2, 3]; "0-4" -> [0, 1, 2, 3, 4].

    Raises:
        ValueError: On an empty list or a malformed entry
    """
    if text is None or not text.strip():
        raise ValueError("seed list is empty")
    seeds: List[int] = []
    for piece in (p.strip() for p in text.split(",")):
        span = re.fullmatch(r"(\d+)-(\d+)", piece)
        if span:
            seeds.extend(range(int(span.group(1)), int(span.group(2)) + 1))
        elif piece:
            seeds.append(int(piece))
    if not seeds:
        raise ValueError("seed list is empty")
    return seeds


def parse_floats(text: str) -> List[float]:
    values = [float(piece) for piece in text.split(",") if piece.strip()]
    if not values:
        raise ValueError("value list is empty")
    return values


def command(func: Callable[[argparse.Namespace], int]) -> Callable[[argparse.Namespace], int]:
    """Map toolkit exceptions raised by a command onto exit codes."""

    @functools.wraps(func)
    def wrapper(args: argparse.Namespace) -> int:
        try:
            return func(args)
        except InvariantViolation as exc:
            logger.error(f"Run aborted: {exc}")
            print(f"invariant violation at step {exc.step}: {exc.reason}", file=sys.stderr)
            return EXIT_INVARIANT
        except (Infeasible, NoConvergence) as exc:
            logger.error(f"Synthesis failed: {exc}")
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        except ConfigError as exc:
            logger.error(f"Invalid document: {exc}")
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_IO
        except OSError as exc:
            logger.error(f"IO error: {exc}")
            print(f"io error: {exc}", file=sys.stderr)
            return EXIT_IO
        except (SecureConsensusError, ValueError) as exc:
            logger.error(f"Invalid input: {exc}")
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO

    return wrapper


def _load(args: argparse.Namespace, config: Optional[ScenarioConfig] = None) -> LoadedScenario:
    config = config or load_scenario_config(args.config)
    loaded = build_scenario(
        config,
        seed=getattr(args, "seed", None),
        xi_hold_mode=getattr(args, "xi_hold_mode", None),
        rebroadcast_on_switch=True if getattr(args, "rebroadcast_on_switch", False) else None,
    )
    gains_path = getattr(args, "gains", None)
    if gains_path:
        document = load_gains_document(gains_path)
        if document.config_digest and document.config_digest != loaded.digest:
            logger.warning(f"{gains_path} was synthesized for a different scenario document")
        loaded = loaded.with_gains(gains_from_document(document, loaded.scenario))
    return loaded


def _print_report(report: VerificationReport) -> None:
    for line in report.lines():
        print(line)


def _verify(loaded: LoadedScenario) -> VerificationReport:
    s = loaded.scenario
    return verify_theorem_conditions(s.require_gains(), s.plant, s.process, s.attack)


@command
def cmd_synth(args: argparse.Namespace) -> int:
    """Synthesize gains, write gains.json, print the verification margins."""
    loaded = _load(args)
    _banner(f"Gain synthesis - {loaded.config.name}")
    gains = loaded.synthesize()
    write_json(gains_to_document(gains, loaded.digest).model_dump(), args.out)
    report = _verify(loaded.with_gains(gains))
    print(f"observer: {gains.observer}")
    _print_report(report)
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


@command
def cmd_verify(args: argparse.Namespace) -> int:
    """Print every condition with its margin and the verdict."""
    loaded = _load(args)
    _banner(f"Verification - {loaded.config.name}")
    report = _verify(loaded)
    _print_report(report)
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


@command
def cmd_run(args: argparse.Namespace) -> int:
    """One proposed-protocol run: trace.csv and summary.json."""
    loaded = _load(args)
    scenario = loaded.scenario
    out = Path(args.out)
    report = _verify(loaded)
    if not report.feasible:
        logger.warning("Design conditions do not all hold; running anyway")

    ts, metrics = run_scenario(scenario, verify=False)
    write_trace(ts, out / "trace.csv", scenario.integration.decimation)
    summary = RunSummary.from_run(
        loaded.digest,
        scenario.seed,
        metrics,
        report.to_dict(),
        protocol="proposed",
        xi_hold_mode=scenario.xi_hold_mode,
        rebroadcast_on_switch=scenario.rebroadcast_on_switch,
    )
    write_json(summary.to_dict(), out / "summary.json")

    _banner(f"Run - {loaded.config.name} (seed {scenario.seed})")
    print(f"steady-state position error: {metrics.steady_state_pos_error:.4f} m")
    print(f"total triggers:              {metrics.total_triggers}")
    print(f"min varpi:                   {metrics.varpi_min:.6g}")
    print(f"wall clock:                  {metrics.wall_clock:.2f} s")
    return EXIT_OK


def _print_comparison(result) -> None:
    rows = (
        ("steady-state error (m)", "steady_state_pos_error"),
        ("total triggers", "total_triggers"),
        ("tail mean ||delta||", "delta_norm_tail_mean"),
    )
    print(f"{'metric':<26}{'proposed':>20}{'baseline':>20}")
    for label, key in rows:
        cells = []
        for summary in (result.proposed, result.baseline):
            std = summary.std[key]
            cells.append(f"{summary.mean[key]:.4g}" + ("" if std is None else f" ± {std:.2g}"))
        print(f"{label:<26}{cells[0]:>20}{cells[1]:>20}")
    print(f"baseline error larger:    {result.error_dominance}")
    print(f"baseline triggers larger: {result.trigger_dominance}")


@command
def cmd_compare(args: argparse.Namespace) -> int:
    """Paired-seed proposed vs baseline summary."""
    seeds = parse_seeds(args.seeds)
    loaded = _load(args)
    result = compare_protocols(loaded.scenario, seeds, loaded.baseline)
    _banner(f"Comparison - {loaded.config.name} ({len(seeds)} seeds)")
    _print_comparison(result)
    if args.out:
        write_json({"scenario_digest": loaded.digest, **result.to_dict()}, args.out)
    return EXIT_OK


def _with_tau(loaded: LoadedScenario, tau: float) -> LoadedScenario:
    """Same scenario and gains under a different attack energy bound."""
    config = loaded.config.model_copy(update={"attack": loaded.config.attack.model_copy(update={"tau": tau})})
    rebuilt = build_scenario(
        config,
        seed=loaded.scenario.seed,
        xi_hold_mode=loaded.scenario.xi_hold_mode,
        rebroadcast_on_switch=loaded.scenario.rebroadcast_on_switch,
    )
    gains = loaded.scenario.require_gains()
    s = rebuilt.scenario
    constants = compute_protocol_constants(s.params, s.process, s.attack, P=gains.P, Q=gains.Q)
    return rebuilt.with_gains(replace(gains, constants=constants))


@command
def cmd_sweep(args: argparse.Namespace) -> int:
    """Monte-Carlo tail ||delta|| against sqrt(tau/(chi kappa)) for several tau."""
    seeds = parse_seeds(args.seeds)
    taus = parse_floats(args.taus)
    loaded = _load(args)
    if loaded.scenario.gains is None:
        loaded = loaded.with_gains(loaded.synthesize())

    _banner(f"Attack energy sweep - {loaded.config.name}")
    rows = []
    for tau in taus:
        summary = monte_carlo(_with_tau(loaded, tau).scenario, seeds)
        rows.append(
            {
                "tau": tau,
                "bound": summary.bound,
                "tail_delta_mean": summary.mean["delta_norm_tail_mean"],
                "tail_delta_std": summary.std["delta_norm_tail_mean"],
                "bound_ratio": summary.bound_ratio,
                "bound_holds": summary.bound_holds,
                "steady_state_pos_error": summary.mean["steady_state_pos_error"],
            }
        )
        bound = "n/a" if summary.bound is None else f"{summary.bound:.4g}"
        print(
            f"tau={tau:<10g} tail E||delta||={summary.mean['delta_norm_tail_mean']:.4g} "
            f"bound={bound} holds={summary.bound_holds}"
        )
    if args.out:
        write_sweep(rows, args.out)
    return EXIT_OK


def _acceptance(report: VerificationReport, metrics, step: float, table_report: VerificationReport) -> Dict[str, bool]:
    threshold = metrics.threshold_audit
    dbar_row = [passed for name, passed, _ in table_report.scalar_checks.items() if name.startswith("d_bar")]
    return {
        "steady_state_error_below_0_5m": metrics.steady_state_pos_error < 0.5,
        "threshold_positive": metrics.varpi_min is not None and metrics.varpi_min > 0,
        "threshold_decay_bound": threshold is not None and threshold.decay_bound_holds,
        "trigger_rule_between_events": threshold is not None and threshold.trigger_rule_holds,
        "inter_event_floor": metrics.trigger_floor_respected,
        "mean_inter_event_at_least_10h": metrics.mean_gap >= 10 * step,
        "strict_certificates": report.feasible and report.strictly_certified(),
        "riccati_residual": (
            report.riccati_residual is not None
            and report.riccati_residual <= 1e-8 * report.norms["P"]
        ),
        "energy_bound": metrics.energy_audit.passed,
        "table_dbar_inconsistency_reported": bool(dbar_row) and not dbar_row[0],
    }


@command
def cmd_demo(args: argparse.Namespace) -> int:
    """Synthesize, verify, run both protocols and write the full bundle."""
    out = Path(args.out or settings.OUTPUT_DIR)
    config = load_scenario_config(args.config) if getattr(args, "config", None) else default_scenario_config()
    loaded = _load(args, config)
    started = time.perf_counter()

    _banner(f"Demo - {config.name}")
    gains = loaded.synthesize()
    loaded = loaded.with_gains(gains)
    write_json(gains_to_document(gains, loaded.digest).model_dump(), out / "gains.json")
    report = _verify(loaded)
    _print_report(report)

    scenario = loaded.scenario
    ts, metrics = run_scenario(scenario, verify=False)
    ts_base, metrics_base = run_baseline(scenario, loaded.baseline)
    decimation = scenario.integration.decimation
    write_trace(ts, out / "trace.csv", decimation)
    write_trace(ts_base, out / "trace_baseline.csv", decimation)
    write_series(out / "series", ts, ts_base, decimation)

    table_loaded = build_scenario(table_config())
    table_report = verify_theorem_conditions(
        replace(gains, params=table_loaded.scenario.params),
        table_loaded.scenario.plant,
        table_loaded.scenario.process,
        table_loaded.scenario.attack,
    )
    checks = _acceptance(report, metrics, scenario.integration.step, table_report)
    summary = RunSummary.from_run(
        loaded.digest,
        scenario.seed,
        metrics,
        report.to_dict(),
        baseline=metrics_base.to_dict(),
        baseline_error_larger=metrics_base.steady_state_pos_error > metrics.steady_state_pos_error,
        baseline_triggers_larger=metrics_base.total_triggers > metrics.total_triggers,
    )
    summary.wall_clock = time.perf_counter() - started
    write_json(summary.to_dict(), out / "summary.json")
    write_json({"checks": checks, "all_passed": all(checks.values())}, out / "acceptance.json")

    print(BANNER)
    print(f"steady-state error  proposed {metrics.steady_state_pos_error:.4f} m, "
          f"baseline {metrics_base.steady_state_pos_error:.4f} m")
    print(f"triggers            proposed {metrics.total_triggers}, baseline {metrics_base.total_triggers}")
    for name, passed in checks.items():
        print(f"{name:<36} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if all(checks.values()) else EXIT_INFEASIBLE


@command
def cmd_init(args: argparse.Namespace) -> int:
    """Write the embedded scenario (or the literal parameter table) as JSON."""
    config = table_config() if args.literal_table else default_scenario_config()
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path} ({config.name})")
    return EXIT_OK

