"""
Application controllers
"""
from dataclasses import dataclass
from os import path
from typing import Optional

import settings
from . import core, model
from .adaptive import Protocol, constant_schedule, ramp_schedule, run_protocol
from .analysis import grid_max_throughput, sweep, throughput_hnoma, throughput_hnoma_opt, throughput_report
from .config import (
    NEEDS_SEED,
    GameConfig,
    canonical,
    hash_of,
    load_config,
    state_of,
    with_overrides,
)
from .errors import ConfigError, NoBracketError
from .export import Export
from .game import State
from .replicator import run_replicator
from .simulator import SimConfig, SimMode, run_sim
from .solver import EssSolution, solve

EXIT_OK = 0
EXIT_INVALID = 2


@dataclass
class Run:
    """Everything a controller needs once the config has been validated."""

    command: str
    cfg: GameConfig
    out_dir: str
    fmt: str
    workers: int
    export: Export

    @property
    def seed(self) -> Optional[int]:
        return getattr(self.cfg, 'seed', None)

    def file(self, name: str) -> str:
        return path.join(self.out_dir, name)


def prepare(args: core.Namespace, command: str) -> Run:
    """Load and validate the config, apply CLI overrides, check the output dir.

    Raises:
        ConfigError: On any config problem, a missing seed, or an unwritable
            output directory. Nothing has been computed at that point.
    """
    cfg = load_config(command, core.get_arg_option('config', args, str, None))
    cfg = with_overrides(cfg, seed=core.get_arg_option('seed', args, int, None))
    if command in NEEDS_SEED and getattr(cfg, 'seed', None) is None:
        raise ConfigError("%s needs a seed (config key 'seed' or --seed)" % command)
    out_dir = core.get_arg_option('out', args, str, getattr(settings, 'output_location', 'out'))
    core.ensure_output_dir(out_dir)
    fmt = core.get_arg_option('format', args, str, 'csv')
    if fmt not in ('csv', 'json'):
        raise ConfigError("--format must be csv or json, got %s" % fmt)
    workers = core.get_workers(core.get_arg_option('workers', args, int, None))
    digest = hash_of(cfg)
    export = Export(command, digest, getattr(cfg, 'seed', None), canonical(cfg))
    print("[%s] config_hash=%s seed=%s" % (command, digest, export.seed))
    return Run(command, cfg, out_dir, fmt, workers, export)


def _fmt_state(x: State) -> str:
    return "(%.6f, %.6f, %.6f)" % x.as_tuple()


def _solve_or_report(tag: str, cfg: GameConfig) -> Optional[EssSolution]:
    try:
        sol = solve(cfg.params())
    except NoBracketError as exc:
        print("[%s] no ESS: %s" % (tag, exc))
        return None
    if not sol.valid:
        print("[%s] invalid solution: %s" % (tag, sol.reason))
        return None
    return sol


class EssController:
    """`mynoma.py ess run` - solve the ESS of one parameter set."""

    @staticmethod
    def run(args: core.Namespace) -> int:
        run = prepare(args, 'ess')
        cfg = run.cfg
        try:
            sol = solve(cfg.params())
        except NoBracketError as exc:
            print("[ess] no ESS: %s" % exc)
            return EXIT_INVALID
        t = sol.thresholds(cfg.gbar)
        print("[ess] regime=%s state=%s" % (sol.regime.value, _fmt_state(sol.state)))
        print("[ess] residuals=(%.3g, %.3g) thresholds tau=%.6g tau_pn=%.6g"
              % (sol.residuals[0], sol.residuals[1], t.tau, t.tau_pn))
        for w in sol.warnings:
            print("[ess] warning: %s" % w)
        if not sol.valid:
            print("[ess] invalid: %s" % sol.reason)
        data = dict(sol.to_dict(), tau=t.tau, tau_pn=t.tau_pn, gbar=cfg.gbar)
        if run.fmt == 'json':
            run.export.write('summaryjson', run.file('ess'), data)
        else:
            run.export.write('rowscsv', run.file('ess'), {
                "keys": ['regime', 'x1', 'x2', 'x3', 'tau', 'tau_pn', 'r1', 'r2', 'valid', 'reason'],
                "rows": [(sol.regime.value, *sol.state.as_tuple(), t.tau, t.tau_pn,
                          *sol.residuals, sol.valid, sol.reason or '')],
            })
        return EXIT_OK if sol.valid else EXIT_INVALID


class ReplicatorController:
    """`mynoma.py replicator run` - integrate the replicator dynamics."""

    @staticmethod
    def run(args: core.Namespace) -> int:
        run = prepare(args, 'replicator')
        cfg = run.cfg
        traj = run_replicator(state_of(cfg.x0), cfg.params(), mu=cfg.mu,
                              max_iters=cfg.max_iters, drift_tol=cfg.drift_tol)
        run.export.write('trajectory' + run.fmt, run.file('trajectory'), traj)
        print("[replicator] %s after %d iterations, final state %s"
              % ("converged" if traj.converged else "not converged", traj.iterations,
                 _fmt_state(traj.final)))
        for flag in traj.flags:
            print("[replicator] flag: %s" % flag)
        return EXIT_OK


class SimulateController:
    """`mynoma.py simulate run` - slot-level Monte-Carlo run."""

    @staticmethod
    def run(args: core.Namespace) -> int:
        run = prepare(args, 'simulate')
        cfg = run.cfg
        params = cfg.params()
        if cfg.state is not None:
            policy = state_of(cfg.state)
        else:
            sol = _solve_or_report('simulate', cfg)
            if sol is None:
                return EXIT_INVALID
            policy = sol.state
        sim_cfg = SimConfig(n_blocks=cfg.n_blocks, n_slots=cfg.n_slots, gbar=cfg.user_gbar(),
                            mode=SimMode(cfg.mode), seed=cfg.seed, packet_prob=cfg.packet_prob,
                            trace=cfg.trace)
        stats = run_sim(sim_cfg, policy, params, workers=run.workers)
        run.export.write('simjson', run.file('simulate'), stats)
        if cfg.trace:
            run.export.write('tracecsv', run.file('trace'), stats)
        print("[simulate] policy %s, throughput %.6f +- %.6f (closed form %.6f)"
              % (_fmt_state(policy), stats.throughput, stats.throughput_se,
                 throughput_hnoma(policy)))
        print("[simulate] action frequencies %s, collisions %d"
              % (", ".join("%.4f" % f for f in stats.action_freq), stats.collisions))
        if stats.unbounded_power:
            print("[simulate] warning: tau = 0, transmit power is unbounded")
        return EXIT_OK


class AdaptiveController:
    """`mynoma.py adaptive su-bs|su-u` - estimation-driven state updating."""

    @staticmethod
    def su_bs(args: core.Namespace) -> int:
        return AdaptiveController._run(args, Protocol.SU_BS)

    @staticmethod
    def su_u(args: core.Namespace) -> int:
        return AdaptiveController._run(args, Protocol.SU_U)

    @staticmethod
    def _run(args: core.Namespace, protocol: Protocol) -> int:
        run = prepare(args, 'adaptive')
        cfg = run.cfg
        if cfg.schedule == 'ramp':
            sched = ramp_schedule(cfg.blocks, cfg.ramp_den, cfg.slots_per_block, cfg.ramp_offset)
        elif cfg.c is None:
            raise ConfigError("adaptive protocols need SNR-scaled costs (config key 'c')")
        else:
            sched = constant_schedule(cfg.c, cfg.blocks, cfg.slots_per_block)
        params = cfg.params(c=sched.c(0))
        sim_cfg = SimConfig(n_blocks=cfg.n_blocks, n_slots=cfg.slots_per_block,
                            gbar=cfg.user_gbar(), mode=SimMode.CHANNEL, seed=cfg.seed,
                            packet_prob=cfg.packet_prob)
        result = run_protocol(protocol.value, sim_cfg, sched, params, cfg.mu,
                              state_of(cfg.x0), estimator=cfg.estimator, oracle=cfg.oracle,
                              fairness=cfg.fairness, keep_history=False)
        name = protocol.value.replace('-', '_')
        run.export.write('adaptive' + run.fmt, run.file(name), result)
        if cfg.keep_users and result.users:
            run.export.write('usersjson', run.file(name + '_users'), result)
        tail = result.tail_mean(min(20, sched.n_blocks))
        print("[adaptive] %s: %d blocks, last-20 mean state %s"
              % (protocol.value, sched.n_blocks, _fmt_state(tail)))
        print("[adaptive] reference ESS at c=%.4g: %s, tracking error %.5f"
              % (sched.c(sched.n_blocks - 1), _fmt_state(result.reference[-1]),
                 result.tracking_error()))
        for flag in result.trajectory.flags:
            print("[adaptive] flag: %s" % flag)
        return EXIT_OK


class SweepController:
    """`mynoma.py sweep run` - ESS along the c or gbar axis."""

    @staticmethod
    def run(args: core.Namespace) -> int:
        run = prepare(args, 'sweep')
        cfg = run.cfg
        use_cache = bool(getattr(settings, 'sweep_cache', True)) and not getattr(args, 'no_cache', False)
        if use_cache:
            model.init_db()
        table = sweep(cfg.params(), cfg.axis, cfg.values, workers=run.workers, cache=use_cache)
        name = 'sweep_' + cfg.axis
        run.export.write('sweep' + run.fmt, run.file(name), table)
        summary = table.summary()
        run.export.write('summaryjson', run.file(name + '_summary'), summary)
        print("[sweep] %d points on %s, %d valid" % (summary['n_points'], cfg.axis, summary['n_valid']))
        if summary['crossover']:
            print("[sweep] x1 = x2 = %.4f at %s = %.4f"
                  % (summary['crossover']['x'], cfg.axis, summary['crossover']['value']))
        return EXIT_OK if summary['n_valid'] else EXIT_INVALID


class ThroughputController:
    """`mynoma.py throughput run` - closed-form throughput comparison."""

    @staticmethod
    def run(args: core.Namespace) -> int:
        run = prepare(args, 'throughput')
        cfg = run.cfg
        rows = []
        report = None
        has_cost = cfg.c is not None or cfg.C1 is not None
        if cfg.state is not None or has_cost:
            if cfg.state is not None:
                x = state_of(cfg.state)
            else:
                sol = _solve_or_report('throughput', cfg)
                if sol is None:
                    return EXIT_INVALID
                x = sol.state
            report = throughput_report(x)
            rows.append(('state', *x.as_tuple(), report.eta_hnoma, report.eta_oma,
                         report.eta_opt, report.ratio if report.ratio is not None else float('nan')))
            print("[throughput] state %s: hybrid %.6f, OMA %.6f, optimum %.6f"
                  % (_fmt_state(x), report.eta_hnoma, report.eta_oma, report.eta_opt))
        optima = []
        for delta in cfg.deltas:
            eta, xo = throughput_hnoma_opt(delta)
            grid, _, _ = grid_max_throughput(delta)
            oma = (1.0 - delta) / 2.0
            rows.append(('opt', *xo.as_tuple(), eta, oma, eta, 1.0 + delta))
            optima.append({"delta": delta, "eta_opt": eta, "eta_oma": oma,
                           "gain": 1.0 + delta, "grid_max": grid})
            print("[throughput] delta=%.3f: optimum %.6f (grid %.6f), OMA %.6f"
                  % (delta, eta, grid, oma))
        if run.fmt == 'json':
            run.export.write('summaryjson', run.file('throughput'), {
                "report": report.to_dict() if report else None,
                "optima": optima,
            })
        else:
            run.export.write('rowscsv', run.file('throughput'), {
                "keys": ['label', 'x1', 'x2', 'x3', 'eta_hnoma', 'eta_oma', 'eta_opt', 'ratio'],
                "rows": rows,
            })
        return EXIT_OK
