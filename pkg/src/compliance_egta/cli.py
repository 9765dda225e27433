"""Command-line interface

Exit status is 0 when a command completes (including a search that stops on
its budget), 1 for usage or configuration errors, and 2 for failures while
running.
"""
import argparse
import json
import logging
import os
import sys

from compliance_egta import analysis, exploration, report
from compliance_egta.config import RunConfig, read_json
from compliance_egta.errors import (BudgetExhausted, ConfigurationError,
                                    DataError)
from compliance_egta.game import EmpiricalGame, PayoffDatabase, load_game
from compliance_egta.inner_loop import InnerLoopConfig, ProgressLog
from compliance_egta.scheduler import Scheduler, coverage

log = logging.getLogger('compliance_egta')

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
GAME_FILE = 'game.json'
PAYOFF_LOG = 'payoffs.jsonl'
COMPLIANCE_FILE = 'compliance.json'


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# simulate

def _scenario_from(source):
    from compliance_egta.config import resolve_includes
    from compliance_egta.ibr.oracle import BUNDLED, load_scenario
    if source in BUNDLED:
        return load_scenario(source)
    data = read_json(source)
    if 'scenario' not in data:
        return load_scenario(data)
    base = os.path.dirname(os.path.abspath(source))
    scen = data['scenario']
    if isinstance(scen, str) and scen.endswith('.json'):
        scen = os.path.join(base, scen)
    elif isinstance(scen, dict):
        scen = resolve_includes(scen, base)
    return load_scenario(scen)


def parse_profile(text, scenario):
    """``client=C,C;isp=N;...`` or a JSON file of role -> policies

    A single policy for a role is given to all of its players. Policies are
    seed labels or parameter lists.
    """
    from compliance_egta.ibr.policy import ROLES
    if text is None:
        spec = {}
    elif os.path.exists(text):
        spec = read_json(text)
    else:
        spec = {}
        for part in filter(None, (p.strip() for p in text.split(';'))):
            role, sep, vals = part.partition('=')
            if not sep:
                raise ConfigurationError('bad profile entry: {}'.format(part))
            spec[role.strip()] = [v.strip() for v in vals.split(',')]
    missing = [r for r in ROLES if r not in spec]
    if missing:
        raise ConfigurationError('no policy assigned for role(s): {}'.format(
            ', '.join(missing)))
    return spec


def _profile_policies(spec, scenario):
    from compliance_egta.ibr.policy import SEED_POLICIES, PolicyParams
    reduction = scenario.reduction()
    policies, player_strats = {}, {}
    for role, groups in reduction.groups.items():
        vals = spec[role]
        if isinstance(vals, (str, dict)) or (
                vals and not isinstance(vals[0], (str, list))):
            vals = [vals]
        if len(vals) == 1:
            vals = vals * len(groups)
        if len(vals) != len(groups):
            raise ConfigurationError('role {} has {} players, got {} '
                                     'policies'.format(role, len(groups),
                                                       len(vals)))
        player_strats[role] = []
        for group, val in zip(groups, vals):
            if isinstance(val, str):
                if val not in SEED_POLICIES:
                    raise ConfigurationError(
                        'unknown policy {} for role {}'.format(val, role))
                pol = SEED_POLICIES[val]
            else:
                pol = PolicyParams.from_vector(val)
            player_strats[role].append(val)
            for node in group:
                policies[node] = pol
    return policies, player_strats


def cmd_simulate(args):
    from compliance_egta.game import reduced_payoff
    from compliance_egta.ibr.sim import run_simulation
    scenario = _scenario_from(args.config)
    spec = parse_profile(args.profile, scenario)
    policies, strats = _profile_policies(spec, scenario)
    seed = args.seed if args.seed is not None else scenario.network.seed
    res = run_simulation(scenario.network, policies, seed, scenario.weights)
    out = res.to_json()
    out['player_payoffs'] = reduced_payoff(res.payoffs, scenario.reduction())
    out['profile'] = strats
    out['seed'] = seed
    out['scenario'] = scenario.name
    report.validate(out, 'sim_result')
    _emit(out, args.out)
    if args.out:
        net = scenario.network
        per_client = (res.aggregate['messages_generated'] / net.N_C
                      if net.N_C else 0.0)
        report.write_json(manifest_path(args.out), report.manifest(
            'simulate', scenario.to_json(), seed, net.calibration,
            profile=strats, messages_per_client=per_client,
            trace_digest=res.trace_digest))
    return EXIT_OK


def manifest_path(out):
    """``result.json`` -> ``result.manifest.json``"""
    stem = out[:-5] if out.endswith('.json') else out
    return stem + '.manifest.json'


def _emit(data, path):
    if path:
        report.write_json(path, data)
    else:
        json.dump(data, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write('\n')


# analyze and status

def _load_game_dir(path, payoffs=None):
    game_file = os.path.join(path, GAME_FILE) if os.path.isdir(path) else path
    base = os.path.dirname(game_file)
    if payoffs is None:
        payoffs = os.path.join(base, PAYOFF_LOG)
    if not os.path.exists(game_file):
        raise ConfigurationError('no game file at {}'.format(game_file))
    if not os.path.exists(payoffs):
        raise ConfigurationError('no payoff log at {}'.format(payoffs))
    game = load_game(game_file, payoffs)
    spec = None
    comp = os.path.join(base, COMPLIANCE_FILE)
    if os.path.exists(comp):
        spec = exploration.ComplianceSpec.from_json(read_json(comp))
    return game, spec


def cmd_analyze(args):
    game, spec = _load_game_dir(args.game, args.payoffs)
    if args.tau is None:
        raise ConfigurationError('analyze needs --tau')
    cands = analysis.game_analysis(game, args.tau)
    out = report.candidate_report(game, cands, args.tau, spec, args.weights)
    report.validate(out, 'candidate_report')
    if out['status'] != 'ok':
        log.warning('no complete subgames in %s', args.game)
    _emit(out, args.out)
    return EXIT_OK


def cmd_status(args):
    game, _ = _load_game_dir(args.game, args.payoffs)
    cov = coverage(game)
    cov['auto_generated'] = len(game.auto_generated)
    cov['candidates'] = {r: len(s) for r, s in game.strategy_sets.items()}
    _emit(cov, args.out)
    return EXIT_OK


# search

def _apply_flags(cfg, args):
    data = cfg.data
    if args.seed is not None:
        data['master_seed'] = args.seed
    if args.out is not None:
        data['output_dir'] = os.path.abspath(args.out)
    if args.tau is not None:
        data['inner']['tau'] = args.tau
    if args.budget_iters is not None:
        data['budgets']['iterations'] = args.budget_iters
    if args.budget_wall is not None:
        data['budgets']['wall_clock'] = args.budget_wall
    if args.workers is not None:
        data['workers'] = args.workers
    cfg.validate()


def _typical_payoff(game, scheduler, n):
    first = {r: [game.strategy_sets[r][0]] for r in game.role_names}
    scheduler.schedule_subgame(first, n)
    prof = next(iter(game.all_profiles(first)))
    return float(abs(game.payoffs.mean(prof)).mean())


def build_search(cfg, resume=False):
    """Game, scheduler, and configs for a run config; used by ``search``"""
    out = os.path.abspath(os.path.join(cfg.base_dir, cfg['output_dir']))
    os.makedirs(out, exist_ok=True)
    spec = cfg.compliance_spec()
    roles = cfg.roles()
    log_path = os.path.join(out, PAYOFF_LOG)
    if os.path.exists(log_path) and not resume:
        os.remove(log_path)
    for name in ('progress.jsonl', 'outer.jsonl'):
        if os.path.exists(os.path.join(out, name)) and not resume:
            os.remove(os.path.join(out, name))
    db = PayoffDatabase(roles)
    game = EmpiricalGame(roles, cfg.seed_strategies(), domains=spec.domains,
                         payoffs=db)
    if resume and os.path.exists(log_path):
        db.load(log_path)
    db.path = log_path
    workers = cfg['workers'] or os.cpu_count() or 1
    scheduler = Scheduler(game, cfg.make_oracle(game), cfg['master_seed'],
                          workers)
    return game, scheduler, spec, out


def cmd_search(args):
    cfg = RunConfig.load(args.config)
    _apply_flags(cfg, args)
    game, scheduler, spec, out = build_search(cfg, args.resume)
    inner = cfg['inner']
    outer = cfg['outer']
    with scheduler:
        typical = None
        tau = inner['tau']
        if tau is None:
            typical = _typical_payoff(game, scheduler, inner['minsamp'])
            tau = inner['tau_fraction'] * typical
            log.info('tau set to %.6g (typical payoff %.6g)', tau, typical)
        icfg = InnerLoopConfig(
            tau, inner['minsamp'], inner['mincsamp'],
            inner['max_profile_budget'], inner['restarts'],
            inner['max_iters'], analysis_seed=cfg['master_seed'])
        ocfg = exploration.OuterLoopConfig(
            outer['m'], outer['m_prime'], outer['minsamp'],
            outer['mincsamp'],
            tuple(outer['role_rotation']) if outer['role_rotation'] else None,
            outer['weights'])
        budgets = cfg['budgets']
        progress = ProgressLog(os.path.join(out, 'progress.jsonl'))
        outer_log = ProgressLog(os.path.join(out, 'outer.jsonl'))
        try:
            result = exploration.compliance_search(
                game, icfg, ocfg, scheduler, spec, budgets['iterations'],
                budgets['wall_clock'], progress, outer_log)
        except BudgetExhausted as exc:
            log.warning('%s', exc)
            cands = exc.candidates or analysis.CandidateSet()
            result = exploration.SearchResult(
                exploration._merge_records([], cands.confirmed),
                'profile budget exhausted', 0, [], cands)
    calibration = (cfg.scenario.network.calibration
                   if cfg.scenario is not None else None)
    rep = report.search_report(game, result, tau, spec, outer['weights'])
    report.write_json(os.path.join(out, 'report.json'), rep, 'search_report')
    report.write_json(os.path.join(out, 'catalog.json'), rep['catalog'])
    report.write_json(os.path.join(out, GAME_FILE), game.to_json())
    report.write_json(os.path.join(out, COMPLIANCE_FILE), spec.to_json())
    report.write_json(os.path.join(out, 'manifest.json'), report.manifest(
        'search', cfg.data, cfg['master_seed'], calibration,
        tau=tau, typical_payoff=typical, sims_run=scheduler.sims_run))
    print('status: {}; iterations: {}; solutions: {} ({} closed); '
          'auto-generated strategies: {}; simulations: {}'.format(
              result.status, result.iterations, len(result.solutions),
              sum(not s.is_open for s in result.solutions),
              len(game.auto_generated), scheduler.sims_run))
    print('results in {}'.format(out))
    return EXIT_OK


def make_parser():
    parser = _Parser(prog='compliance-egta', description=__doc__.split(
        '\n')[0])
    parser.add_argument('-v', '--verbose', action='count', default=0)
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True

    sim = sub.add_parser('simulate', help='run one IBR simulation')
    sim.add_argument('--config', required=True,
                     help='scenario file, run config, or bundled name')
    sim.add_argument('--profile', help='role=policy[,policy...];... or JSON '
                     'file')
    sim.add_argument('--seed', type=int)
    sim.add_argument('--out')
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser('analyze', help='find and classify equilibria')
    ana.add_argument('game', help='search output directory or game file')
    ana.add_argument('--payoffs')
    ana.add_argument('--tau', type=float)
    ana.add_argument('--weights', default='player',
                     choices=exploration.SCHEMES)
    ana.add_argument('--out')
    ana.set_defaults(func=cmd_analyze)

    srch = sub.add_parser('search', help='run the compliance search')
    srch.add_argument('--config', required=True)
    srch.add_argument('--seed', type=int)
    srch.add_argument('--out')
    srch.add_argument('--tau', type=float)
    srch.add_argument('--budget-iters', type=int)
    srch.add_argument('--budget-wall', type=float)
    srch.add_argument('--workers', type=int)
    srch.add_argument('--resume', action='store_true',
                      help='continue from an existing payoff log')
    srch.set_defaults(func=cmd_search)

    st = sub.add_parser('status', help='profile counts and coverage')
    st.add_argument('game')
    st.add_argument('--payoffs')
    st.add_argument('--out')
    st.set_defaults(func=cmd_status)
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print('error: {}'.format(exc), file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        return args.func(args)
    except (ConfigurationError, DataError, UsageError) as exc:
        print('error: {}'.format(exc), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        log.debug('failure', exc_info=True)
        print('failed: {!r}'.format(exc), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
