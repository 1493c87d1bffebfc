"""
Command-line front end.

    python app.py [global flags] COMMAND [command flags] MORPHISM

MORPHISM is a builder string (power:1,2  identity:1  chebyshev:2
rat:(z^2-1)|(2z)  file:map.json) or an inline JSON object in the format of
request_contract.json.

Reports go to stdout in the envelopes of response_contract.json and embed
the effective run configuration; errors go to stderr with the exit code
listed there. Log lines go to stderr only with -v, and to hourly files with
--log-dir.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from config import OUTPUT_FORMATS, RunConfig, no_color
from heights.errors import HeightsError, ParseError
from logger import get_run_logger, setup_logging
from tasks import available_workers, new_run_id, run_report_job

BASE_DIR = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(BASE_DIR, 'response_contract.json'), encoding='utf-8') as f:
    RESPONSE_CONTRACT = json.load(f)

CSV_COMMANDS = tuple(RESPONSE_CONTRACT['csv_commands'])

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises ParseError instead of exiting."""

    def error(self, message):
        raise ParseError(message)


# ==============================================================================
# Subcommands
# ==============================================================================

def cmd_check(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.morphism import parse_builder
    from heights.padic_local import excess_constant_witness, local_density
    from heights.resultant import resultant_data

    F = parse_builder(args.morphism)
    data = resultant_data(F)
    result = data.to_json()
    if not data.is_morphism:
        result['witness'] = data.witness()
        return result
    witnesses = {p: excess_constant_witness(F, p, local_density(F, p, class_cap=cfg.class_cap)) for p in data.bad_primes}
    result['constant_excess'] = {str(p): w for p, w in witnesses.items() if w is not None}
    return result


def cmd_resultant(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.morphism import parse_builder
    from heights.resultant import (
        crude_resultant_bound,
        pseudoinverse_excess_bound,
        require_morphism,
        resultant_norm_bound,
        surjectivity_degree,
    )

    F = parse_builder(args.morphism)
    data = require_morphism(F)
    result = data.to_json()
    result['macaulay_degree'] = data.degree
    result['sylvester_shape'] = list(data.shape)
    result['norm_bound'] = str(resultant_norm_bound(F))
    result['crude_bound'] = str(crude_resultant_bound(F))
    if args.pseudoinverse:
        result['pseudoinverse_excess_bound'] = {str(p): pseudoinverse_excess_bound(F, p) for p in data.bad_primes}
    if args.surjectivity:
        result['surjectivity_degree'] = surjectivity_degree(F)
    return result


def cmd_density(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.morphism import parse_builder
    from heights.padic_local import local_density, local_density_flat, local_factor
    from heights.rational_core import format_rational

    F = parse_builder(args.morphism)
    if args.flat:
        table = local_density_flat(F, args.prime, args.flat, class_cap=cfg.class_cap)
    else:
        table = local_density(F, args.prime, max_depth=args.depth, class_cap=cfg.class_cap)
    c, mu = local_factor(F, args.prime, table)
    result = table.to_json()
    result['c_local'] = {'terms': c.to_json()['terms'], 'float': c.float_value}
    result['mu'] = format_rational(mu)
    return result


def cmd_local_factor(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.morphism import parse_builder
    from heights.padic_local import local_density, local_factor
    from heights.rational_core import format_rational

    F = parse_builder(args.morphism)
    c, mu = local_factor(F, args.prime, local_density(F, args.prime, class_cap=cfg.class_cap))
    result = c.to_json()
    result['p'] = args.prime
    result['mu'] = format_rational(mu)
    return result


def cmd_arch_volume(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.archimedean import arch_volume, error_constants
    from heights.morphism import parse_builder

    F = parse_builder(args.morphism)
    result = arch_volume(F, cfg).to_json()
    if args.constants:
        result['error_constants'] = error_constants(F, cfg, check_morphism=False).to_json()
    return result


def cmd_constant(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.constants import assemble_constant
    from heights.morphism import parse_builder

    return assemble_constant(parse_builder(args.morphism), cfg).to_json()


def cmd_chat(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.constants import chat_sequence
    from heights.morphism import identity, parse_builder

    F = parse_builder(args.morphism)
    G = parse_builder(args.g) if args.g else identity(F.m)
    return chat_sequence(F, G, args.iters, cfg, threshold=args.threshold).to_json()


def cmd_canonical(args, cfg: RunConfig) -> Dict[str, Any]:
    from heights.constants import canonical_height
    from heights.morphism import parse_builder
    from heights.rational_core import parse_rational

    F = parse_builder(args.morphism)
    P = [parse_rational(c) for c in args.point.split(',')]
    iters = args.iters if args.iters is not None else cfg.canonical_iters
    return canonical_height(F, P, iters, cfg.green_iters).to_json()


def cmd_count(args, cfg: RunConfig) -> List[Dict[str, Any]]:
    from heights.counting import convergence_report
    from heights.morphism import parse_builder

    F = parse_builder(args.morphism)
    rows = convergence_report(F, args.X, args.mode, cfg, gamma=args.gamma)
    return [r.to_json() for r in rows]


def cmd_report(args, cfg: RunConfig) -> Dict[str, Any]:
    options = {}
    if args.X:
        options['count_xs'] = args.X
    if args.iters is not None:
        options['chat_iters'] = args.iters
    result = run_report_job(args.morphism, cfg, run_id=args.run_id, **options)
    if result['status'] != 'completed':
        error = result['error']
        raise _PipelineFailure(error, result.get('exit_code', 1))
    return result['report']


def cmd_table(args, cfg: RunConfig) -> List[Dict[str, Any]]:
    from heights.rational_core import proj_space_table

    rows = proj_space_table(args.q_max, args.m_max)
    return [{'q': row[0], **{f'm={m}': n for m, n in enumerate(row[1:], start=1)}} for row in rows]


def cmd_trend(args, cfg: RunConfig) -> List[Dict[str, Any]]:
    from heights.archimedean import chebyshev_height_trend

    return [{'d': d, 'height_root': v} for d, v in chebyshev_height_trend(args.d_max)]


class _PipelineFailure(HeightsError):
    def __init__(self, error: Dict[str, Any], exit_code: int):
        super().__init__(error.get('message', 'report failed'), witness=error.get('witness'))
        self.exit_code = exit_code
        self.error_type = error.get('error_type', type(self).__name__)

    def to_dict(self) -> Dict[str, Any]:
        out = super().to_dict()
        out['error_type'] = self.error_type
        return out


COMMANDS: Dict[str, Callable] = {
    'check': cmd_check,
    'resultant': cmd_resultant,
    'density': cmd_density,
    'local-factor': cmd_local_factor,
    'arch-volume': cmd_arch_volume,
    'constant': cmd_constant,
    'chat': cmd_chat,
    'canonical': cmd_canonical,
    'count': cmd_count,
    'report': cmd_report,
    'table': cmd_table,
    'trend': cmd_trend,
}


# ==============================================================================
# Argument parsing
# ==============================================================================

def x_values(text: str) -> List[float]:
    """'4,9' -> [4.0, 9.0]; --X may also be repeated."""
    try:
        return [float(t) for t in text.split(',') if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='heights', description="Counting constants for morphisms P^m -> P^M over Q")
    parser.add_argument('--format', choices=OUTPUT_FORMATS, default=None)
    parser.add_argument('--seed', type=lambda s: int(s, 0), default=None)
    parser.add_argument('--samples', type=int, default=None, help="Monte Carlo samples")
    parser.add_argument('--quad-tol', type=float, default=None)
    parser.add_argument('--threads', type=int, default=None, help="worker processes (default: available cores)")
    parser.add_argument('--config', default=None, help="KEY=VALUE run-config file")
    parser.add_argument('--log-dir', default=None)
    parser.add_argument('-v', '--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_ArgumentParser)

    def command(name: str, help_text: str, morphism: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if morphism:
            p.add_argument('morphism', help="builder string, file:PATH or inline JSON")
        return p

    command('check', "is the lift a morphism; bad primes")

    p = command('resultant', "resultant ideal and bounds")
    p.add_argument('--pseudoinverse', action='store_true')
    p.add_argument('--surjectivity', action='store_true')

    p = command('density', "local density table at one prime")
    p.add_argument('--prime', type=int, required=True)
    p.add_argument('--depth', type=int, default=None, help="refinement depth bound")
    p.add_argument('--flat', type=int, default=None, metavar='S', help="enumerate P^m(Z/p^S) instead")

    p = command('local-factor', "exact local factor and mu at one prime")
    p.add_argument('--prime', type=int, required=True)

    p = command('arch-volume', "volume of the real fundamental domain")
    p.add_argument('--constants', action='store_true', help="include kappa and C_inf")

    command('constant', "the constant c_Q(f)")

    p = command('chat', "c_Q(f^i o g) for i = 0..k and the limit")
    p.add_argument('--iters', type=int, default=3)
    p.add_argument('--g', default=None, help="morphism g (default: identity)")
    p.add_argument('--threshold', choices=('normalized', 'lift'), default='normalized')

    p = command('canonical', "canonical height of a point")
    p.add_argument('--point', required=True, help="comma-separated coordinates, e.g. 3,1")
    p.add_argument('--iters', type=int, default=None)

    p = command('count', "point counts against the predicted main term")
    p.add_argument('--mode', choices=('pullback', 'image', 'canonical'), default='pullback')
    p.add_argument('--X', type=x_values, action='extend', required=True, help="comma-separated, e.g. 100,1000")
    p.add_argument('--gamma', type=int, default=None)

    p = command('report', "every computation in sequence")
    p.add_argument('--X', type=x_values, action='extend', default=None)
    p.add_argument('--iters', type=int, default=None)
    p.add_argument('--run-id', default=None)

    p = command('table', "#P^m(Z/q) for q <= q_max, m <= m_max", morphism=False)
    p.add_argument('--q-max', type=int, default=20)
    p.add_argument('--m-max', type=int, default=5)

    p = command('trend', "|T_d|^(1/d) for Chebyshev maps", morphism=False)
    p.add_argument('--d-max', type=int, default=64)

    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    threads = args.threads
    if threads is None and not args.config:
        threads = available_workers()
    return cfg.with_overrides(
        seed=args.seed,
        mc_samples=args.samples,
        quad_tol=args.quad_tol,
        threads=threads,
        output_format=args.format,
        log_dir=args.log_dir,
    )


# ==============================================================================
# Output
# ==============================================================================

def _csv_text(rows: Sequence[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    return buffer.getvalue()


def _pretty_text(command: str, result: Any) -> str:
    header = f"== {command} =="
    if not no_color():
        header = f"\033[1;32m{header}\033[0m"
    lines = [header]

    def walk(value: Any, indent: int) -> None:
        pad = '  ' * indent
        if isinstance(value, dict):
            for key, item in value.items():
                if isinstance(item, (dict, list)):
                    lines.append(f"{pad}{key}:")
                    walk(item, indent + 1)
                else:
                    lines.append(f"{pad}{key}: {item}")
        elif isinstance(value, list):
            for item in value:
                if isinstance(item, (dict, list)):
                    lines.append(f"{pad}-")
                    walk(item, indent + 1)
                else:
                    lines.append(f"{pad}- {item}")
        else:
            lines.append(f"{pad}{value}")

    walk(result, 0)
    return '\n'.join(lines) + '\n'


def render(command: str, result: Any, cfg: RunConfig, run_id: str) -> str:
    fmt = cfg.output_format
    if fmt == 'csv':
        if not isinstance(result, list):
            raise ParseError(f"--format csv is only available for {', '.join(CSV_COMMANDS)}")
        return _csv_text(result)
    if fmt == 'pretty':
        return _pretty_text(command, result)
    envelope = dict(RESPONSE_CONTRACT['ok'])
    envelope.update({'command': command, 'run_id': run_id, 'config': cfg.as_dict(), 'result': result})
    return json.dumps(envelope, indent=2, default=str) + '\n'


def error_envelope(command: Optional[str], run_id: str, error: HeightsError) -> str:
    envelope = dict(RESPONSE_CONTRACT['error'])
    envelope.update({'command': command, 'run_id': run_id, **error.to_dict()})
    return json.dumps(envelope, indent=2, default=str) + '\n'


# ==============================================================================
# Entry point
# ==============================================================================

def run(argv: Sequence[str], stdout=None, stderr=None) -> int:
    """Parse argv, run one subcommand, write the report; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    run_id = new_run_id()
    command = None
    try:
        args = build_parser().parse_args(list(argv))
        command = args.command
        # stderr carries only the error envelope unless -v
        setup_logging(log_dir=args.log_dir, level='DEBUG' if args.verbose else 'WARNING',
                      stream=stderr if args.verbose else None)
        cfg = resolve_config(args)
        if args.format is None and command in CSV_COMMANDS:
            cfg = cfg.with_overrides(output_format='csv')
        if command == 'report' and args.run_id is None:
            args.run_id = run_id
        log = get_run_logger(run_id, 'heights.cli')
        log.info("%s %s", command, getattr(args, 'morphism', ''))
        result = COMMANDS[command](args, cfg)
        stdout.write(render(command, result, cfg, run_id))
        return 0
    except HeightsError as e:
        stderr.write(error_envelope(command, run_id, e))
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error")
        wrapped = HeightsError(f"{type(e).__name__}: {e}")
        stderr.write(error_envelope(command, run_id, wrapped))
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
