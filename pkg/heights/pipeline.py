"""
Full Report Pipeline

Runs every computation for one morphism and collects the results:
1. Morphism check and resultant
2. Local densities and the nonarchimedean constant
3. Archimedean volume and error constants
4. Assembly of c_Q(f)
5. (endomorphisms of degree >= 2) chat sequence and canonical heights
6. Pullback counts against the prediction

Equivalent to running the individual subcommands in sequence; a failure
in any step ends the run with a 'failed' status instead of an exception.
"""
import itertools
from typing import Any, Callable, Dict, Optional, Sequence

from config import DEFAULT_CONFIG, RunConfig
from heights.archimedean import arch_volume, error_constants
from heights.constants import assemble_constant, canonical_height, chat_sequence
from heights.counting import count_pullback, enumerate_points, pullback_radius
from heights.errors import HeightsError
from heights.morphism import HomogeneousLift, identity, normalize, to_json
from heights.padic_local import excess_constant_witness, global_densities, nonarch_constant
from heights.resultant import require_morphism
from logger import get_run_logger

DEFAULT_COUNT_XS = (10, 100)
DEFAULT_CHAT_ITERS = 2
SPOT_HEIGHT = 2


def run_report(
    F: HomogeneousLift,
    cfg: RunConfig = DEFAULT_CONFIG,
    run_id: str = 'report',
    progress_callback: Optional[Callable[[int, str], None]] = None,
    count_xs: Sequence[float] = DEFAULT_COUNT_XS,
    chat_iters: int = DEFAULT_CHAT_ITERS,
) -> Dict[str, Any]:
    """
    Returns:
        Dictionary with:
        - status: 'completed' or 'failed'
        - run_id
        - report: every section computed (completed runs)
        - error / exit_code: the failing step's error (failed runs)
    """
    log = get_run_logger(run_id)

    def update_progress(progress: int, step: str):
        if progress_callback:
            progress_callback(progress, step)
        else:
            log.info("[%d%%] %s", progress, step)

    report: Dict[str, Any] = {'morphism': to_json(F)}
    N = normalize(F)

    try:
        # ==============================================================
        # STEP 1: Morphism check and resultant
        # ==============================================================
        update_progress(5, "resultant")
        log.info("=" * 60)
        log.info("STEP 1: Resultant")
        log.info("=" * 60)

        data = require_morphism(N)
        report['resultant'] = data.to_json()
        log.info("✅ Morphism; Res f = %s", data.res_ideal)

        # ==============================================================
        # STEP 2: Local densities and c_0
        # ==============================================================
        update_progress(20, "densities")
        log.info("=" * 60)
        log.info("STEP 2: Local densities at %d bad prime(s)", len(data.bad_primes))
        log.info("=" * 60)

        nonarch = nonarch_constant(N, class_cap=cfg.class_cap, threads=cfg.threads)
        report['densities'] = {str(t.p): t.to_json() for t in nonarch.tables}
        report['nonarch'] = nonarch.to_json()
        report['global_densities'] = {
            str(ideal): str(w) for ideal, w in global_densities(N, nonarch).items()
        }
        witnesses = {
            str(t.p): excess_constant_witness(N, t.p, t) for t in nonarch.tables
        }
        report['constant_excess'] = {p: w for p, w in witnesses.items() if w is not None}
        if report['constant_excess']:
            log.warning("⚠️ Excess valuation is a nonzero constant at %s", list(report['constant_excess']))
        log.info("✅ c_0 = %s, C0d = %d", nonarch.exact, nonarch.C0d)

        # ==============================================================
        # STEP 3: Archimedean volume and error constants
        # ==============================================================
        update_progress(40, "archimedean")
        log.info("=" * 60)
        log.info("STEP 3: Archimedean volume")
        log.info("=" * 60)

        arch = arch_volume(N, cfg, check_morphism=False)
        constants = error_constants(N, cfg, C0d=nonarch.C0d, check_morphism=False)
        report['arch'] = arch.to_json()
        report['error_constants'] = constants.to_json()
        log.info("✅ vol D = %.10g +- %.2g (%s)", arch.value, arch.error, arch.method)

        # ==============================================================
        # STEP 4: c_Q(f)
        # ==============================================================
        update_progress(55, "constant")
        constant = assemble_constant(N, cfg, nonarch=nonarch, arch=arch, check_morphism=False)
        report['constant'] = constant.to_json()
        log.info("✅ c(f) = %.10g +- %.2g", constant.c_value, constant.c_error)

        # ==============================================================
        # STEP 5: Dynamics
        # ==============================================================
        if N.is_endomorphism() and N.d >= 2:
            update_progress(65, "dynamics")
            log.info("=" * 60)
            log.info("STEP 5: Dynamics (%d iterates)", chat_iters)
            log.info("=" * 60)

            k = min(chat_iters, cfg.chat_max_iters)
            sequence = chat_sequence(N, identity(N.m), k, cfg)
            report['chat'] = sequence.to_json()
            spots = itertools.islice(enumerate_points(N.m, SPOT_HEIGHT), 8)
            report['canonical_heights'] = {
                str(P): canonical_height(N, P.coords, cfg.canonical_iters, cfg.green_iters).to_json()
                for P in spots
            }
            log.info("✅ limit estimate %.8g +- %.2g", sequence.limit, sequence.limit_error)

        # ==============================================================
        # STEP 6: Counts
        # ==============================================================
        update_progress(80, "counting")
        rows = []
        for X in count_xs:
            B = pullback_radius(N, X, cfg, constants=constants)
            rows.append(count_pullback(N, X, cfg, constant=constant.c_value, radius=B).to_json())
            log.info("Counted X=%s (scan radius %d)", X, B)
        report['counts'] = rows

        update_progress(100, "completed")
        return {'status': 'completed', 'run_id': run_id, 'report': report}

    except HeightsError as e:
        log.error("❌ Report failed: %s", e.message)
        return {'status': 'failed', 'run_id': run_id, 'error': e.to_dict(), 'exit_code': e.exit_code, 'report': report}
    except Exception as e:
        log.exception("❌ Unexpected error in report pipeline")
        return {
            'status': 'failed',
            'run_id': run_id,
            'error': {'error_type': type(e).__name__, 'message': str(e), 'exit_code': 1, 'witness': {}},
            'exit_code': 1,
            'report': report,
        }
