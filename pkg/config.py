"""
Configuration defaults for height computations and counting runs.

Every numeric default lives here as a module constant. A run can override
them from the command line or from a KEY=VALUE file (read with
python-dotenv); the process environment is deliberately not consulted,
apart from NO_COLOR for pretty output.
"""
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional

# ==============================================================================
# Monte Carlo / quadrature
# ==============================================================================
DEFAULT_SEED = 0x5EED
MC_SAMPLES = 10**6
MC_BATCH = 100_000            # samples per independent stream
QUAD_TOL = 1e-8               # absolute target for the m = 1 angular quadrature
QUAD_LIMIT = 400              # subdivision limit per quadrature panel

# ==============================================================================
# Archimedean constants and Green's functions
# ==============================================================================
KAPPA_GRID = 200_000          # approximate number of sphere grid points for kappa
GREEN_ITERS = 60
EXACT_ITERS = 3               # exact compositions used for the |F^i o G|^(1/d^i) threshold

# ==============================================================================
# Dynamics and counting
# ==============================================================================
CHAT_MAX_ITERS = 5            # hard cap on iterates in chat sequences
CANONICAL_ITERS = 40          # orbit length for finite-place corrections
CLASS_CAP = 10**7             # residue classes visited by density refinement

# ==============================================================================
# Factorization
# ==============================================================================
FACTOR_TRIAL_LIMIT = 10**6
FACTOR_MAX = 33 * 10**23      # deterministic Miller-Rabin range (3.3e24)

# ==============================================================================
# Logging
# ==============================================================================
LOG_LEVEL = 'INFO'
LOG_BACKUP_HOURS = 168        # 7 days of hourly files
LOG_PREFIX = 'heights'

OUTPUT_FORMATS = ('json', 'csv', 'pretty')


def no_color() -> bool:
    """True when the NO_COLOR convention asks for plain output."""
    return bool(os.environ.get('NO_COLOR'))


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one run; embedded verbatim in every report."""

    seed: int = DEFAULT_SEED
    mc_samples: int = MC_SAMPLES
    mc_batch: int = MC_BATCH
    quad_tol: float = QUAD_TOL
    kappa_grid: int = KAPPA_GRID
    green_iters: int = GREEN_ITERS
    exact_iters: int = EXACT_ITERS
    chat_max_iters: int = CHAT_MAX_ITERS
    canonical_iters: int = CANONICAL_ITERS
    class_cap: int = CLASS_CAP
    threads: int = 1
    output_format: str = 'json'
    log_dir: Optional[str] = None

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **overrides: Any) -> 'RunConfig':
        """Return a copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes)

    @classmethod
    def from_file(cls, path: str) -> 'RunConfig':
        """
        Build a config from a KEY=VALUE file.

        Keys are the field names, case-insensitive (MC_SAMPLES=200000).
        Unknown keys raise ParseError.
        """
        from dotenv import dotenv_values
        from heights.errors import ParseError

        if not os.path.exists(path):
            raise ParseError(f"Config file not found: {path}")

        known = {f.name: f for f in fields(cls)}
        values: Dict[str, Any] = {}
        for key, raw in dotenv_values(path).items():
            name = key.lower()
            if name not in known:
                raise ParseError(f"Unknown config key: {key}")
            if raw is None:
                continue
            values[name] = _coerce(name, raw)
        return cls(**values)


def _coerce(name: str, raw: str) -> Any:
    from heights.errors import ParseError

    try:
        if name == 'quad_tol':
            return float(raw)
        if name in ('output_format', 'log_dir'):
            return raw
        return int(raw, 0)
    except ValueError as e:
        raise ParseError(f"Bad value for {name}: {raw!r}") from e


DEFAULT_CONFIG = RunConfig()
