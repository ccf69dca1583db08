"""
Access to the ``DYNREC`` settings dictionary.

The library is usable without a configured Django project; in that case
the built-in defaults below apply, with ``DYNREC_THREADS`` still read from
the environment.
"""
import os
from pathlib import Path
from typing import Any

DEFAULTS = {
    'THREADS': 1,
    'OUTPUT_ROOT': Path('runs'),
    'MAX_ITERS': 500,
    'TOL': 1e-3,
    'KERNEL': 'epanechnikov',
    # 1.0 clamps the plug-in h to the whole horizon at desk scale
    'C_H': 0.25,
    'C1': 1.0,
    'CV_FOLDS': 5,
    'CV_GRID_SIZE': 8,
    'CV_GRID_SPAN': (-2.0, 1.5),
    'CV_EXTENSIONS': 3,
    'CV_REFINE': 5,
    'DESK_DIMS': (120, 80),
    'DESK_RANK': 5,
    'DESK_T': 50,
}


def dynrec_setting(name: str) -> Any:
    from django.conf import settings

    if settings.configured:
        configured = getattr(settings, 'DYNREC', {})
        if name in configured:
            return configured[name]
    if name == 'THREADS':
        return int(os.environ.get('DYNREC_THREADS', DEFAULTS['THREADS']))
    return DEFAULTS[name]


def thread_cap() -> int:
    return max(1, int(dynrec_setting('THREADS')))
