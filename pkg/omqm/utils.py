import math
import os
import tempfile
import time
from numbers import Integral, Real

import numpy as np
from nanome.util import Logs


__all__ = ['chunks', 'split_evenly', 'worker_count', 'atomic_write', 'to_jsonable', 'log_elapsed_time']


# Default thread count for fan-out work. Results never depend on it.
DEFAULT_WORKERS = int(os.environ.get('OMQM_WORKERS', 0) or min(8, os.cpu_count() or 1))


def chunks(lst, n):
    """Yield successive n-sized chunks from lst."""
    for i in range(0, len(lst), n):
        yield lst[i:i + n]


def split_evenly(lst, workers):
    """Chunk lst so that roughly `workers` chunks come out, order preserved."""
    size = max(1, math.ceil(len(lst) / max(1, workers)))
    return list(chunks(lst, size))


def worker_count(requested=None):
    if requested is None:
        return DEFAULT_WORKERS
    if requested < 1:
        raise ValueError(f'worker count must be >= 1, received {requested}')
    return int(requested)


def atomic_write(path, data):
    """Write bytes or text to path through a temp file in the same directory and a rename."""
    if isinstance(data, str):
        data = data.encode('utf-8')
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=directory, prefix=f'.{os.path.basename(path)}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    return path


def to_jsonable(value):
    """Convert results into plain JSON types. Complex numbers become {"re", "im"}."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, Integral):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(value.real), 'im': float(value.imag)}
    if isinstance(value, Real):
        return float(value)
    if hasattr(value, 'value') and hasattr(value, 'name'):
        # Enum members
        return value.value
    return value


def log_elapsed_time(start_time, label, **extra):
    elapsed_time = time.time() - start_time
    extra['elapsed_time'] = float(elapsed_time)
    Logs.debug(f'{label} took {round(elapsed_time, 2)} seconds', extra=extra)
    return elapsed_time
