import os
from concurrent.futures import ProcessPoolExecutor


def coerce_number(raw):
    """Coerce a raw flag string into int or float when applicable.

    Integers stay integers ("10" -> 10), anything float-like becomes a float
    ("0.25" -> 0.25, "1e-3" -> 0.001); other strings are returned unchanged.
    """
    if not isinstance(raw, str):
        return raw

    stripped = raw.strip()
    sign_free = stripped[1:] if stripped[:1] in ("-", "+") else stripped
    if sign_free.isdigit():
        return int(stripped)

    try:
        return float(stripped)
    except ValueError:
        return raw


def parse_int_list(raw):
    """Parse "250,500,1000" (or a single integer) into a list of ints."""
    if isinstance(raw, int):
        return [raw]
    if isinstance(raw, (list, tuple)):
        return [int(v) for v in raw]
    values = []
    for part in str(raw).split(","):
        part = part.strip()
        if not part:
            continue
        value = coerce_number(part)
        if not isinstance(value, int):
            raise ValueError(f"expected an integer list, got {raw!r}")
        values.append(value)
    if not values:
        raise ValueError(f"expected an integer list, got {raw!r}")
    return values


def format_float(value):
    """17 significant digits: round-trips any binary64 value."""
    return format(float(value), ".17g")


def default_jobs():
    return os.cpu_count() or 1


def fan_out(fn, items, jobs=1):
    """Map `fn` over `items` in order, across `jobs` worker processes.

    Results come back in input order whatever the worker count, so callers
    that aggregate in that order are reproducible. `fn` must be picklable
    (a module-level function or a functools.partial of one).
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))
